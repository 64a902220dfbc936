#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <json.hpp>
#include <string>

#include <icl/icl.h>

using nlohmann::json;

namespace {

struct Freed {
  char* s = nullptr;
  ~Freed() { icl_string_free(s); }
};

}  // namespace

TEST_CASE("closed form over the C surface") {
  const char* spec = R"({"d":5,"d_entries":[1,1,1,1,1],"u":"identity"})";
  Freed out;
  REQUIRE(icl_closed_form_json(spec, 20, &out.s) == ICL_OK);
  json j = json::parse(out.s);
  REQUIRE(j["s"].size() == 5);
  for (const auto& v : j["s"])
    CHECK(v.get<double>() == doctest::Approx(10.0 / 13.0).epsilon(1e-12));
  CHECK(j["b"][5].get<double>() == 1.0);
  CHECK(j["A"][0][0].get<double>() ==
        doctest::Approx(-10.0 / 13.0).epsilon(1e-12));
}

TEST_CASE("closed form status codes") {
  Freed out;
  CHECK(icl_closed_form_json("{not json", 5, &out.s) == ICL_ERR_PARSE);
  CHECK(std::strlen(icl_last_error()) > 0);
  CHECK(out.s == nullptr);
  Freed out2;
  CHECK(icl_closed_form_json(R"({"d":2,"d_entries":[1,0]})", 5, &out2.s) ==
        ICL_ERR_INVALID);
  Freed out3;
  CHECK(icl_closed_form_json(R"({"d":2,"d_entries":[1,1]})", 0, &out3.s) ==
        ICL_ERR_INVALID);
  CHECK(icl_closed_form_json(R"({"d":1,"d_entries":[1]})", 1, nullptr) ==
        ICL_ERR_INVALID);
}

TEST_CASE("runner lifecycle") {
  icl_runner* runner = nullptr;
  const char* cfg = R"({"experiment":"identities","seed":3,"instances":10})";
  REQUIRE(icl_runner_create(cfg, &runner) == ICL_OK);
  REQUIRE(runner != nullptr);
  CHECK(icl_runner_run(runner) == ICL_OK);
  json summary = json::parse(icl_runner_summary(runner));
  CHECK(summary["pass"].get<bool>());
  icl_runner_destroy(runner);

  icl_runner* bad = nullptr;
  CHECK(icl_runner_create("{ nope", &bad) == ICL_ERR_PARSE);
  CHECK(bad == nullptr);
  CHECK(icl_runner_create(R"({"experiment":"unknown"})", &bad) ==
        ICL_ERR_INVALID);
  CHECK(bad == nullptr);
  CHECK(icl_runner_run(nullptr) == ICL_ERR_INVALID);
}

TEST_CASE("verify entry point") {
  Freed out;
  REQUIRE(icl_verify_json(5, &out.s) == ICL_OK);
  json j = json::parse(out.s);
  CHECK(j["pass"].get<bool>());
  CHECK(j["checks"].size() >= 6);
}

TEST_CASE("heatmap extraction") {
  json weights;
  weights["params"] = {
      {"variant", "sparse"},
      {"layers", json::array({{{"A", json::array({json::array({1.5, 0.25}),
                                                  json::array({0.25, -2.0})})}}})}};
  weights["spec"] = {{"d", 2}, {"d_entries", json::array({1.0, 2.0})},
                     {"u", "identity"}};
  const std::string text = weights.dump();

  Freed raw;
  REQUIRE(icl_heatmap_csv(text.c_str(), 0, 0, &raw.s) == ICL_OK);
  CHECK(std::string(raw.s) == "1.5,0.25\n0.25,-2\n");

  Freed white;
  REQUIRE(icl_heatmap_csv(text.c_str(), 0, 1, &white.s) == ICL_OK);
  // SigmaHalf = diag(1, 2): entry (0,1) scales by 2, (1,1) by 4.
  CHECK(std::string(white.s) == "1.5,0.5\n0.5,-8\n");

  Freed oob;
  CHECK(icl_heatmap_csv(text.c_str(), 3, 0, &oob.s) == ICL_ERR_INVALID);
  Freed nospec;
  json no_spec = weights;
  no_spec.erase("spec");
  CHECK(icl_heatmap_csv(no_spec.dump().c_str(), 0, 1, &nospec.s) ==
        ICL_ERR_INVALID);
  Freed parse;
  CHECK(icl_heatmap_csv("[", 0, 0, &parse.s) == ICL_ERR_PARSE);
}

TEST_CASE("thread override does not change results") {
  Freed a, b;
  icl_set_threads(1);
  REQUIRE(icl_verify_json(9, &a.s) == ICL_OK);
  icl_set_threads(3);
  REQUIRE(icl_verify_json(9, &b.s) == ICL_OK);
  icl_set_threads(1);
  CHECK(std::string(a.s) == std::string(b.s));
}
