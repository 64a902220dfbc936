#include "icl/icl.h"

#include <cstring>
#include <json.hpp>
#include <string>

#include "closed_form.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "landscape.hpp"
#include "parallel.hpp"
#include "serialize.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const icl::ParseError& e) {
    g_last_error = e.what();
    return ICL_ERR_PARSE;
  } catch (const icl::ValidationError& e) {
    g_last_error = e.what();
    return ICL_ERR_INVALID;
  } catch (const icl::CheckFailed& e) {
    g_last_error = e.what();
    return ICL_ERR_CHECK_FAILED;
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return ICL_ERR_PARSE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ICL_ERR_RUNTIME;
  }
}

json parse_json(const char* text) {
  if (!text) throw icl::ParseError("null input");
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw icl::ParseError("malformed JSON");
  return j;
}

}  // namespace

struct icl_runner {
  json config;
  std::string summary;
  std::string error;
};

extern "C" {

int icl_runner_create(const char* config_json, icl_runner** out) {
  if (!out) {
    g_last_error = "null output handle";
    return ICL_ERR_INVALID;
  }
  *out = nullptr;
  return guarded([&] {
    json cfg = icl::validate_config(parse_json(config_json));
    *out = new icl_runner{std::move(cfg), {}, {}};
    return ICL_OK;
  });
}

int icl_runner_run(icl_runner* runner) {
  if (!runner) {
    g_last_error = "null runner";
    return ICL_ERR_INVALID;
  }
  const int status = guarded([&] {
    icl::ExperimentOutcome outcome = icl::run_experiment_config(runner->config);
    runner->summary = outcome.summary.dump(2);
    return outcome.check_failed ? ICL_ERR_CHECK_FAILED : ICL_OK;
  });
  if (status != ICL_OK && status != ICL_ERR_CHECK_FAILED)
    runner->error = g_last_error;
  else if (status == ICL_ERR_CHECK_FAILED)
    runner->error = "experiment assertions failed";
  return status;
}

const char* icl_runner_summary(const icl_runner* runner) {
  return runner ? runner->summary.c_str() : "";
}

const char* icl_runner_error(const icl_runner* runner) {
  return runner ? runner->error.c_str() : "null runner";
}

void icl_runner_destroy(icl_runner* runner) { delete runner; }

int icl_closed_form_json(const char* spec_json, int n, char** out_json) {
  if (!out_json) {
    g_last_error = "null output pointer";
    return ICL_ERR_INVALID;
  }
  *out_json = nullptr;
  return guarded([&] {
    icl::CovarianceSpec spec = icl::spec_from_json(parse_json(spec_json));
    icl::OptimalSingleLayer opt = icl::optimal_single_layer(spec, n);
    *out_json = dup_string(icl::optimum_to_json(opt).dump(2));
    return ICL_OK;
  });
}

int icl_heatmap_csv(const char* weights_json, int layer, int whitened,
                    char** out_csv) {
  if (!out_csv) {
    g_last_error = "null output pointer";
    return ICL_ERR_INVALID;
  }
  *out_csv = nullptr;
  return guarded([&] {
    json j = parse_json(weights_json);
    if (!j.contains("params"))
      throw icl::ValidationError("weights: missing params");
    icl::TransformerParams params = icl::params_from_json(j["params"]);
    if (layer < 0 || layer >= params.depth())
      throw icl::ValidationError("weights: layer index out of range");
    Eigen::MatrixXd M;
    switch (params.variant) {
      case icl::Variant::Sparse: M = params.sparse[layer].A; break;
      case icl::Variant::GDPP: M = params.gdpp[layer].A; break;
      case icl::Variant::Full:
        M = params.full[layer].Q.topLeftCorner(params.d, params.d);
        break;
    }
    if (whitened) {
      if (!j.contains("spec"))
        throw icl::ValidationError("weights: whitening needs an embedded spec");
      icl::CovarianceSpec spec = icl::spec_from_json(j["spec"]);
      if (spec.dim != params.d)
        throw icl::ValidationError("weights: spec/params dimension mismatch");
      M = spec.SigmaHalf * M * spec.SigmaHalf;
    }
    *out_csv = dup_string(icl::matrix_to_csv(M));
    return ICL_OK;
  });
}

int icl_verify_json(unsigned long long seed, char** out_json) {
  if (!out_json) {
    g_last_error = "null output pointer";
    return ICL_ERR_INVALID;
  }
  *out_json = nullptr;
  return guarded([&] {
    json cfg = {{"experiment", "identities"}, {"seed", seed}};
    icl::ExperimentOutcome outcome = icl::run_experiment_config(cfg);
    *out_json = dup_string(outcome.summary.dump(2));
    return outcome.check_failed ? ICL_ERR_CHECK_FAILED : ICL_OK;
  });
}

void icl_set_threads(int n) { icl::set_thread_count(n); }

const char* icl_last_error(void) { return g_last_error.c_str(); }

void icl_string_free(char* s) { delete[] s; }

}  // extern "C"
