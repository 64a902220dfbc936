#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "icl/icl.h"

using nlohmann::json;

namespace {

int map_status(int status) {
  switch (status) {
    case ICL_OK: return 0;
    case ICL_ERR_PARSE: return 2;
    case ICL_ERR_INVALID: return 3;
    case ICL_ERR_CHECK_FAILED: return 1;
    default: return 4;
  }
}

std::string owned_string(char* s) {
  std::string out = s ? s : "";
  icl_string_free(s);
  return out;
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return false;
  std::ostringstream ss;
  ss << f.rdbuf();
  out = ss.str();
  return true;
}

int cmd_run(const std::string& config_path, long seed, const std::string& out_dir,
            int threads, long batch) {
  std::string text;
  if (!read_file(config_path, text)) {
    std::fprintf(stderr, "error: cannot read config %s\n", config_path.c_str());
    return 3;
  }
  json cfg = json::parse(text, nullptr, false);
  if (cfg.is_discarded()) {
    std::fprintf(stderr, "error: malformed JSON in %s\n", config_path.c_str());
    return 2;
  }
  if (seed >= 0) cfg["seed"] = seed;
  if (!out_dir.empty()) cfg["out"] = out_dir;
  if (batch > 0) cfg["batch"] = batch;
  if (threads > 0) icl_set_threads(threads);

  icl_runner* runner = nullptr;
  int status = icl_runner_create(cfg.dump().c_str(), &runner);
  if (status != ICL_OK) {
    std::fprintf(stderr, "error: %s\n", icl_last_error());
    return map_status(status);
  }
  status = icl_runner_run(runner);
  if (status == ICL_OK || status == ICL_ERR_CHECK_FAILED) {
    std::printf("%s\n", icl_runner_summary(runner));
  } else {
    std::fprintf(stderr, "error: %s\n", icl_runner_error(runner));
  }
  icl_runner_destroy(runner);
  return map_status(status);
}

int cmd_closed_form(int d, int n, const std::string& entries,
                    long u_seed, const std::string& out_path) {
  json spec;
  spec["d"] = d;
  if (entries.empty()) {
    spec["d_entries"] = std::vector<double>(static_cast<std::size_t>(d), 1.0);
  } else {
    std::vector<double> vals;
    std::stringstream ss(entries);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        vals.push_back(std::stod(tok));
      } catch (...) {
        std::fprintf(stderr, "error: bad entry '%s'\n", tok.c_str());
        return 3;
      }
    }
    spec["d_entries"] = vals;
  }
  if (u_seed >= 0) spec["u_seed"] = u_seed;

  char* out = nullptr;
  const int status = icl_closed_form_json(spec.dump().c_str(), n, &out);
  if (status != ICL_OK) {
    std::fprintf(stderr, "error: %s\n", icl_last_error());
    return map_status(status);
  }
  const std::string text = owned_string(out);
  json opt = json::parse(text);
  for (double s : opt["s"].get<std::vector<double>>()) std::printf("%.6f\n", s);
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
    f << text << "\n";
  }
  return 0;
}

int cmd_heatmap(const std::string& weights_path, int layer, bool whitened,
                const std::string& out_path) {
  std::string text;
  if (!read_file(weights_path, text)) {
    std::fprintf(stderr, "error: cannot read %s\n", weights_path.c_str());
    return 3;
  }
  char* out = nullptr;
  const int status = icl_heatmap_csv(text.c_str(), layer, whitened ? 1 : 0, &out);
  if (status != ICL_OK) {
    std::fprintf(stderr, "error: %s\n", icl_last_error());
    return map_status(status);
  }
  const std::string csv = owned_string(out);
  if (out_path.empty()) {
    std::printf("%s", csv.c_str());
  } else {
    std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
    f << csv;
  }
  return 0;
}

int cmd_verify(long seed, int threads) {
  if (threads > 0) icl_set_threads(threads);
  char* out = nullptr;
  const int status =
      icl_verify_json(static_cast<unsigned long long>(seed < 0 ? 1 : seed), &out);
  std::printf("%s\n", owned_string(out).c_str());
  return map_status(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masked linear-attention lab for in-context linear regression"};
  app.require_subcommand(1);

  std::string config_path, out_dir, entries, weights_path, out_path;
  long seed = -1, batch = 0, u_seed = -1;
  int threads = 0, d = 0, n = 0, layer = 0;
  bool whitened = false;

  auto* run = app.add_subcommand("run", "run a configured experiment");
  run->add_option("--config", config_path, "experiment config JSON")->required();
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out_dir, "override the output directory");
  run->add_option("--threads", threads, "worker thread count");
  run->add_option("--batch", batch, "override the prompt batch size");

  auto* cf = app.add_subcommand("closed-form", "print the single-layer optimum scales");
  cf->add_option("-d,--dim", d, "covariate dimension")->required();
  cf->add_option("-n,--context", n, "prompt length")->required();
  cf->add_option("--entries", entries, "comma-separated diagonal entries of D");
  cf->add_option("--u-seed", u_seed, "seed for a random orthogonal basis");
  cf->add_option("--out", out_path, "also write the optimum as JSON");

  auto* hm = app.add_subcommand("heatmap", "emit one weight matrix as CSV");
  hm->add_option("--weights", weights_path, "weights.json from a run")->required();
  hm->add_option("--layer", layer, "layer index")->required();
  hm->add_flag("--whitened", whitened, "conjugate by SigmaHalf first");
  hm->add_option("--out", out_path, "output file (default stdout)");

  auto* vf = app.add_subcommand("verify", "run the exact-identity suite");
  vf->add_option("--seed", seed, "random seed");
  vf->add_option("--threads", threads, "worker thread count");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(config_path, seed, out_dir, threads, batch);
  if (cf->parsed()) return cmd_closed_form(d, n, entries, u_seed, out_path);
  if (hm->parsed()) return cmd_heatmap(weights_path, layer, whitened, out_path);
  return cmd_verify(seed, threads);
}
