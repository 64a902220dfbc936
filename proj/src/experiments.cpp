#include "experiments.hpp"

#include <cmath>
#include <filesystem>

#include "closed_form.hpp"
#include "errors.hpp"
#include "gd_oracle.hpp"
#include "icl_loss.hpp"
#include "landscape.hpp"
#include "serialize.hpp"
#include "trainer.hpp"

namespace icl {

using nlohmann::json;

namespace {

const char* kExperiments[] = {"single-layer", "pnull", "pq",
                              "lemma1-fuzz", "flow",  "identities"};

int uniform_int(RngStream& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
}

Eigen::MatrixXd random_symmetric(int d, double scale, RngStream& rng) {
  Eigen::MatrixXd M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      const double v = scale * rng.gaussian();
      M(i, j) = v;
      M(j, i) = v;
    }
  return M;
}

CovarianceSpec random_spec(int d, RngStream& rng) {
  Eigen::VectorXd entries(d);
  for (int i = 0; i < d; ++i) entries[i] = 0.5 + rng.uniform();
  Eigen::MatrixXd U = haar_orthogonal(d, rng);
  return make_covariance(d, entries, U);
}

void emit_run(const std::string& dir, const ExperimentRun& run) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const int iters = static_cast<int>(run.rec.loss.size());
  const int k = run.rec.dist_raw.empty() ? 0 : static_cast<int>(run.rec.dist_raw[0].size());
  std::vector<std::vector<double>> loss_rows, raw_rows, white_rows, b_rows;
  for (int t = 0; t < iters; ++t) {
    loss_rows.push_back({static_cast<double>(t), run.rec.loss[t]});
    std::vector<double> r{static_cast<double>(t)}, w{static_cast<double>(t)};
    for (int i = 0; i < k; ++i) {
      r.push_back(run.rec.dist_raw[t][i]);
      w.push_back(run.rec.dist_whitened[t][i]);
    }
    raw_rows.push_back(std::move(r));
    white_rows.push_back(std::move(w));
    if (!run.rec.dist_b[t].empty()) {
      std::vector<double> b{static_cast<double>(t)};
      for (double v : run.rec.dist_b[t]) b.push_back(v);
      b_rows.push_back(std::move(b));
    }
  }
  std::vector<std::string> loss_hdr{"iter", "loss"};
  std::vector<std::string> layer_hdr{"iter"};
  for (int i = 0; i < k; ++i) layer_hdr.push_back("layer" + std::to_string(i));
  write_file(dir + "/loss.csv", rows_to_csv(loss_hdr, loss_rows));
  write_file(dir + "/dist_raw.csv", rows_to_csv(layer_hdr, raw_rows));
  write_file(dir + "/dist_whitened.csv", rows_to_csv(layer_hdr, white_rows));
  if (!b_rows.empty()) {
    std::vector<std::string> b_hdr{"iter"};
    for (std::size_t i = 0; i < b_rows[0].size() - 1; ++i)
      b_hdr.push_back("layer" + std::to_string(i));
    write_file(dir + "/dist_b.csv", rows_to_csv(b_hdr, b_rows));
  }
  json weights;
  weights["spec"] = spec_to_json(run.spec);
  weights["params"] = params_to_json(run.rec.final_params);
  write_file(dir + "/weights.json", weights.dump(2) + "\n");
}

// Scale-free single-layer object: the loss only sees b and A through the
// bilinear form, so the outer product of b with vec(A) cancels the gamma family.
Eigen::MatrixXd scale_free_product(const Eigen::VectorXd& b, const Eigen::MatrixXd& A) {
  Eigen::Map<const Eigen::VectorXd> va(A.data(), A.size());
  return b * va.transpose();
}

struct CheckList {
  json items = json::array();
  void add(const std::string& name, bool pass, double value, double bound) {
    items.push_back({{"name", name}, {"pass", pass}, {"value", value}, {"bound", bound}});
  }
  bool all() const {
    for (const auto& it : items)
      if (!it["pass"].get<bool>()) return false;
    return true;
  }
};

ExperimentOutcome run_lemma1_fuzz(const json& cfg) {
  const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();
  const int cases = cfg.value("cases", 200);
  double max_gap = 0.0;
  for (int t = 0; t < cases; ++t) {
    RngStream rng(seed, kStreamMisc | static_cast<std::uint64_t>(t));
    const int d = uniform_int(rng, 1, 6);
    const int n = uniform_int(rng, 1, 30);
    const int k = uniform_int(rng, 1, 4);
    CovarianceSpec spec = random_spec(d, rng);
    const WeightPrior prior =
        t % 2 ? WeightPrior::Isotropic : WeightPrior::InverseCovariance;
    Prompt prompt = sample_prompt(spec, n, prior, rng);
    std::vector<Eigen::MatrixXd> A;
    for (int i = 0; i < k; ++i)
      A.push_back(random_symmetric(d, 1.0 / std::sqrt(double(d)), rng));
    max_gap = std::max(max_gap, check_lemma1(prompt, make_sparse(std::move(A))));
  }
  ExperimentOutcome out;
  out.summary = {{"experiment", "lemma1-fuzz"},
                 {"cases", cases},
                 {"max_gap", max_gap},
                 {"threshold", 1e-9},
                 {"pass", max_gap <= 1e-9}};
  out.check_failed = max_gap > 1e-9;
  return out;
}

ExperimentOutcome run_identities(const json& cfg) {
  const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();
  const int instances = cfg.value("instances", 100);
  double g_trace = 0.0, g_scale = 0.0, g_swap = 0.0, g_rot = 0.0, g_embed = 0.0,
         g_step = 0.0;
  for (int t = 0; t < instances; ++t) {
    RngStream rng(seed, kStreamMisc | static_cast<std::uint64_t>(0x10000 + t));
    const int d = uniform_int(rng, 1, 5);
    const int n = uniform_int(rng, 2, 12);
    CovarianceSpec spec = random_spec(d, rng);
    Prompt prompt = sample_prompt(
        spec, n, t % 2 ? WeightPrior::Isotropic : WeightPrior::InverseCovariance,
        rng);
    const double sym_scale = 0.3 / std::sqrt(double(d));

    // Filled-label trajectory form vs prediction loss, all variants.
    {
      const int k = uniform_int(rng, 1, 3);
      TransformerParams params;
      if (t % 3 == 0) {
        std::vector<Eigen::MatrixXd> A;
        for (int i = 0; i < k; ++i) A.push_back(random_symmetric(d, sym_scale, rng));
        params = make_sparse(std::move(A));
      } else if (t % 3 == 1) {
        std::vector<Eigen::MatrixXd> A, B;
        for (int i = 0; i < k; ++i) {
          A.push_back(random_symmetric(d, sym_scale, rng));
          Eigen::MatrixXd Bm(d, d);
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) Bm(a, b) = sym_scale * rng.gaussian();
          B.push_back(std::move(Bm));
        }
        params = make_gdpp(std::move(A), std::move(B));
      } else {
        // A dense Q would let the filled corner feed back into attention, so
        // the full-variant path is exercised on embedded structured layers.
        std::vector<Eigen::MatrixXd> A, B;
        for (int i = 0; i < k; ++i) {
          A.push_back(random_symmetric(d, sym_scale, rng));
          Eigen::MatrixXd Bm(d, d);
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) Bm(a, b) = sym_scale * rng.gaussian();
          B.push_back(std::move(Bm));
        }
        params = embed_to_full(make_gdpp(std::move(A), std::move(B)));
      }
      g_trace = std::max(g_trace, std::abs(trace_form_loss(params, prompt) -
                                           per_prompt_sq_error(params, prompt)));

      // Structured layers agree with their full-layer embedding elementwise.
      if (params.variant != Variant::Full) {
        Eigen::MatrixXd X = prompt.X;
        Eigen::RowVectorXd Y(n + 1);
        Y.head(n) = prompt.y.transpose();
        Y[n] = 0.0;
        forward_xy(X, Y, params);
        Eigen::MatrixXd Zk = forward(build_Z0(prompt), embed_to_full(params));
        const double gap = std::max((Zk.topRows(d) - X).cwiseAbs().maxCoeff(),
                                    (Zk.row(d) - Y).cwiseAbs().maxCoeff());
        g_embed = std::max(g_embed, gap);
      }
    }

    // Gamma family on a single layer.
    {
      Eigen::MatrixXd P(d + 1, d + 1), Q(d + 1, d + 1);
      for (int a = 0; a <= d; ++a)
        for (int b = 0; b <= d; ++b) {
          P(a, b) = sym_scale * rng.gaussian();
          Q(a, b) = sym_scale * rng.gaussian();
        }
      const double gamma = 0.25 + 2.0 * rng.uniform();
      TransformerParams one = make_full({{P, Q}});
      TransformerParams scaled = make_full({{gamma * P, (1.0 / gamma) * Q}});
      g_scale = std::max(g_scale, std::abs(per_prompt_sq_error(one, prompt) -
                                           per_prompt_sq_error(scaled, prompt)));
    }

    // Layer swap on the scalar family.
    {
      const int k = uniform_int(rng, 2, 4);
      SPointSparse point;
      // Scalars share a step budget of ~1.1 so deep stacks do not overshoot
      // into huge losses that would swamp an absolute tolerance.
      for (int i = 0; i < k; ++i)
        point.a.push_back((2.2 * rng.uniform() - 1.1) / k);
      const int i = uniform_int(rng, 0, k - 1);
      const int j = uniform_int(rng, 0, k - 1);
      g_swap = std::max(g_swap, swap_invariance_check(prompt, point, spec, i, j));
    }

    // Basis rotation under common random numbers, isotropic covariates.
    {
      CovarianceSpec iso = make_covariance_identity(d, Eigen::VectorXd::Ones(d));
      Prompt p = sample_prompt(iso, n, WeightPrior::Isotropic, rng);
      Eigen::MatrixXd U = haar_orthogonal(d, rng);
      Eigen::VectorXd diag(d);
      for (int i = 0; i < d; ++i) diag[i] = 2.0 * rng.uniform() - 1.0;
      Eigen::MatrixXd A0 = U * diag.asDiagonal() * U.transpose();
      A0 = 0.5 * (A0 + A0.transpose()).eval();
      Eigen::MatrixXd A1 = random_symmetric(d, sym_scale, rng);
      TransformerParams lhs = make_sparse({A0, A1});
      Eigen::MatrixXd A1r = U.transpose() * A1 * U;
      A1r = 0.5 * (A1r + A1r.transpose()).eval();
      TransformerParams rhs = make_sparse(
          {Eigen::MatrixXd(diag.asDiagonal()), A1r});
      Prompt rotated = p;
      rotated.X = U.transpose() * p.X;
      rotated.w_star = U.transpose() * p.w_star;
      g_rot = std::max(g_rot, std::abs(per_prompt_sq_error(lhs, p) -
                                       per_prompt_sq_error(rhs, rotated)));
    }

    // Covariate half-step against the transformer's own update.
    {
      Eigen::MatrixXd A = random_symmetric(d, sym_scale, rng);
      Eigen::MatrixXd B(d, d);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) B(a, b) = sym_scale * rng.gaussian();
      Eigen::MatrixXd X1 = gdpp_covariate_step(prompt.X, A, B);
      Eigen::MatrixXd X = prompt.X;
      Eigen::RowVectorXd Y(n + 1);
      Y.head(n) = prompt.y.transpose();
      Y[n] = 0.0;
      forward_xy(X, Y, make_gdpp({A}, {B}));
      g_step = std::max(g_step, (X1 - X).cwiseAbs().maxCoeff());
    }
  }
  CheckList checks;
  checks.add("trace_form", g_trace <= 1e-12, g_trace, 1e-12);
  checks.add("gamma_scaling", g_scale <= 1e-12, g_scale, 1e-12);
  checks.add("layer_swap", g_swap <= 1e-12, g_swap, 1e-12);
  checks.add("rotation_crn", g_rot <= 1e-12, g_rot, 1e-12);
  checks.add("structured_vs_full", g_embed <= 1e-12, g_embed, 1e-12);
  checks.add("covariate_step", g_step <= 1e-12, g_step, 1e-12);
  ExperimentOutcome out;
  out.summary = {{"experiment", "identities"},
                 {"instances", instances},
                 {"checks", checks.items},
                 {"pass", checks.all()}};
  out.check_failed = !checks.all();
  return out;
}

ExperimentOutcome run_flow(const json& cfg) {
  const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();
  const std::size_t batch_size = cfg.value("batch", 4096);
  const int iters = cfg.value("iters", 500);
  Eigen::VectorXd entries(3);
  entries << 1.0, 0.7, 0.4;
  CovarianceSpec spec = make_covariance_haar(3, entries, seed);
  Batch batch =
      sample_batch(spec, 10, WeightPrior::InverseCovariance, seed, 0, batch_size);
  SPointSparse init{{0.0, 0.0, 0.0}};
  FlowRecord rec = constrained_flow(init, spec, batch, 0.05, iters);
  bool monotone = true;
  for (std::size_t t = 1; t < rec.loss.size(); ++t)
    if (rec.loss[t] > rec.loss[t - 1]) monotone = false;
  const double ratio = rec.loss.back() / rec.loss.front();
  const bool pass = monotone && !rec.diverged && ratio <= 0.1 &&
                    rec.loss.size() == static_cast<std::size_t>(iters) + 1;
  const std::string out_dir = cfg.value("out", std::string());
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> hdr{"step", "loss", "proj_grad_sq"};
    for (std::size_t i = 0; i < init.a.size(); ++i)
      hdr.push_back("a" + std::to_string(i));
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < rec.loss.size(); ++t) {
      std::vector<double> row{static_cast<double>(t), rec.loss[t],
                              rec.proj_grad_sq[t]};
      for (double a : rec.a[t]) row.push_back(a);
      rows.push_back(std::move(row));
    }
    write_file(out_dir + "/flow.csv", rows_to_csv(hdr, rows));
  }
  ExperimentOutcome out;
  out.summary = {{"experiment", "flow"},
                 {"steps", iters},
                 {"initial_loss", rec.loss.front()},
                 {"final_loss", rec.loss.back()},
                 {"loss_ratio", ratio},
                 {"monotone", monotone},
                 {"pass", pass}};
  out.check_failed = !pass;
  return out;
}

std::vector<std::uint64_t> seed_list(const json& cfg, int default_count) {
  if (cfg.contains("seeds")) return cfg["seeds"].get<std::vector<std::uint64_t>>();
  const std::uint64_t base = cfg["seed"].get<std::uint64_t>();
  std::vector<std::uint64_t> out;
  for (int i = 0; i < default_count; ++i) out.push_back(base + i);
  return out;
}

ExperimentOutcome run_single_layer_exp(const json& cfg) {
  const std::size_t batch_size = cfg.value("batch", std::size_t{1} << 16);
  const std::string out_dir = cfg.value("out", std::string());
  json per_seed = json::array();
  bool all_pass = true;
  std::vector<RunRecord> records;
  for (std::uint64_t seed : seed_list(cfg, 1)) {
    ExperimentRun run = run_single_layer(seed, batch_size);
    OptimalSingleLayer opt = optimal_single_layer(run.spec, 20);
    SingleLayerParams slp = single_layer_reduce(run.rec.final_params.full[0]);
    const Eigen::MatrixXd got = scale_free_product(slp.b, slp.A);
    const Eigen::MatrixXd want = scale_free_product(opt.b, opt.A);
    const double gap = (got - want).norm() / want.norm();
    const bool pass = gap <= 0.02;
    all_pass = all_pass && pass;
    per_seed.push_back({{"seed", seed},
                        {"iters", run.rec.iters},
                        {"final_loss", run.rec.loss.back()},
                        {"grad_norm", run.rec.grad_norm},
                        {"line_search_failed", run.rec.line_search_failed},
                        {"product_gap", gap},
                        {"pass", pass}});
    if (!out_dir.empty()) emit_run(out_dir + "/seed_" + std::to_string(seed), run);
    records.push_back(std::move(run.rec));
  }
  ExperimentOutcome out;
  out.summary = {{"experiment", "single-layer"},
                 {"runs", per_seed},
                 {"pass", all_pass}};
  out.check_failed = !all_pass;
  return out;
}

ExperimentOutcome run_pnull_or_pq(const json& cfg, bool pq) {
  const std::size_t batch_size = cfg.value("batch", std::size_t{1} << 16);
  const std::string out_dir = cfg.value("out", std::string());
  json per_seed = json::array();
  int passed = 0;
  std::vector<RunRecord> records;
  const auto seeds = seed_list(cfg, 5);
  for (std::uint64_t seed : seeds) {
    ExperimentRun run =
        pq ? run_experiment_pq(seed, batch_size) : run_experiment_pnull(seed, batch_size);
    const RunRecord& rec = run.rec;
    const double loss_ratio = rec.loss.back() / rec.loss.front();
    bool pass = loss_ratio <= 0.05;
    const auto& white = rec.dist_whitened.back();
    const auto& raw = rec.dist_raw.back();
    for (double v : white) pass = pass && v <= 0.1;
    json checks = {{"loss_ratio", loss_ratio},
                   {"dist_whitened", white},
                   {"dist_raw", raw}};
    if (pq) {
      const auto& bdist = rec.dist_b.back();
      for (double v : bdist) pass = pass && v <= 0.1;
      const double a0 = rec.final_params.gdpp[0].A.norm();
      const double a2 = rec.final_params.gdpp[2].A.norm();
      pass = pass && a0 < a2;
      checks["dist_b"] = bdist;
      checks["a_norms"] = {a0, rec.final_params.gdpp[1].A.norm(), a2};
    } else {
      for (std::size_t i = 0; i < white.size(); ++i) pass = pass && raw[i] > white[i];
    }
    if (pass) ++passed;
    checks["seed"] = seed;
    checks["iters"] = rec.iters;
    checks["grad_norm"] = rec.grad_norm;
    checks["line_search_failed"] = rec.line_search_failed;
    checks["final_loss"] = rec.loss.back();
    checks["pass"] = pass;
    per_seed.push_back(std::move(checks));
    if (!out_dir.empty()) emit_run(out_dir + "/seed_" + std::to_string(seed), run);
    records.push_back(std::move(run.rec));
  }
  const int needed = static_cast<int>(seeds.size()) - 1;
  const bool overall = passed >= std::max(1, needed);
  if (!out_dir.empty()) {
    AggregateCurves agg = aggregate_runs(records);
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < agg.mean.size(); ++t)
      rows.push_back({static_cast<double>(t), agg.mean[t], agg.sd[t]});
    write_file(out_dir + "/aggregate_loss.csv",
               rows_to_csv({"iter", "mean_loss", "sd_loss"}, rows));
  }
  ExperimentOutcome out;
  out.summary = {{"experiment", pq ? "pq" : "pnull"},
                 {"runs", per_seed},
                 {"passed_seeds", passed},
                 {"total_seeds", seeds.size()},
                 {"pass", overall}};
  out.check_failed = !overall;
  return out;
}

}  // namespace

json validate_config(const json& config) {
  if (!config.is_object()) throw ValidationError("config: expected an object");
  if (!config.contains("experiment") || !config["experiment"].is_string())
    throw ValidationError("config: missing experiment name");
  const std::string name = config["experiment"].get<std::string>();
  bool known = false;
  for (const char* e : kExperiments) known = known || name == e;
  if (!known) throw ValidationError("config: unknown experiment " + name);
  json out = config;
  if (!out.contains("seed")) out["seed"] = 1;
  if (!out["seed"].is_number_integer())
    throw ValidationError("config: seed must be an integer");
  if (out.contains("batch")) {
    if (!out["batch"].is_number_integer() || out["batch"].get<long>() < 1)
      throw ValidationError("config: batch must be a positive integer");
  }
  if (out.contains("seeds")) {
    if (!out["seeds"].is_array() || out["seeds"].empty())
      throw ValidationError("config: seeds must be a nonempty array");
  }
  return out;
}

ExperimentOutcome run_experiment_config(const json& config) {
  const json cfg = validate_config(config);
  const std::string name = cfg["experiment"].get<std::string>();
  ExperimentOutcome out;
  if (name == "lemma1-fuzz") out = run_lemma1_fuzz(cfg);
  else if (name == "identities") out = run_identities(cfg);
  else if (name == "flow") out = run_flow(cfg);
  else if (name == "single-layer") out = run_single_layer_exp(cfg);
  else if (name == "pnull") out = run_pnull_or_pq(cfg, false);
  else out = run_pnull_or_pq(cfg, true);
  const std::string out_dir = cfg.value("out", std::string());
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file(out_dir + "/summary.json", out.summary.dump(2) + "\n");
  }
  return out;
}

}  // namespace icl
