#include "trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "errors.hpp"
#include "landscape.hpp"

namespace icl {
namespace {

Eigen::MatrixXd gaussian_matrix(int rows, int cols, double sigma, RngStream& rng) {
  Eigen::MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = sigma * rng.gaussian();
  return M;
}

Eigen::MatrixXd gaussian_symmetric(int d, double sigma, RngStream& rng) {
  Eigen::MatrixXd M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      const double v = sigma * rng.gaussian();
      M(i, j) = v;
      M(j, i) = v;
    }
  return M;
}

// The last GDPP covariate update cannot reach the label row.
int tracked_b_layers(const TransformerParams& params) {
  return params.variant == Variant::GDPP ? params.depth() - 1 : 0;
}

double safe_dist(const Eigen::MatrixXd& M) {
  if (M.norm() == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return dist_to_identity(M);
}

double safe_whitened(const Eigen::MatrixXd& M, const CovarianceSpec& spec) {
  return safe_dist(spec.SigmaHalf * M * spec.SigmaHalf);
}

}  // namespace

TransformerParams init_params(Variant variant, int d, int depth, double scale,
                              RngStream& rng) {
  if (scale <= 0.0) throw ValidationError("init_params: scale must be positive");
  if (d < 1 || depth < 1) throw ValidationError("init_params: bad dimensions");
  const double sigma = scale / std::sqrt(static_cast<double>(d));
  TransformerParams p;
  p.variant = variant;
  p.d = d;
  for (int i = 0; i < depth; ++i) {
    switch (variant) {
      case Variant::Sparse:
        p.sparse.push_back({gaussian_symmetric(d, sigma, rng)});
        break;
      case Variant::GDPP: {
        Eigen::MatrixXd A = gaussian_symmetric(d, sigma, rng);
        Eigen::MatrixXd B = gaussian_matrix(d, d, sigma, rng);
        p.gdpp.push_back({std::move(A), std::move(B)});
        break;
      }
      case Variant::Full: {
        Eigen::MatrixXd P = gaussian_matrix(d + 1, d + 1, sigma, rng);
        Eigen::MatrixXd Q = gaussian_matrix(d + 1, d + 1, sigma, rng);
        p.full.push_back({std::move(P), std::move(Q)});
        break;
      }
    }
  }
  return p;
}

Eigen::VectorXd pack_params(const TransformerParams& params) {
  const int d = params.d;
  const int k = params.depth();
  std::vector<double> out;
  auto push = [&](const Eigen::MatrixXd& M) {
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j) out.push_back(M(i, j));
  };
  switch (params.variant) {
    case Variant::Sparse:
      for (const auto& l : params.sparse) push(l.A);
      break;
    case Variant::GDPP:
      for (const auto& l : params.gdpp) push(l.A);
      for (int i = 0; i < k - 1; ++i) push(params.gdpp[i].B);
      break;
    case Variant::Full:
      for (const auto& l : params.full) {
        push(l.P);
        push(l.Q);
      }
      break;
  }
  (void)d;
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<long>(out.size()));
}

void unpack_params(const Eigen::VectorXd& x, TransformerParams& params) {
  long pos = 0;
  auto pull = [&](Eigen::MatrixXd& M) {
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j) M(i, j) = x[pos++];
  };
  const int k = params.depth();
  switch (params.variant) {
    case Variant::Sparse:
      for (auto& l : params.sparse) pull(l.A);
      break;
    case Variant::GDPP:
      for (auto& l : params.gdpp) pull(l.A);
      for (int i = 0; i < k - 1; ++i) pull(params.gdpp[i].B);
      break;
    case Variant::Full:
      for (auto& l : params.full) {
        pull(l.P);
        pull(l.Q);
      }
      break;
  }
  if (pos != x.size()) throw ValidationError("unpack_params: size mismatch");
}

Eigen::VectorXd pack_gradient(const GradientBundle& grad,
                              const TransformerParams& params) {
  const int k = params.depth();
  std::vector<double> out;
  auto push = [&](const Eigen::MatrixXd& M) {
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j) out.push_back(M(i, j));
  };
  switch (params.variant) {
    case Variant::Sparse:
      for (const auto& m : grad.dA) push(m);
      break;
    case Variant::GDPP:
      for (const auto& m : grad.dA) push(m);
      for (int i = 0; i < k - 1; ++i) push(grad.dB[i]);
      break;
    case Variant::Full:
      for (int i = 0; i < k; ++i) {
        push(grad.dP[i]);
        push(grad.dQ[i]);
      }
      break;
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<long>(out.size()));
}

RunRecord train(const TransformerParams& init, const Batch& batch,
                const CovarianceSpec& spec, const OptimizerConfig& config,
                std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.seed = seed;
  TransformerParams work = init;
  Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    unpack_params(x, work);
    GradientBundle grad;
    const double loss = loss_and_grad(work, batch, grad);
    g = pack_gradient(grad, work);
    return loss;
  };
  StepObserver observer = [&](int, const Eigen::VectorXd& x, double loss) {
    unpack_params(x, work);
    rec.loss.push_back(loss);
    std::vector<double> raw, whitened, bdist;
    for (int i = 0; i < work.depth(); ++i) {
      const Eigen::MatrixXd& A =
          work.variant == Variant::Sparse
              ? work.sparse[i].A
              : (work.variant == Variant::GDPP ? work.gdpp[i].A
                                               : work.full[i].Q.topLeftCorner(
                                                     work.d, work.d));
      raw.push_back(safe_dist(A));
      whitened.push_back(safe_whitened(A, spec));
    }
    for (int i = 0; i < tracked_b_layers(work); ++i)
      bdist.push_back(safe_dist(work.gdpp[i].B));
    rec.dist_raw.push_back(std::move(raw));
    rec.dist_whitened.push_back(std::move(whitened));
    rec.dist_b.push_back(std::move(bdist));
  };
  OptimResult res = minimize(objective, pack_params(init), config, observer);
  unpack_params(res.x, work);
  rec.final_params = work;
  rec.grad_norm = res.grad_norm;
  rec.iters = res.iters;
  rec.line_search_failed = res.line_search_failed;
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

namespace {

Eigen::VectorXd pnull_entries() {
  Eigen::VectorXd e(5);
  e << 1.0, 1.0, 0.5, 0.25, 1.0;
  return e;
}

ExperimentRun run_training(const CovarianceSpec& spec, int n, WeightPrior prior,
                           Variant variant, int depth, std::uint64_t seed,
                           std::size_t batch_size) {
  Batch batch = sample_batch(spec, n, prior, seed, 0, batch_size);
  RngStream init_rng(seed, kStreamInit);
  TransformerParams params = init_params(variant, spec.dim, depth, 0.1, init_rng);
  OptimizerConfig config;
  ExperimentRun run;
  run.spec = spec;
  run.rec = train(params, batch, spec, config, seed);
  return run;
}

}  // namespace

ExperimentRun run_experiment_pnull(std::uint64_t seed, std::size_t batch_size) {
  CovarianceSpec spec = make_covariance_haar(5, pnull_entries(), seed);
  return run_training(spec, 20, WeightPrior::InverseCovariance, Variant::Sparse, 3,
                      seed, batch_size);
}

ExperimentRun run_experiment_pq(std::uint64_t seed, std::size_t batch_size) {
  CovarianceSpec spec = make_covariance_haar(5, pnull_entries(), seed);
  return run_training(spec, 10, WeightPrior::InverseCovariance, Variant::GDPP, 3,
                      seed, batch_size);
}

ExperimentRun run_single_layer(std::uint64_t seed, std::size_t batch_size) {
  CovarianceSpec spec = make_covariance_identity(5, Eigen::VectorXd::Ones(5));
  return run_training(spec, 20, WeightPrior::Isotropic, Variant::Full, 1, seed,
                      batch_size);
}

ExperimentRun run_two_layer_isotropic(std::uint64_t seed, std::size_t batch_size) {
  CovarianceSpec spec = make_covariance_identity(5, Eigen::VectorXd::Ones(5));
  return run_training(spec, 20, WeightPrior::Isotropic, Variant::Sparse, 2, seed,
                      batch_size);
}

AggregateCurves aggregate_runs(const std::vector<RunRecord>& records) {
  if (records.empty()) throw ValidationError("aggregate_runs: no records");
  std::size_t longest = 0;
  for (const auto& r : records) longest = std::max(longest, r.loss.size());
  AggregateCurves out;
  out.mean.assign(longest, 0.0);
  out.sd.assign(longest, 0.0);
  for (std::size_t t = 0; t < longest; ++t) {
    double sum = 0.0, sumsq = 0.0;
    for (const auto& r : records) {
      const double v = t < r.loss.size() ? r.loss[t] : r.loss.back();
      sum += v;
      sumsq += v * v;
    }
    const double N = static_cast<double>(records.size());
    out.mean[t] = sum / N;
    out.sd[t] = std::sqrt(std::max(0.0, sumsq / N - out.mean[t] * out.mean[t]));
  }
  return out;
}

}  // namespace icl
