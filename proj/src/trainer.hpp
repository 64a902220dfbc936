#pragma once

#include <cstdint>
#include <vector>

#include "icl_loss.hpp"
#include "linear_transformer.hpp"
#include "optim.hpp"
#include "task_sampler.hpp"

namespace icl {

struct RunRecord {
  std::vector<double> loss;                        // accepted iterates
  std::vector<std::vector<double>> dist_raw;       // per iterate, per A layer
  std::vector<std::vector<double>> dist_whitened;  // per iterate, per A layer
  std::vector<std::vector<double>> dist_b;         // per iterate, per tracked B layer
  TransformerParams final_params;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
  double grad_norm = 0.0;
  int iters = 0;
  bool line_search_failed = false;
};

// Free matrices filled with N(0, scale^2/d) entries; symmetric blocks are
// mirrored from the upper triangle so every entry keeps that variance.
TransformerParams init_params(Variant variant, int d, int depth, double scale,
                              RngStream& rng);

// Parameter <-> vector packing for the optimizer. The last GDPP B block is
// excluded: the query prediction never sees the final covariate update, so its
// gradient is identically zero.
Eigen::VectorXd pack_params(const TransformerParams& params);
void unpack_params(const Eigen::VectorXd& x, TransformerParams& params);
Eigen::VectorXd pack_gradient(const GradientBundle& grad,
                              const TransformerParams& params);

RunRecord train(const TransformerParams& init, const Batch& batch,
                const CovarianceSpec& spec, const OptimizerConfig& config,
                std::uint64_t seed = 0);

struct ExperimentRun {
  RunRecord rec;
  CovarianceSpec spec;
};

ExperimentRun run_experiment_pnull(std::uint64_t seed,
                                   std::size_t batch_size = std::size_t{1} << 16);
ExperimentRun run_experiment_pq(std::uint64_t seed,
                                std::size_t batch_size = std::size_t{1} << 16);
ExperimentRun run_single_layer(std::uint64_t seed,
                               std::size_t batch_size = std::size_t{1} << 16);
ExperimentRun run_two_layer_isotropic(std::uint64_t seed,
                                      std::size_t batch_size = std::size_t{1} << 16);

struct AggregateCurves {
  std::vector<double> mean;
  std::vector<double> sd;
};

// Pointwise loss statistics over runs, shorter runs padded by last-value carry.
AggregateCurves aggregate_runs(const std::vector<RunRecord>& records);

}  // namespace icl
