#pragma once

#include <Eigen/Dense>

#include "icl_loss.hpp"
#include "task_sampler.hpp"

namespace icl {

// Single-layer optimum: b = e_{d+1}, top block of A is -U^T diag(s) U with
// one scale per eigenvalue of Sigma.
struct OptimalSingleLayer {
  Eigen::VectorXd b;  // d+1
  Eigen::MatrixXd A;  // (d+1) x d
  Eigen::VectorXd s;  // d positive scales
};

OptimalSingleLayer optimal_single_layer(const CovarianceSpec& spec, int n);

double isotropic_scale(int n, int d);

struct StationarityReport {
  Eigen::VectorXd grad_mean;  // packed (b, A) coordinates
  Eigen::VectorXd grad_se;    // standard error per coordinate
  double grad_norm = 0.0;
  double max_abs_z = 0.0;  // max |mean| / se over coordinates
};

// Monte-Carlo gradient of the reduced loss at the optimum; isotropic setting.
StationarityReport stationarity_check(const OptimalSingleLayer& opt,
                                      const Batch& batch, WeightPrior prior);

}  // namespace icl
