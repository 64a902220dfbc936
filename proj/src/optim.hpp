#pragma once

#include <Eigen/Dense>
#include <functional>

namespace icl {

// Fills grad and returns the objective value.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Called once per accepted iterate, including the initial point as iter 0.
using StepObserver = std::function<void(int iter, const Eigen::VectorXd& x, double loss)>;

struct OptimizerConfig {
  enum class Method { QuasiNewton, GradientDescent };
  Method method = Method::QuasiNewton;
  int memory = 10;  // quasi-Newton history length
  int max_iters = 2000;
  double grad_tol = 1e-8;
  double loss_tol = 0.0;  // relative per-step decrease; 0 disables the test
  double c1 = 1e-4;       // sufficient decrease
  double c2 = 0.9;        // curvature
};

struct OptimResult {
  Eigen::VectorXd x;
  double loss = 0.0;
  double grad_norm = 0.0;
  int iters = 0;
  bool line_search_failed = false;
};

OptimResult minimize(const Objective& objective, Eigen::VectorXd x0,
                     const OptimizerConfig& config,
                     const StepObserver& observer = nullptr);

}  // namespace icl
