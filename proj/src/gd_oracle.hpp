#pragma once

#include <Eigen/Dense>
#include <vector>

#include "linear_transformer.hpp"
#include "task_sampler.hpp"

namespace icl {

struct GDTrajectory {
  std::vector<Eigen::VectorXd> w;  // w_0 = 0, one iterate per step
  std::vector<double> R;           // objective value at each iterate
};

// Least-squares objective on the context pairs of one prompt, centered at
// w_star so the minimum value is zero.
double regression_objective(const Prompt& prompt, const Eigen::VectorXd& w,
                            Eigen::VectorXd& grad);

// w_{k+1} = w_k + A_k * grad R(w_k), from w_0 = 0. Deliberately written with
// its own matrix routines so it stays an independent witness for the
// attention recursion.
GDTrajectory precond_gd(const Prompt& prompt,
                        const std::vector<Eigen::MatrixXd>& A_list);

// Max over layers of |transformer prediction - <x_query, w_i>|.
double check_lemma1(const Prompt& prompt, const TransformerParams& params);

// X + (1/n) B X M X^T A X; the covariate half of the two-block update.
Eigen::MatrixXd gdpp_covariate_step(const Eigen::MatrixXd& X,
                                    const Eigen::MatrixXd& A,
                                    const Eigen::MatrixXd& B);

}  // namespace icl
