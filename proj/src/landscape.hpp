#pragma once

#include <Eigen/Dense>
#include <vector>

#include "icl_loss.hpp"
#include "task_sampler.hpp"

namespace icl {

// Scalar coordinates on the family A_i = a_i * SigmaInv (and B_i = b_i * I).
struct SPointSparse {
  std::vector<double> a;
};

struct SPointFull {
  std::vector<double> a;
  std::vector<double> b;
};

TransformerParams materialize(const SPointSparse& point, const CovarianceSpec& spec);
TransformerParams materialize(const SPointFull& point, const CovarianceSpec& spec);

// min_alpha ||M - alpha I||_F / ||M||_F; the minimizer is alpha = tr(M)/d.
double dist_to_identity(const Eigen::MatrixXd& M);
double whitened_dist(const Eigen::MatrixXd& M, const CovarianceSpec& spec);

// r_i = (1/d) tr(SigmaHalf G_i SigmaHalf) per layer.
std::vector<double> s_project_sparse(const GradientBundle& grads,
                                     const CovarianceSpec& spec);
// Adds s_i = (1/d) tr(SigmaInvHalf H_i SigmaHalf) for the B gradients.
void s_project_full(const GradientBundle& grads, const CovarianceSpec& spec,
                    std::vector<double>& r, std::vector<double>& s);

// Inner product of the batch-mean gradient with a parameter-shaped direction.
double directional_derivative(const TransformerParams& params,
                              const GradientBundle& direction, const Batch& batch);

// Paired per-prompt statistics of <grad_p, dir1> - <grad_p, dir2>.
struct PairedDerivative {
  double mean = 0.0;
  double se = 0.0;
};
PairedDerivative directional_derivative_paired(const TransformerParams& params,
                                               const GradientBundle& dir1,
                                               const GradientBundle& dir2,
                                               const Batch& batch);

// Projection of a symmetric direction bundle onto the scalar family.
GradientBundle s_project_direction(const GradientBundle& direction,
                                   const CovarianceSpec& spec);

struct FlowRecord {
  std::vector<std::vector<double>> a;  // scalars per accepted step
  std::vector<std::vector<double>> b;  // empty for the sparse family
  std::vector<double> loss;
  std::vector<double> proj_grad_sq;  // sum of r_i^2 (+ s_i^2)
  bool diverged = false;
};

// Euler steps on da_i/dt = -d * r_i (and db_i/dt = -d * s_i), with the step
// halved until the fixed-batch loss does not increase.
FlowRecord constrained_flow(const SPointSparse& init, const CovarianceSpec& spec,
                            const Batch& batch, double step, int iters);
FlowRecord constrained_flow(const SPointFull& init, const CovarianceSpec& spec,
                            const Batch& batch, double step, int iters);

double swap_invariance_check(const Prompt& prompt, const SPointSparse& point,
                             const CovarianceSpec& spec, int i, int j);

struct AlignmentReport {
  double value = 0.0;
  bool degenerate = false;  // eigenvalue gap of A0 below 1e-8
};

// Off-diagonal Frobenius mass of A1 in the eigenbasis of A0, over ||A1||_F.
AlignmentReport diagonal_alignment(const Eigen::MatrixXd& A0,
                                   const Eigen::MatrixXd& A1);

}  // namespace icl
