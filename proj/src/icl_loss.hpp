#pragma once

#include <Eigen/Dense>
#include <vector>

#include "linear_transformer.hpp"
#include "task_sampler.hpp"

namespace icl {

// Reduced single-layer parameters: b picks a row of P, A keeps the covariate
// columns of Q.
struct SingleLayerParams {
  Eigen::VectorXd b;  // d+1
  Eigen::MatrixXd A;  // (d+1) x d
};

struct GradientBundle {
  Variant variant = Variant::Sparse;
  std::vector<Eigen::MatrixXd> dA;  // Sparse / GDPP
  std::vector<Eigen::MatrixXd> dB;  // GDPP
  std::vector<Eigen::MatrixXd> dP;  // Full
  std::vector<Eigen::MatrixXd> dQ;  // Full

  static GradientBundle zeros_like(const TransformerParams& params);
  void axpy(double a, const GradientBundle& other);
  void scale(double a);
  double dot(const GradientBundle& other) const;
  double norm() const;
};

double per_prompt_sq_error(const TransformerParams& params, const Prompt& prompt);

// Same value computed through the filled-label trajectory; the query label is
// written into the corner of Z0 and the surviving corner energy is returned.
double trace_form_loss(const TransformerParams& params, const Prompt& prompt);

double mc_loss(const TransformerParams& params, const Batch& batch);

// Exact reverse-mode gradient of the batch-mean squared error.
double loss_and_grad(const TransformerParams& params, const Batch& batch,
                     GradientBundle& grad);

// Single-prompt loss and gradient; accumulates into grad (pre-zeroed by caller).
double per_prompt_loss_grad(const TransformerParams& params, const Prompt& prompt,
                            GradientBundle& grad);

SingleLayerParams single_layer_reduce(const FullLayer& layer);

double single_layer_per_prompt(const SingleLayerParams& slp, const Prompt& prompt);
double single_layer_loss(const SingleLayerParams& slp, const Batch& batch);

// Per-prompt gradient of the reduced loss; db and dA are accumulated.
double single_layer_per_prompt_grad(const SingleLayerParams& slp, const Prompt& prompt,
                                    Eigen::VectorXd& db, Eigen::MatrixXd& dA);

}  // namespace icl
