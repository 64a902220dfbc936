#include "closed_form.hpp"

#include <cmath>

#include "errors.hpp"

namespace icl {

OptimalSingleLayer optimal_single_layer(const CovarianceSpec& spec, int n) {
  if (n < 1) throw ValidationError("optimal_single_layer: n must be positive");
  const int d = spec.dim;
  const Eigen::VectorXd lam = spec.d_entries.array().square();
  const double lam_sum = lam.sum();
  OptimalSingleLayer opt;
  opt.s.resize(d);
  for (int i = 0; i < d; ++i)
    opt.s[i] = 1.0 / ((n + 1.0) / n * lam[i] + lam_sum / n);
  opt.b = Eigen::VectorXd::Zero(d + 1);
  opt.b[d] = 1.0;
  opt.A = Eigen::MatrixXd::Zero(d + 1, d);
  opt.A.topRows(d) = -(spec.U.transpose() * opt.s.asDiagonal() * spec.U);
  return opt;
}

double isotropic_scale(int n, int d) {
  if (n < 1 || d < 1) throw ValidationError("isotropic_scale: n, d must be positive");
  return 1.0 / ((n - 1.0) / n + (d + 2.0) / n);
}

StationarityReport stationarity_check(const OptimalSingleLayer& opt,
                                      const Batch& batch, WeightPrior prior) {
  if (prior != WeightPrior::Isotropic)
    throw ValidationError("stationarity_check: isotropic prior required");
  if (batch.prompts.empty())
    throw ValidationError("stationarity_check: empty batch");
  const int d = batch.d;
  const int dim = (d + 1) + (d + 1) * d;
  SingleLayerParams slp{opt.b, opt.A};
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd db(d + 1);
  Eigen::MatrixXd dA(d + 1, d);
  Eigen::VectorXd packed(dim);
  for (const Prompt& p : batch.prompts) {
    db.setZero();
    dA.setZero();
    single_layer_per_prompt_grad(slp, p, db, dA);
    packed.head(d + 1) = db;
    packed.tail((d + 1) * d) = Eigen::Map<Eigen::VectorXd>(dA.data(), (d + 1) * d);
    sum += packed;
    sumsq += packed.cwiseAbs2();
  }
  const double N = static_cast<double>(batch.prompts.size());
  StationarityReport rep;
  rep.grad_mean = sum / N;
  Eigen::VectorXd var = (sumsq / N - rep.grad_mean.cwiseAbs2()).cwiseMax(0.0);
  rep.grad_se = (var / N).cwiseSqrt();
  rep.grad_norm = rep.grad_mean.norm();
  rep.max_abs_z = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double se = rep.grad_se[i];
    const double z = se > 0.0 ? std::abs(rep.grad_mean[i]) / se
                              : (rep.grad_mean[i] == 0.0 ? 0.0 : INFINITY);
    rep.max_abs_z = std::max(rep.max_abs_z, z);
  }
  return rep;
}

}  // namespace icl
