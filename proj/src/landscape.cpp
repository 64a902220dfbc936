#include "landscape.hpp"

#include <cmath>

#include "errors.hpp"

namespace icl {

TransformerParams materialize(const SPointSparse& point, const CovarianceSpec& spec) {
  if (point.a.empty()) throw ValidationError("materialize: no layers");
  std::vector<Eigen::MatrixXd> A;
  for (double a : point.a) A.push_back(a * spec.SigmaInv);
  return make_sparse(std::move(A));
}

TransformerParams materialize(const SPointFull& point, const CovarianceSpec& spec) {
  if (point.a.empty() || point.a.size() != point.b.size())
    throw ValidationError("materialize: scalar lists empty or mismatched");
  std::vector<Eigen::MatrixXd> A, B;
  for (double a : point.a) A.push_back(a * spec.SigmaInv);
  for (double b : point.b)
    B.push_back(b * Eigen::MatrixXd::Identity(spec.dim, spec.dim));
  return make_gdpp(std::move(A), std::move(B));
}

double dist_to_identity(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw ValidationError("dist_to_identity: not square");
  const double nrm = M.norm();
  if (nrm == 0.0) throw ValidationError("dist_to_identity: zero matrix");
  const double alpha = M.trace() / static_cast<double>(M.rows());
  Eigen::MatrixXd R = M;
  R.diagonal().array() -= alpha;
  return R.norm() / nrm;
}

double whitened_dist(const Eigen::MatrixXd& M, const CovarianceSpec& spec) {
  return dist_to_identity(spec.SigmaHalf * M * spec.SigmaHalf);
}

std::vector<double> s_project_sparse(const GradientBundle& grads,
                                     const CovarianceSpec& spec) {
  if (grads.variant != Variant::Sparse)
    throw ValidationError("s_project_sparse: sparse bundle required");
  std::vector<double> r;
  for (const auto& G : grads.dA)
    r.push_back((spec.SigmaHalf * G * spec.SigmaHalf).trace() / spec.dim);
  return r;
}

void s_project_full(const GradientBundle& grads, const CovarianceSpec& spec,
                    std::vector<double>& r, std::vector<double>& s) {
  if (grads.variant != Variant::GDPP)
    throw ValidationError("s_project_full: gdpp bundle required");
  r.clear();
  s.clear();
  for (const auto& G : grads.dA)
    r.push_back((spec.SigmaHalf * G * spec.SigmaHalf).trace() / spec.dim);
  for (const auto& H : grads.dB)
    s.push_back((spec.SigmaInvHalf * H * spec.SigmaHalf).trace() / spec.dim);
}

double directional_derivative(const TransformerParams& params,
                              const GradientBundle& direction, const Batch& batch) {
  GradientBundle grad;
  loss_and_grad(params, batch, grad);
  return grad.dot(direction);
}

PairedDerivative directional_derivative_paired(const TransformerParams& params,
                                               const GradientBundle& dir1,
                                               const GradientBundle& dir2,
                                               const Batch& batch) {
  if (batch.prompts.empty()) throw ValidationError("directional derivative: empty batch");
  GradientBundle diff = dir1;
  diff.axpy(-1.0, dir2);
  double sum = 0.0, sumsq = 0.0;
  GradientBundle g = GradientBundle::zeros_like(params);
  for (const Prompt& p : batch.prompts) {
    for (auto* list : {&g.dA, &g.dB, &g.dP, &g.dQ})
      for (auto& m : *list) m.setZero();
    per_prompt_loss_grad(params, p, g);
    const double v = g.dot(diff);
    sum += v;
    sumsq += v * v;
  }
  const double N = static_cast<double>(batch.prompts.size());
  PairedDerivative out;
  out.mean = sum / N;
  const double var = std::max(0.0, sumsq / N - out.mean * out.mean);
  out.se = std::sqrt(var / N);
  return out;
}

GradientBundle s_project_direction(const GradientBundle& direction,
                                   const CovarianceSpec& spec) {
  GradientBundle out = direction;
  for (std::size_t i = 0; i < direction.dA.size(); ++i) {
    const double r =
        (spec.SigmaHalf * direction.dA[i] * spec.SigmaHalf).trace() / spec.dim;
    out.dA[i] = r * spec.SigmaInv;
  }
  for (std::size_t i = 0; i < direction.dB.size(); ++i) {
    const double s =
        (spec.SigmaInvHalf * direction.dB[i] * spec.SigmaHalf).trace() / spec.dim;
    out.dB[i] = s * Eigen::MatrixXd::Identity(spec.dim, spec.dim);
  }
  return out;
}

namespace {

FlowRecord flow_impl(std::vector<double> a, std::vector<double> b, bool with_b,
                     const CovarianceSpec& spec, const Batch& batch, double step,
                     int iters) {
  if (step < 0.0) throw ValidationError("constrained_flow: step must be nonnegative");
  const int d = spec.dim;
  FlowRecord rec;
  auto params_of = [&](const std::vector<double>& av, const std::vector<double>& bv) {
    return with_b ? materialize(SPointFull{av, bv}, spec)
                  : materialize(SPointSparse{av}, spec);
  };
  TransformerParams params = params_of(a, b);
  GradientBundle grad;
  double loss = loss_and_grad(params, batch, grad);
  for (int it = 0; it <= iters; ++it) {
    std::vector<double> r, s;
    if (with_b) {
      s_project_full(grad, spec, r, s);
    } else {
      r = s_project_sparse(grad, spec);
    }
    double gsq = 0.0;
    for (double v : r) gsq += v * v;
    for (double v : s) gsq += v * v;
    rec.a.push_back(a);
    if (with_b) rec.b.push_back(b);
    rec.loss.push_back(loss);
    rec.proj_grad_sq.push_back(gsq);
    if (it == iters) break;
    double h = step;
    bool accepted = false;
    std::vector<double> a_try, b_try;
    TransformerParams params_try;
    double loss_try = 0.0;
    for (int halvings = 0; halvings < 60; ++halvings) {
      a_try = a;
      b_try = b;
      for (std::size_t i = 0; i < a.size(); ++i) a_try[i] -= h * d * r[i];
      for (std::size_t i = 0; i < s.size(); ++i) b_try[i] -= h * d * s[i];
      params_try = params_of(a_try, b_try);
      loss_try = mc_loss(params_try, batch);
      if (std::isfinite(loss_try) && loss_try <= loss) {
        accepted = true;
        break;
      }
      h *= 0.5;
    }
    if (!accepted) break;
    a = std::move(a_try);
    b = std::move(b_try);
    params = std::move(params_try);
    loss = loss_and_grad(params, batch, grad);
  }
  rec.diverged = !std::isfinite(loss);
  return rec;
}

}  // namespace

FlowRecord constrained_flow(const SPointSparse& init, const CovarianceSpec& spec,
                            const Batch& batch, double step, int iters) {
  return flow_impl(init.a, {}, false, spec, batch, step, iters);
}

FlowRecord constrained_flow(const SPointFull& init, const CovarianceSpec& spec,
                            const Batch& batch, double step, int iters) {
  return flow_impl(init.a, init.b, true, spec, batch, step, iters);
}

double swap_invariance_check(const Prompt& prompt, const SPointSparse& point,
                             const CovarianceSpec& spec, int i, int j) {
  const int k = static_cast<int>(point.a.size());
  if (i < 0 || j < 0 || i >= k || j >= k)
    throw ValidationError("swap_invariance_check: layer index out of range");
  const double base = per_prompt_sq_error(materialize(point, spec), prompt);
  SPointSparse swapped = point;
  std::swap(swapped.a[i], swapped.a[j]);
  const double other = per_prompt_sq_error(materialize(swapped, spec), prompt);
  return std::abs(base - other);
}

AlignmentReport diagonal_alignment(const Eigen::MatrixXd& A0,
                                   const Eigen::MatrixXd& A1) {
  if ((A0 - A0.transpose()).norm() > 1e-12 || (A1 - A1.transpose()).norm() > 1e-12)
    throw ValidationError("diagonal_alignment: symmetric inputs required");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A0);
  const Eigen::MatrixXd& V = es.eigenvectors();
  const Eigen::VectorXd& ev = es.eigenvalues();
  AlignmentReport rep;
  for (int i = 0; i + 1 < ev.size(); ++i)
    if (ev[i + 1] - ev[i] < 1e-8) rep.degenerate = true;
  const double nrm = A1.norm();
  if (nrm == 0.0) return rep;
  Eigen::MatrixXd M = V.transpose() * A1 * V;
  const double total_sq = M.squaredNorm();
  const double diag_sq = M.diagonal().squaredNorm();
  rep.value = std::sqrt(std::max(0.0, total_sq - diag_sq)) / nrm;
  return rep;
}

}  // namespace icl
