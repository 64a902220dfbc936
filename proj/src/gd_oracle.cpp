#include "gd_oracle.hpp"

#include <cmath>

#include "errors.hpp"

namespace icl {

double regression_objective(const Prompt& prompt, const Eigen::VectorXd& w,
                            Eigen::VectorXd& grad) {
  const int d = static_cast<int>(prompt.X.rows());
  const int n = static_cast<int>(prompt.y.size());
  if (w.size() != d) throw ValidationError("regression_objective: dimension mismatch");
  // Plain loops on purpose; this path must not share code with the attention
  // implementation it is used to certify.
  double value = 0.0;
  grad = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) {
    double resid = 0.0;
    for (int a = 0; a < d; ++a) resid += (w[a] - prompt.w_star[a]) * prompt.X(a, i);
    value += resid * resid;
    for (int a = 0; a < d; ++a) grad[a] += resid * prompt.X(a, i);
  }
  value /= 2.0 * n;
  grad /= static_cast<double>(n);
  return value;
}

GDTrajectory precond_gd(const Prompt& prompt,
                        const std::vector<Eigen::MatrixXd>& A_list) {
  const int d = static_cast<int>(prompt.X.rows());
  GDTrajectory traj;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd grad(d);
  traj.R.push_back(regression_objective(prompt, w, grad));
  traj.w.push_back(w);
  for (const Eigen::MatrixXd& A : A_list) {
    if (A.rows() != d || A.cols() != d)
      throw ValidationError("precond_gd: step matrix dimension mismatch");
    Eigen::VectorXd step = Eigen::VectorXd::Zero(d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) step[a] += A(a, b) * grad[b];
    w += step;
    traj.R.push_back(regression_objective(prompt, w, grad));
    traj.w.push_back(w);
  }
  return traj;
}

double check_lemma1(const Prompt& prompt, const TransformerParams& params) {
  if (params.variant != Variant::Sparse)
    throw ValidationError("check_lemma1: sparse variant required");
  std::vector<Eigen::MatrixXd> A_list;
  for (const auto& l : params.sparse) A_list.push_back(l.A);
  GDTrajectory traj = precond_gd(prompt, A_list);
  std::vector<Eigen::MatrixXd> trace;
  forward(build_Z0(prompt), params, &trace);
  const Eigen::VectorXd xq = prompt.X.col(prompt.X.cols() - 1);
  double max_gap = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double gap = std::abs(predict(trace[i]) - xq.dot(traj.w[i]));
    max_gap = std::max(max_gap, gap);
  }
  return max_gap;
}

Eigen::MatrixXd gdpp_covariate_step(const Eigen::MatrixXd& X,
                                    const Eigen::MatrixXd& A,
                                    const Eigen::MatrixXd& B) {
  const int d = static_cast<int>(X.rows());
  const int n = static_cast<int>(X.cols()) - 1;
  if (A.rows() != d || A.cols() != d || B.rows() != d || B.cols() != d)
    throw ValidationError("gdpp_covariate_step: dimension mismatch");
  Eigen::MatrixXd W = X.leftCols(n) * X.leftCols(n).transpose();
  return X + (1.0 / n) * B * W * A * X;
}

}  // namespace icl
