#include "task_sampler.hpp"

#include <cmath>

#include "errors.hpp"
#include "parallel.hpp"

namespace icl {

Eigen::MatrixXd haar_orthogonal(int d, RngStream& rng) {
  if (d < 1) throw ValidationError("haar_orthogonal: dimension must be positive");
  Eigen::MatrixXd G(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) G(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ();
  Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  // Fixing sign(R_jj) = +1 makes the factorization unique, which is what turns
  // the QR of a Gaussian matrix into a Haar draw.
  for (int j = 0; j < d; ++j)
    if (R(j, j) < 0) Q.col(j) = -Q.col(j);
  return Q;
}

CovarianceSpec make_covariance(int d, const Eigen::VectorXd& d_entries,
                               const Eigen::MatrixXd& U) {
  if (d < 1) throw ValidationError("make_covariance: dimension must be positive");
  if (d_entries.size() != d)
    throw ValidationError("make_covariance: d_entries size mismatch");
  for (int i = 0; i < d; ++i)
    if (!(d_entries[i] > 0.0))
      throw ValidationError("make_covariance: spectrum entries must be positive");
  if (U.rows() != d || U.cols() != d)
    throw ValidationError("make_covariance: basis shape mismatch");
  const double ortho_gap = (U.transpose() * U - Eigen::MatrixXd::Identity(d, d)).norm();
  if (ortho_gap > 1e-12)
    throw ValidationError("make_covariance: basis is not orthogonal");

  CovarianceSpec spec;
  spec.dim = d;
  spec.U = U;
  spec.d_entries = d_entries;
  const Eigen::VectorXd lam = d_entries.array().square();
  spec.Sigma = U.transpose() * lam.asDiagonal() * U;
  spec.SigmaHalf = U.transpose() * d_entries.asDiagonal() * U;
  spec.SigmaInv = U.transpose() * lam.cwiseInverse().asDiagonal() * U;
  spec.SigmaInvHalf = U.transpose() * d_entries.cwiseInverse().asDiagonal() * U;
  return spec;
}

CovarianceSpec make_covariance_identity(int d, const Eigen::VectorXd& d_entries) {
  return make_covariance(d, d_entries, Eigen::MatrixXd::Identity(d, d));
}

CovarianceSpec make_covariance_haar(int d, const Eigen::VectorXd& d_entries,
                                    std::uint64_t seed) {
  RngStream rng(seed, kStreamHaar);
  return make_covariance(d, d_entries, haar_orthogonal(d, rng));
}

Prompt sample_prompt(const CovarianceSpec& spec, int n, WeightPrior prior,
                     RngStream& rng) {
  if (n < 1) throw ValidationError("sample_prompt: prompt length must be positive");
  const int d = spec.dim;
  Prompt p;
  p.X.resize(d, n + 1);
  Eigen::VectorXd g(d);
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i < d; ++i) g[i] = rng.gaussian();
    p.X.col(j) = spec.U.transpose() * (spec.d_entries.asDiagonal() * g);
  }
  for (int i = 0; i < d; ++i) g[i] = rng.gaussian();
  if (prior == WeightPrior::Isotropic) {
    p.w_star = g;
  } else {
    p.w_star = spec.U.transpose() * (spec.d_entries.cwiseInverse().asDiagonal() * g);
  }
  p.y.resize(n);
  for (int i = 0; i < n; ++i) p.y[i] = p.X.col(i).dot(p.w_star);
  p.y_query = p.X.col(n).dot(p.w_star);
  return p;
}

Eigen::MatrixXd build_Z0(const Prompt& prompt) {
  const int d = static_cast<int>(prompt.X.rows());
  const int n = static_cast<int>(prompt.y.size());
  Eigen::MatrixXd Z(d + 1, n + 1);
  Z.topRows(d) = prompt.X;
  Z.row(d).head(n) = prompt.y.transpose();
  Z(d, n) = 0.0;
  return Z;
}

Batch sample_batch(const CovarianceSpec& spec, int n, WeightPrior prior,
                   std::uint64_t seed, std::uint64_t stream_base,
                   std::size_t count) {
  if (count == 0) throw ValidationError("sample_batch: empty batch");
  Batch batch;
  batch.d = spec.dim;
  batch.n = n;
  batch.prompts.resize(count);
  for_each_chunk(count, kDefaultChunk,
                 [&](std::size_t, std::size_t begin, std::size_t end) {
                   for (std::size_t i = begin; i < end; ++i) {
                     RngStream rng(seed, kStreamPrompt | (stream_base + i));
                     batch.prompts[i] = sample_prompt(spec, n, prior, rng);
                   }
                 });
  return batch;
}

}  // namespace icl
