#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "rng.hpp"

namespace icl {

// Covariate covariance in eigendecomposed form: Sigma = U^T diag(d_entries)^2 U.
// All powers are assembled from the same factors, so SigmaHalf * SigmaHalf and
// SigmaInv * Sigma match their targets to rounding error by construction.
struct CovarianceSpec {
  int dim = 0;
  Eigen::MatrixXd U;          // rows are the eigenvectors
  Eigen::VectorXd d_entries;  // positive; eigenvalues of Sigma are d_entries^2
  Eigen::MatrixXd Sigma, SigmaInv, SigmaHalf, SigmaInvHalf;
};

enum class WeightPrior { Isotropic, InverseCovariance };

struct Prompt {
  Eigen::MatrixXd X;  // d x (n+1); last column is the query covariate
  Eigen::VectorXd y;  // n labels
  Eigen::VectorXd w_star;
  double y_query = 0.0;
};

Eigen::MatrixXd haar_orthogonal(int d, RngStream& rng);

CovarianceSpec make_covariance(int d, const Eigen::VectorXd& d_entries,
                               const Eigen::MatrixXd& U);
CovarianceSpec make_covariance_identity(int d, const Eigen::VectorXd& d_entries);
CovarianceSpec make_covariance_haar(int d, const Eigen::VectorXd& d_entries,
                                    std::uint64_t seed);

Prompt sample_prompt(const CovarianceSpec& spec, int n, WeightPrior prior,
                     RngStream& rng);

// Token matrix: rows 1..d carry X, row d+1 carries (y_1..y_n, 0).
Eigen::MatrixXd build_Z0(const Prompt& prompt);

struct Batch {
  std::vector<Prompt> prompts;
  int d = 0;
  int n = 0;
};

// Prompt i draws from stream (kStreamPrompt | stream_base + i), so the batch
// content is independent of sampling order and thread count.
Batch sample_batch(const CovarianceSpec& spec, int n, WeightPrior prior,
                   std::uint64_t seed, std::uint64_t stream_base,
                   std::size_t count);

}  // namespace icl
