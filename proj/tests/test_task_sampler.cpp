#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "parallel.hpp"
#include "task_sampler.hpp"

using namespace icl;

TEST_CASE("haar d=1 is a sign") {
  RngStream rng(3, kStreamHaar);
  Eigen::MatrixXd Q = haar_orthogonal(1, rng);
  CHECK(std::abs(std::abs(Q(0, 0)) - 1.0) == 0.0);
}

TEST_CASE("haar orthogonality at d=5") {
  for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
    RngStream rng(seed, kStreamHaar);
    Eigen::MatrixXd Q = haar_orthogonal(5, rng);
    CHECK((Q.transpose() * Q - Eigen::MatrixXd::Identity(5, 5)).norm() <= 1e-12);
  }
}

TEST_CASE("haar symmetry: mean entry near zero") {
  const int N = 10000;
  RngStream rng(7, kStreamHaar);
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < N; ++i) {
    const double v = haar_orthogonal(3, rng)(0, 0);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / N;
  const double se = std::sqrt((sumsq / N - mean * mean) / N);
  CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("haar rejects d=0") {
  RngStream rng(1, kStreamHaar);
  CHECK_THROWS_AS(haar_orthogonal(0, rng), ValidationError);
}

TEST_CASE("identity covariance") {
  CovarianceSpec spec = make_covariance_identity(2, Eigen::VectorXd::Ones(2));
  CHECK((spec.Sigma - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("eigenvalues are squared entries") {
  Eigen::VectorXd entries(5);
  entries << 1, 1, 0.5, 0.25, 1;
  CovarianceSpec spec = make_covariance_haar(5, entries, 11);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spec.Sigma);
  Eigen::VectorXd want(5);
  want << 0.0625, 0.25, 1, 1, 1;
  CHECK((es.eigenvalues() - want).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("d=1 powers") {
  Eigen::VectorXd entries(1);
  entries << 2.0;
  CovarianceSpec spec = make_covariance_identity(1, entries);
  CHECK(spec.SigmaInv(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(spec.SigmaInvHalf(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("covariance power invariants hold for random specs") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RngStream rng(seed, kStreamMisc);
    const int d = 1 + static_cast<int>(rng.next_u64() % 6);
    Eigen::VectorXd entries(d);
    for (int i = 0; i < d; ++i) entries[i] = 0.3 + rng.uniform();
    CovarianceSpec spec = make_covariance(d, entries, haar_orthogonal(d, rng));
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    CHECK((spec.Sigma - spec.Sigma.transpose()).norm() <= 1e-12);
    CHECK((spec.SigmaHalf * spec.SigmaHalf - spec.Sigma).norm() <= 1e-10);
    CHECK((spec.SigmaInv * spec.Sigma - I).norm() <= 1e-10);
    CHECK((spec.SigmaInvHalf * spec.SigmaHalf - I).norm() <= 1e-10);
  }
}

TEST_CASE("covariance rejects bad inputs") {
  Eigen::VectorXd bad(2);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS(make_covariance_identity(2, bad), ValidationError);
  Eigen::VectorXd ok(2);
  ok << 1.0, 1.0;
  Eigen::MatrixXd skew(2, 2);
  skew << 1, 1, 0, 1;
  CHECK_THROWS_AS(make_covariance(2, ok, skew), ValidationError);
}

TEST_CASE("labels are exact inner products") {
  Eigen::VectorXd entries(3);
  entries << 1.0, 0.5, 2.0;
  CovarianceSpec spec = make_covariance_haar(3, entries, 4);
  RngStream rng(4, kStreamPrompt);
  Prompt p = sample_prompt(spec, 7, WeightPrior::InverseCovariance, rng);
  for (int i = 0; i < 7; ++i) CHECK(p.y[i] == p.X.col(i).dot(p.w_star));
  CHECK(p.y_query == p.X.col(7).dot(p.w_star));
}

TEST_CASE("covariate second moment matches Sigma") {
  CovarianceSpec spec = make_covariance_identity(3, Eigen::VectorXd::Ones(3));
  const int N = 100000;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 3);
  Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(3, 3);
  for (int t = 0; t < N; ++t) {
    RngStream rng(5, kStreamPrompt | static_cast<std::uint64_t>(t));
    Prompt p = sample_prompt(spec, 1, WeightPrior::Isotropic, rng);
    const Eigen::MatrixXd outer = p.X.col(0) * p.X.col(0).transpose();
    sum += outer;
    sumsq += outer.cwiseAbs2();
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double mean = sum(i, j) / N;
      const double se = std::sqrt((sumsq(i, j) / N - mean * mean) / N);
      const double target = i == j ? 1.0 : 0.0;
      CHECK(std::abs(mean - target) <= 3.0 * se);
    }
}

TEST_CASE("inverse-covariance prior moments in the U basis") {
  Eigen::VectorXd entries(2);
  entries << 1.0, 2.0;
  CovarianceSpec spec = make_covariance_haar(2, entries, 6);
  const int N = 100000;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(2, 2);
  Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(2, 2);
  for (int t = 0; t < N; ++t) {
    RngStream rng(6, kStreamPrompt | static_cast<std::uint64_t>(t));
    Prompt p = sample_prompt(spec, 1, WeightPrior::InverseCovariance, rng);
    const Eigen::VectorXd wu = spec.U * p.w_star;
    const Eigen::MatrixXd outer = wu * wu.transpose();
    sum += outer;
    sumsq += outer.cwiseAbs2();
  }
  // Sigma eigenvalues are the squared entries, so the prior covariance in the
  // U basis is diag(1, 1/4).
  Eigen::MatrixXd target = Eigen::MatrixXd::Zero(2, 2);
  target(0, 0) = 1.0;
  target(1, 1) = 0.25;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double mean = sum(i, j) / N;
      const double se = std::sqrt((sumsq(i, j) / N - mean * mean) / N);
      CHECK(std::abs(mean - target(i, j)) <= 3.0 * se);
    }
}

TEST_CASE("token matrix layout") {
  Prompt p;
  p.X.resize(1, 2);
  p.X << 1, 1;
  p.w_star.resize(1);
  p.w_star << 2;
  p.y.resize(1);
  p.y << 2;
  p.y_query = 2;
  Eigen::MatrixXd Z = build_Z0(p);
  Eigen::MatrixXd want(2, 2);
  want << 1, 1, 2, 0;
  CHECK((Z - want).norm() == 0.0);

  CovarianceSpec spec = make_covariance_identity(2, Eigen::VectorXd::Ones(2));
  RngStream rng(9, kStreamPrompt);
  Prompt q = sample_prompt(spec, 3, WeightPrior::Isotropic, rng);
  Eigen::MatrixXd Z2 = build_Z0(q);
  CHECK(Z2.rows() == 3);
  CHECK(Z2.cols() == 4);
  CHECK(Z2(2, 3) == 0.0);
  CHECK((Z2.topRows(2) - q.X).norm() == 0.0);
}

TEST_CASE("prompt sampling is stream deterministic and thread independent") {
  Eigen::VectorXd entries(3);
  entries << 1.0, 0.7, 0.4;
  CovarianceSpec spec = make_covariance_haar(3, entries, 12);
  RngStream a(12, kStreamPrompt | 5), b(12, kStreamPrompt | 5);
  Prompt pa = sample_prompt(spec, 6, WeightPrior::Isotropic, a);
  Prompt pb = sample_prompt(spec, 6, WeightPrior::Isotropic, b);
  CHECK((pa.X - pb.X).norm() == 0.0);
  CHECK((pa.w_star - pb.w_star).norm() == 0.0);

  set_thread_count(1);
  Batch one = sample_batch(spec, 6, WeightPrior::Isotropic, 12, 0, 3000);
  set_thread_count(3);
  Batch three = sample_batch(spec, 6, WeightPrior::Isotropic, 12, 0, 3000);
  set_thread_count(1);
  for (std::size_t i = 0; i < one.prompts.size(); ++i) {
    CHECK((one.prompts[i].X - three.prompts[i].X).norm() == 0.0);
    CHECK(one.prompts[i].y_query == three.prompts[i].y_query);
  }
}

TEST_CASE("sampler rejects n=0") {
  CovarianceSpec spec = make_covariance_identity(2, Eigen::VectorXd::Ones(2));
  RngStream rng(1, kStreamPrompt);
  CHECK_THROWS_AS(sample_prompt(spec, 0, WeightPrior::Isotropic, rng),
                  ValidationError);
}
