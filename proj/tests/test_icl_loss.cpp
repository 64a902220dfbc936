#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "icl_loss.hpp"
#include "parallel.hpp"
#include "task_sampler.hpp"
#include "trainer.hpp"

using namespace icl;

namespace {

Prompt hand_prompt() {
  Prompt p;
  p.X.resize(1, 2);
  p.X << 1, 1;
  p.w_star.resize(1);
  p.w_star << 2;
  p.y.resize(1);
  p.y << 2;
  p.y_query = 2;
  return p;
}

TransformerParams random_params(Variant variant, int d, int k, double scale,
                                RngStream& rng) {
  return init_params(variant, d, k, scale * std::sqrt(double(d)), rng);
}

Batch tiny_batch(int d, int n, int count, std::uint64_t seed, WeightPrior prior) {
  CovarianceSpec spec = make_covariance_identity(d, Eigen::VectorXd::Ones(d));
  return sample_batch(spec, n, prior, seed, 0, count);
}

}  // namespace

TEST_CASE("zero parameters leave the placeholder prediction") {
  Prompt p = hand_prompt();
  TransformerParams zero = make_sparse({Eigen::MatrixXd::Zero(1, 1)});
  CHECK(per_prompt_sq_error(zero, p) == doctest::Approx(4.0).epsilon(1e-14));
  p.w_star[0] = 0.0;
  p.y[0] = 0.0;
  p.y_query = 0.0;
  CHECK(per_prompt_sq_error(zero, p) == 0.0);
}

TEST_CASE("hand instance is solved by a single unit step") {
  Eigen::MatrixXd A(1, 1);
  A << -1;
  CHECK(per_prompt_sq_error(make_sparse({A}), hand_prompt()) <= 1e-24);
  CHECK(trace_form_loss(make_sparse({A}), hand_prompt()) <= 1e-24);
}

TEST_CASE("trace form equals the prediction loss") {
  Prompt p = hand_prompt();
  TransformerParams zero = make_sparse({Eigen::MatrixXd::Zero(1, 1)});
  CHECK(trace_form_loss(zero, p) == doctest::Approx(4.0).epsilon(1e-14));
  for (int t = 0; t < 100; ++t) {
    RngStream rng(300 + t, kStreamMisc);
    const int d = 1 + static_cast<int>(rng.next_u64() % 5);
    const int n = 2 + static_cast<int>(rng.next_u64() % 9);
    CovarianceSpec spec = make_covariance_identity(d, Eigen::VectorXd::Ones(d));
    Prompt q = sample_prompt(spec, n, WeightPrior::Isotropic, rng);
    TransformerParams params =
        random_params(t % 2 ? Variant::Sparse : Variant::GDPP, d,
                      1 + static_cast<int>(rng.next_u64() % 3), 0.3, rng);
    CHECK(std::abs(trace_form_loss(params, q) - per_prompt_sq_error(params, q)) <=
          1e-12);
  }
}

TEST_CASE("mc_loss basics") {
  Batch b = tiny_batch(2, 4, 1, 21, WeightPrior::Isotropic);
  RngStream rng(22, kStreamMisc);
  TransformerParams params = random_params(Variant::Sparse, 2, 2, 0.3, rng);
  CHECK(mc_loss(params, b) == per_prompt_sq_error(params, b.prompts[0]));
  Batch dup = b;
  dup.prompts.push_back(b.prompts[0]);
  CHECK(mc_loss(params, dup) == doctest::Approx(mc_loss(params, b)).epsilon(1e-15));
  Batch empty;
  CHECK_THROWS_AS(mc_loss(params, empty), ValidationError);
}

TEST_CASE("zero-parameter loss matches the label second moment") {
  Batch b = tiny_batch(3, 10, 100000, 23, WeightPrior::Isotropic);
  TransformerParams zero = make_sparse({Eigen::MatrixXd::Zero(3, 3)});
  double sum = 0.0, sumsq = 0.0;
  for (const auto& p : b.prompts) {
    const double v = p.y_query * p.y_query;
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / b.prompts.size();
  const double se =
      std::sqrt((sumsq / b.prompts.size() - mean * mean) / b.prompts.size());
  CHECK(mc_loss(zero, b) == doctest::Approx(mean).epsilon(1e-12));
  CHECK(std::abs(mean - 3.0) <= 3.0 * se);
}

TEST_CASE("analytic gradients match central finite differences") {
  for (Variant variant : {Variant::Sparse, Variant::GDPP, Variant::Full}) {
    RngStream rng(31 + static_cast<int>(variant), kStreamMisc);
    const int d = 3, k = 2;
    Batch batch = tiny_batch(d, 6, 16, 77 + static_cast<int>(variant),
                             WeightPrior::Isotropic);
    TransformerParams params = random_params(variant, d, k, 0.3, rng);
    GradientBundle grad;
    loss_and_grad(params, batch, grad);
    Eigen::VectorXd g = pack_gradient(grad, params);
    Eigen::VectorXd x = pack_params(params);
    const double h = 1e-4;
    for (int c = 0; c < 20; ++c) {
      // Symmetric A blocks move along the mirrored coordinate pair, so the
      // probe is a direction vector rather than a lone entry.
      Eigen::VectorXd dir = Eigen::VectorXd::Zero(x.size());
      const int idx = static_cast<int>(rng.next_u64() % x.size());
      dir[idx] = 1.0;
      if (variant != Variant::Full) {
        const int per = d * d;
        const int layer = idx / per;
        if (layer < k) {
          const int i = (idx % per) / d, j = (idx % per) % d;
          if (i != j) dir[layer * per + j * d + i] = 1.0;
        }
      }
      TransformerParams work = params;
      unpack_params(x + h * dir, work);
      const double fp = mc_loss(work, batch);
      unpack_params(x - h * dir, work);
      const double fm = mc_loss(work, batch);
      const double fd = (fp - fm) / (2.0 * h);
      const double an = g.dot(dir);
      CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(an)));
    }
  }
}

TEST_CASE("gradient is defined and duplication-invariant") {
  Batch b = tiny_batch(2, 5, 8, 41, WeightPrior::Isotropic);
  TransformerParams zero =
      make_sparse({Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)});
  GradientBundle g1;
  loss_and_grad(zero, b, g1);
  CHECK(g1.norm() > 0.0);
  CHECK(std::isfinite(g1.norm()));
  Batch dbl = b;
  for (const auto& p : b.prompts) dbl.prompts.push_back(p);
  GradientBundle g2;
  loss_and_grad(zero, dbl, g2);
  g2.axpy(-1.0, g1);
  CHECK(g2.norm() <= 1e-14);
}

TEST_CASE("batch evaluation is thread-count independent") {
  Batch b = tiny_batch(3, 8, 5000, 43, WeightPrior::Isotropic);
  RngStream rng(43, kStreamMisc);
  TransformerParams params = random_params(Variant::GDPP, 3, 2, 0.3, rng);
  set_thread_count(1);
  GradientBundle ga;
  const double la = loss_and_grad(params, b, ga);
  set_thread_count(4);
  GradientBundle gb;
  const double lb = loss_and_grad(params, b, gb);
  set_thread_count(1);
  CHECK(la == lb);
  gb.axpy(-1.0, ga);
  CHECK(gb.norm() == 0.0);
}

TEST_CASE("single-layer reduction recovers the acting blocks") {
  RngStream rng(51, kStreamMisc);
  const int d = 3;
  TransformerParams full = random_params(Variant::Full, d, 1, 0.4, rng);
  SingleLayerParams slp = single_layer_reduce(full.full[0]);
  CHECK((slp.b.transpose() - full.full[0].P.row(d)).norm() == 0.0);
  CHECK((slp.A - full.full[0].Q.leftCols(d)).norm() == 0.0);

  CovarianceSpec spec = make_covariance_identity(d, Eigen::VectorXd::Ones(d));
  Prompt p = sample_prompt(spec, 6, WeightPrior::Isotropic, rng);
  const double base = per_prompt_sq_error(full, p);
  TransformerParams mod = full;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= d; ++j) mod.full[0].P(i, j) += 0.5;
  CHECK(per_prompt_sq_error(mod, p) == base);
  mod = full;
  for (int i = 0; i <= d; ++i) mod.full[0].Q(i, d) += 0.5;
  CHECK(per_prompt_sq_error(mod, p) == base);
}

TEST_CASE("reduced loss agrees with the full layer") {
  for (int t = 0; t < 100; ++t) {
    RngStream rng(400 + t, kStreamMisc);
    const int d = 1 + static_cast<int>(rng.next_u64() % 4);
    const int n = 2 + static_cast<int>(rng.next_u64() % 9);
    CovarianceSpec spec = make_covariance_identity(d, Eigen::VectorXd::Ones(d));
    Prompt p = sample_prompt(spec, n, WeightPrior::Isotropic, rng);
    TransformerParams full = random_params(Variant::Full, d, 1, 0.4, rng);
    SingleLayerParams slp = single_layer_reduce(full.full[0]);
    CHECK(std::abs(single_layer_per_prompt(slp, p) -
                   per_prompt_sq_error(full, p)) <= 1e-12);
    SingleLayerParams scaled{2.0 * slp.b, 0.5 * slp.A};
    CHECK(std::abs(single_layer_per_prompt(scaled, p) -
                   single_layer_per_prompt(slp, p)) <= 1e-12);
  }
}

TEST_CASE("reduced loss hand computation") {
  Prompt p = hand_prompt();
  for (double xq : {1.0, -0.3, 2.5}) {
    p.X(0, 1) = xq;
    p.y_query = 2.0 * xq;
    for (double a : {-1.0, 0.0, 0.7}) {
      SingleLayerParams slp;
      slp.b.resize(2);
      slp.b << 0, 1;
      slp.A.resize(2, 1);
      slp.A << a, 0;
      const double want = xq * xq * (2 * a + 2) * (2 * a + 2);
      CHECK(single_layer_per_prompt(slp, p) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("rotation with common random numbers") {
  RngStream rng(61, kStreamMisc);
  const int d = 3, n = 6;
  CovarianceSpec iso = make_covariance_identity(d, Eigen::VectorXd::Ones(d));
  Prompt p = sample_prompt(iso, n, WeightPrior::Isotropic, rng);
  Eigen::MatrixXd U = haar_orthogonal(d, rng);
  Eigen::VectorXd diag(d);
  diag << 0.4, -0.2, 0.9;
  Eigen::MatrixXd A0 = U * diag.asDiagonal() * U.transpose();
  A0 = 0.5 * (A0 + A0.transpose()).eval();
  Eigen::MatrixXd A1(d, d);
  A1 << 0.1, 0.2, 0.0, 0.2, -0.3, 0.1, 0.0, 0.1, 0.25;
  Eigen::MatrixXd A1r = U.transpose() * A1 * U;
  A1r = 0.5 * (A1r + A1r.transpose()).eval();
  Prompt rotated = p;
  rotated.X = U.transpose() * p.X;
  rotated.w_star = U.transpose() * p.w_star;
  const double lhs = per_prompt_sq_error(make_sparse({A0, A1}), p);
  const double rhs = per_prompt_sq_error(
      make_sparse({Eigen::MatrixXd(diag.asDiagonal()), A1r}), rotated);
  CHECK(std::abs(lhs - rhs) <= 1e-12);
}
