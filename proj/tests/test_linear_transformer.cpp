#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "errors.hpp"
#include "linear_transformer.hpp"
#include "task_sampler.hpp"

using namespace icl;

namespace {

Eigen::MatrixXd random_symmetric(int d, double scale, RngStream& rng) {
  Eigen::MatrixXd M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      const double v = scale * rng.gaussian();
      M(i, j) = v;
      M(j, i) = v;
    }
  return M;
}

Eigen::MatrixXd random_matrix(int r, int c, double scale, RngStream& rng) {
  Eigen::MatrixXd M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = scale * rng.gaussian();
  return M;
}

Eigen::MatrixXd hand_Z0() {
  Eigen::MatrixXd Z(2, 2);
  Z << 1, 1, 2, 0;
  return Z;
}

TransformerParams hand_params() {
  Eigen::MatrixXd A(1, 1);
  A << -1;
  return make_sparse({A});
}

}  // namespace

TEST_CASE("attention vanishes with zero P or Q") {
  RngStream rng(1, kStreamMisc);
  Eigen::MatrixXd Z = random_matrix(3, 5, 1.0, rng);
  FullLayer pz{Eigen::MatrixXd::Zero(3, 3), random_matrix(3, 3, 1.0, rng)};
  FullLayer qz{random_matrix(3, 3, 1.0, rng), Eigen::MatrixXd::Zero(3, 3)};
  CHECK(attention(Z, pz).norm() == 0.0);
  CHECK(attention(Z, qz).norm() == 0.0);
}

TEST_CASE("hand trace of the one-dimensional instance") {
  FullLayer layer = embed_structured_to_full(SparseLayer{hand_params().sparse[0].A});
  Eigen::MatrixXd attn = attention(hand_Z0(), layer);
  Eigen::MatrixXd want(2, 2);
  want << 0, 0, -2, -2;
  CHECK((attn - want).norm() <= 1e-14);

  Eigen::MatrixXd Z1 = forward(hand_Z0(), hand_params());
  Eigen::MatrixXd wantZ(2, 2);
  wantZ << 1, 1, 0, -2;
  CHECK((Z1 - wantZ).norm() <= 1e-14);
  CHECK(predict(Z1) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("zero parameters are the identity map") {
  RngStream rng(2, kStreamMisc);
  Eigen::MatrixXd Z0 = random_matrix(4, 7, 1.0, rng);
  TransformerParams p = make_sparse({Eigen::MatrixXd::Zero(3, 3),
                                     Eigen::MatrixXd::Zero(3, 3)});
  CHECK((forward(Z0, p) - Z0).norm() == 0.0);
  CHECK(predict(Z0 * 0.0) == 0.0);
}

TEST_CASE("sparse forward leaves covariate rows untouched") {
  RngStream rng(3, kStreamMisc);
  Eigen::MatrixXd Z0 = random_matrix(4, 9, 1.0, rng);
  TransformerParams p = make_sparse({random_symmetric(3, 0.4, rng),
                                     random_symmetric(3, 0.4, rng)});
  Eigen::MatrixXd Zk = forward(Z0, p);
  CHECK((Zk.topRows(3) - Z0.topRows(3)).norm() == 0.0);

  Eigen::MatrixXd X = Z0.topRows(3);
  Eigen::RowVectorXd Y = Z0.row(3);
  forward_xy(X, Y, p);
  CHECK((X - Z0.topRows(3)).norm() == 0.0);
}

TEST_CASE("forward_xy hand trace") {
  Eigen::MatrixXd X(1, 2);
  X << 1, 1;
  Eigen::RowVectorXd Y(2);
  Y << 2, 0;
  forward_xy(X, Y, hand_params());
  CHECK(Y[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(Y[1] == doctest::Approx(-2.0).epsilon(1e-14));
}

TEST_CASE("structured dynamics match the embedded full recursion") {
  for (int t = 0; t < 100; ++t) {
    RngStream rng(100 + t, kStreamMisc);
    const int d = 1 + static_cast<int>(rng.next_u64() % 6);
    const int n = 2 + static_cast<int>(rng.next_u64() % 19);
    const int k = 1 + static_cast<int>(rng.next_u64() % 4);
    const double scale = 0.4 / std::sqrt(double(d));
    std::vector<Eigen::MatrixXd> A, B;
    for (int i = 0; i < k; ++i) {
      A.push_back(random_symmetric(d, scale, rng));
      B.push_back(random_matrix(d, d, scale, rng));
    }
    TransformerParams p = t % 2 ? make_gdpp(A, B) : make_sparse(A);
    Eigen::MatrixXd X = random_matrix(d, n + 1, 1.0, rng);
    Eigen::RowVectorXd Y = random_matrix(1, n + 1, 1.0, rng).row(0);
    Eigen::MatrixXd Z0(d + 1, n + 1);
    Z0.topRows(d) = X;
    Z0.row(d) = Y;
    Eigen::MatrixXd Zk = forward(Z0, embed_to_full(p));
    forward_xy(X, Y, p);
    CHECK((Zk.topRows(d) - X).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((Zk.row(d) - Y).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("query label slot only shifts the corner") {
  RngStream rng(5, kStreamMisc);
  const int d = 3, n = 6;
  std::vector<Eigen::MatrixXd> A{random_symmetric(d, 0.4, rng),
                                 random_symmetric(d, 0.4, rng)};
  std::vector<Eigen::MatrixXd> B{random_matrix(d, d, 0.4, rng),
                                 random_matrix(d, d, 0.4, rng)};
  TransformerParams p = make_gdpp(A, B);
  Eigen::MatrixXd Z0 = random_matrix(d + 1, n + 1, 1.0, rng);
  const double delta = 0.37;
  Eigen::MatrixXd Z0b = Z0;
  Z0b(d, n) += delta;
  Eigen::MatrixXd Za = forward(Z0, p);
  Eigen::MatrixXd Zb = forward(Z0b, p);
  Eigen::MatrixXd diff = Zb - Za;
  CHECK(std::abs(diff(d, n) - delta) <= 1e-13);
  diff(d, n) = 0.0;
  CHECK(diff.cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("single-layer gamma rescaling leaves the output unchanged") {
  RngStream rng(6, kStreamMisc);
  const int d = 3, n = 5;
  FullLayer layer{random_matrix(d + 1, d + 1, 0.5, rng),
                  random_matrix(d + 1, d + 1, 0.5, rng)};
  Eigen::MatrixXd Z0 = random_matrix(d + 1, n + 1, 1.0, rng);
  for (double gamma : {2.0, -0.5, 3.7}) {
    FullLayer scaled{gamma * layer.P, (1.0 / gamma) * layer.Q};
    Eigen::MatrixXd Za = forward(Z0, make_full({layer}));
    Eigen::MatrixXd Zb = forward(Z0, make_full({scaled}));
    CHECK((Za - Zb).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("embedding block layouts") {
  Eigen::MatrixXd A1(1, 1);
  A1 << 0.7;
  FullLayer s = embed_structured_to_full(SparseLayer{A1});
  Eigen::MatrixXd wantP(2, 2), wantQ(2, 2);
  wantP << 0, 0, 0, 1;
  wantQ << 0.7, 0, 0, 0;
  CHECK((s.P - wantP).norm() == 0.0);
  CHECK((s.Q - wantQ).norm() == 0.0);

  FullLayer g0 = embed_structured_to_full(GDPPLayer{A1, Eigen::MatrixXd::Zero(1, 1)});
  CHECK((g0.P - s.P).norm() == 0.0);
  CHECK((g0.Q - s.Q).norm() == 0.0);

  FullLayer g = embed_structured_to_full(
      GDPPLayer{Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)});
  CHECK((g.P - Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);
  Eigen::MatrixXd wantQ3 = Eigen::MatrixXd::Identity(3, 3);
  wantQ3(2, 2) = 0.0;
  CHECK((g.Q - wantQ3).norm() == 0.0);
}

TEST_CASE("validation errors") {
  CHECK_THROWS_AS(make_sparse({}), ValidationError);
  Eigen::MatrixXd asym(2, 2);
  asym << 0, 1, 0, 0;
  CHECK_THROWS_AS(make_sparse({asym}), ValidationError);
  Eigen::MatrixXd X(2, 3);
  X.setOnes();
  Eigen::RowVectorXd Y(3);
  Y.setOnes();
  TransformerParams full = make_full(
      {FullLayer{Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3)}});
  CHECK_THROWS_AS(forward_xy(X, Y, full), ValidationError);
  CHECK_THROWS_AS(forward(Eigen::MatrixXd::Zero(4, 4), full), ValidationError);
}
