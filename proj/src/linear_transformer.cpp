#include "linear_transformer.hpp"

#include "errors.hpp"

namespace icl {
namespace {

void check_symmetric(const Eigen::MatrixXd& A, const char* what) {
  if (A.rows() != A.cols()) throw ValidationError(std::string(what) + ": not square");
  if ((A - A.transpose()).norm() > 1e-12)
    throw ValidationError(std::string(what) + ": not symmetric");
}

}  // namespace

Eigen::MatrixXd attention(const Eigen::MatrixXd& Z, const FullLayer& layer) {
  const int dp1 = static_cast<int>(Z.rows());
  if (layer.P.rows() != dp1 || layer.P.cols() != dp1 || layer.Q.rows() != dp1 ||
      layer.Q.cols() != dp1)
    throw ValidationError("attention: layer/token dimension mismatch");
  if (Z.cols() < 2) throw ValidationError("attention: need at least one context column");
  Eigen::MatrixXd Zm = Z;
  Zm.col(Zm.cols() - 1).setZero();
  return layer.P * Zm * (Z.transpose() * layer.Q * Z);
}

Eigen::MatrixXd forward(const Eigen::MatrixXd& Z0, const TransformerParams& params,
                        std::vector<Eigen::MatrixXd>* trace) {
  if (Z0.rows() != params.d + 1)
    throw ValidationError("forward: token rows do not match parameter dimension");
  const double c = 1.0 / static_cast<double>(Z0.cols() - 1);
  Eigen::MatrixXd Z = Z0;
  if (trace) {
    trace->clear();
    trace->push_back(Z);
  }
  const TransformerParams& full =
      params.variant == Variant::Full ? params : embed_to_full(params);
  for (const FullLayer& layer : full.full) {
    Z += c * attention(Z, layer);
    if (trace) trace->push_back(Z);
  }
  return Z;
}

void forward_xy(Eigen::MatrixXd& X, Eigen::RowVectorXd& Y,
                const TransformerParams& params) {
  if (params.variant == Variant::Full)
    throw ValidationError("forward_xy: structured variants only");
  if (X.rows() != params.d || Y.cols() != X.cols())
    throw ValidationError("forward_xy: shape mismatch");
  const int n = static_cast<int>(X.cols()) - 1;
  const double c = 1.0 / static_cast<double>(n);
  const int k = params.depth();
  for (int i = 0; i < k; ++i) {
    const Eigen::MatrixXd& A =
        params.variant == Variant::Sparse ? params.sparse[i].A : params.gdpp[i].A;
    // Y M X^T A X with the mask dropping the query column of both factors.
    Eigen::VectorXd p = X.leftCols(n) * Y.head(n).transpose();
    Eigen::VectorXd q = A * p;
    Eigen::RowVectorXd Ynext = Y + c * (X.transpose() * q).transpose();
    if (params.variant == Variant::GDPP) {
      Eigen::MatrixXd W = X.leftCols(n) * X.leftCols(n).transpose();
      X += c * (params.gdpp[i].B * W * A) * X;
    }
    Y = Ynext;
  }
}

double predict(const Eigen::MatrixXd& Zk) {
  return -Zk(Zk.rows() - 1, Zk.cols() - 1);
}

FullLayer embed_structured_to_full(const SparseLayer& layer) {
  const int d = static_cast<int>(layer.A.rows());
  FullLayer out;
  out.P = Eigen::MatrixXd::Zero(d + 1, d + 1);
  out.P(d, d) = 1.0;
  out.Q = Eigen::MatrixXd::Zero(d + 1, d + 1);
  out.Q.topLeftCorner(d, d) = layer.A;
  return out;
}

FullLayer embed_structured_to_full(const GDPPLayer& layer) {
  const int d = static_cast<int>(layer.A.rows());
  FullLayer out;
  out.P = Eigen::MatrixXd::Zero(d + 1, d + 1);
  out.P.topLeftCorner(d, d) = layer.B;
  out.P(d, d) = 1.0;
  out.Q = Eigen::MatrixXd::Zero(d + 1, d + 1);
  out.Q.topLeftCorner(d, d) = layer.A;
  return out;
}

TransformerParams embed_to_full(const TransformerParams& params) {
  TransformerParams out;
  out.variant = Variant::Full;
  out.d = params.d;
  if (params.variant == Variant::Sparse) {
    for (const auto& l : params.sparse) out.full.push_back(embed_structured_to_full(l));
  } else if (params.variant == Variant::GDPP) {
    for (const auto& l : params.gdpp) out.full.push_back(embed_structured_to_full(l));
  } else {
    out.full = params.full;
  }
  return out;
}

TransformerParams make_sparse(std::vector<Eigen::MatrixXd> A) {
  if (A.empty()) throw ValidationError("make_sparse: no layers");
  TransformerParams p;
  p.variant = Variant::Sparse;
  p.d = static_cast<int>(A[0].rows());
  for (auto& a : A) {
    check_symmetric(a, "make_sparse");
    if (a.rows() != p.d) throw ValidationError("make_sparse: layer dimension mismatch");
    p.sparse.push_back({std::move(a)});
  }
  return p;
}

TransformerParams make_gdpp(std::vector<Eigen::MatrixXd> A,
                            std::vector<Eigen::MatrixXd> B) {
  if (A.empty() || A.size() != B.size())
    throw ValidationError("make_gdpp: layer lists empty or mismatched");
  TransformerParams p;
  p.variant = Variant::GDPP;
  p.d = static_cast<int>(A[0].rows());
  for (std::size_t i = 0; i < A.size(); ++i) {
    check_symmetric(A[i], "make_gdpp");
    if (A[i].rows() != p.d || B[i].rows() != p.d || B[i].cols() != p.d)
      throw ValidationError("make_gdpp: layer dimension mismatch");
    p.gdpp.push_back({std::move(A[i]), std::move(B[i])});
  }
  return p;
}

TransformerParams make_full(std::vector<FullLayer> layers) {
  if (layers.empty()) throw ValidationError("make_full: no layers");
  TransformerParams p;
  p.variant = Variant::Full;
  p.d = static_cast<int>(layers[0].P.rows()) - 1;
  for (const auto& l : layers)
    if (l.P.rows() != p.d + 1 || l.P.cols() != p.d + 1 || l.Q.rows() != p.d + 1 ||
        l.Q.cols() != p.d + 1)
      throw ValidationError("make_full: layer dimension mismatch");
  p.full = std::move(layers);
  return p;
}

}  // namespace icl
