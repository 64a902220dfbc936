#pragma once

#include <Eigen/Dense>
#include <vector>

namespace icl {

struct FullLayer {
  Eigen::MatrixXd P;  // (d+1) x (d+1)
  Eigen::MatrixXd Q;  // (d+1) x (d+1)
};

struct SparseLayer {
  Eigen::MatrixXd A;  // d x d symmetric
};

struct GDPPLayer {
  Eigen::MatrixXd A;  // d x d symmetric
  Eigen::MatrixXd B;  // d x d
};

enum class Variant { Full, Sparse, GDPP };

struct TransformerParams {
  Variant variant = Variant::Sparse;
  int d = 0;
  std::vector<FullLayer> full;
  std::vector<SparseLayer> sparse;
  std::vector<GDPPLayer> gdpp;

  int depth() const {
    switch (variant) {
      case Variant::Full: return static_cast<int>(full.size());
      case Variant::Sparse: return static_cast<int>(sparse.size());
      case Variant::GDPP: return static_cast<int>(gdpp.size());
    }
    return 0;
  }
};

// Single masked linear-attention term P * Z * M * (Z^T Q Z); the mask zeroes
// the query column before the value product.
Eigen::MatrixXd attention(const Eigen::MatrixXd& Z, const FullLayer& layer);

// Residual recursion Z <- Z + (1/n) * attention(Z, layer) over all layers.
// Structured variants run through their full-layer embedding here; trace, when
// non-null, receives Z_0..Z_k.
Eigen::MatrixXd forward(const Eigen::MatrixXd& Z0, const TransformerParams& params,
                        std::vector<Eigen::MatrixXd>* trace = nullptr);

// Equivalent split dynamics on (X, Y) for the structured variants.
void forward_xy(Eigen::MatrixXd& X, Eigen::RowVectorXd& Y,
                const TransformerParams& params);

double predict(const Eigen::MatrixXd& Zk);

FullLayer embed_structured_to_full(const SparseLayer& layer);
FullLayer embed_structured_to_full(const GDPPLayer& layer);
TransformerParams embed_to_full(const TransformerParams& params);

TransformerParams make_sparse(std::vector<Eigen::MatrixXd> A);
TransformerParams make_gdpp(std::vector<Eigen::MatrixXd> A,
                            std::vector<Eigen::MatrixXd> B);
TransformerParams make_full(std::vector<FullLayer> layers);

}  // namespace icl
