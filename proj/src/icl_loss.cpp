#include "icl_loss.hpp"

#include "errors.hpp"
#include "parallel.hpp"

namespace icl {

GradientBundle GradientBundle::zeros_like(const TransformerParams& params) {
  GradientBundle g;
  g.variant = params.variant;
  const int d = params.d;
  const int k = params.depth();
  switch (params.variant) {
    case Variant::Sparse:
      g.dA.assign(k, Eigen::MatrixXd::Zero(d, d));
      break;
    case Variant::GDPP:
      g.dA.assign(k, Eigen::MatrixXd::Zero(d, d));
      g.dB.assign(k, Eigen::MatrixXd::Zero(d, d));
      break;
    case Variant::Full:
      g.dP.assign(k, Eigen::MatrixXd::Zero(d + 1, d + 1));
      g.dQ.assign(k, Eigen::MatrixXd::Zero(d + 1, d + 1));
      break;
  }
  return g;
}

namespace {

void axpy_list(double a, const std::vector<Eigen::MatrixXd>& src,
               std::vector<Eigen::MatrixXd>& dst) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
}

}  // namespace

void GradientBundle::axpy(double a, const GradientBundle& other) {
  axpy_list(a, other.dA, dA);
  axpy_list(a, other.dB, dB);
  axpy_list(a, other.dP, dP);
  axpy_list(a, other.dQ, dQ);
}

void GradientBundle::scale(double a) {
  for (auto* list : {&dA, &dB, &dP, &dQ})
    for (auto& m : *list) m *= a;
}

double GradientBundle::dot(const GradientBundle& other) const {
  double s = 0.0;
  auto acc = [&](const std::vector<Eigen::MatrixXd>& x,
                 const std::vector<Eigen::MatrixXd>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i].cwiseProduct(y[i]).sum();
  };
  acc(dA, other.dA);
  acc(dB, other.dB);
  acc(dP, other.dP);
  acc(dQ, other.dQ);
  return s;
}

double GradientBundle::norm() const { return std::sqrt(dot(*this)); }

namespace {

// Reusable per-worker scratch; resized on first prompt of a shape.
struct Work {
  Eigen::VectorXd Y, g, q, dq, dp;
  Eigen::MatrixXd Pstore;              // d x k, label-weighted covariate sums
  std::vector<Eigen::MatrixXd> Xs;     // GDPP covariates per layer
  std::vector<Eigen::VectorXd> Ys;     // GDPP labels per layer
  std::vector<Eigen::MatrixXd> Ws;     // GDPP masked second moments
  std::vector<Eigen::MatrixXd> Cs;     // GDPP combined covariate updates
  std::vector<Eigen::VectorXd> ps, qs;
  std::vector<Eigen::MatrixXd> Zs, Cf, Af;  // Full-variant trajectory
};

// Label dynamics only; X never moves in the sparse structure. y0_corner seeds
// the query-label slot (zero for the prediction loss, the true label for the
// filled-trajectory form).
double sparse_forward(const TransformerParams& params, const Prompt& prompt,
                      double y0_corner, Work& w, bool keep_p) {
  const int d = params.d;
  const int n = static_cast<int>(prompt.y.size());
  const int k = params.depth();
  const double c = 1.0 / n;
  w.Y.resize(n + 1);
  w.Y.head(n) = prompt.y;
  w.Y[n] = y0_corner;
  if (keep_p) w.Pstore.resize(d, k);
  Eigen::VectorXd& q = w.q;
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd p = prompt.X.leftCols(n) * w.Y.head(n);
    q.noalias() = params.sparse[i].A * p;
    w.Y.noalias() += c * (prompt.X.transpose() * q);
    if (keep_p) w.Pstore.col(i) = p;
  }
  return w.Y[n];
}

double sparse_loss_grad(const TransformerParams& params, const Prompt& prompt,
                        GradientBundle& grad, Work& w) {
  const int n = static_cast<int>(prompt.y.size());
  const int k = params.depth();
  const double c = 1.0 / n;
  const double e = sparse_forward(params, prompt, 0.0, w, true) + prompt.y_query;
  w.g.setZero(n + 1);
  w.g[n] = 2.0 * e;
  for (int i = k - 1; i >= 0; --i) {
    w.dq.noalias() = c * (prompt.X * w.g);
    grad.dA[i].noalias() += w.Pstore.col(i) * w.dq.transpose();
    w.dp.noalias() = params.sparse[i].A * w.dq;
    w.g.head(n).noalias() += prompt.X.leftCols(n).transpose() * w.dp;
  }
  return e * e;
}

double gdpp_forward(const TransformerParams& params, const Prompt& prompt,
                    double y0_corner, Work& w, bool keep) {
  const int n = static_cast<int>(prompt.y.size());
  const int k = params.depth();
  const double c = 1.0 / n;
  Eigen::MatrixXd X = prompt.X;
  w.Y.resize(n + 1);
  w.Y.head(n) = prompt.y;
  w.Y[n] = y0_corner;
  if (keep) {
    w.Xs.assign(k, Eigen::MatrixXd());
    w.Ys.assign(k, Eigen::VectorXd());
    w.Ws.assign(k, Eigen::MatrixXd());
    w.Cs.assign(k, Eigen::MatrixXd());
    w.ps.assign(k, Eigen::VectorXd());
    w.qs.assign(k, Eigen::VectorXd());
  }
  for (int i = 0; i < k; ++i) {
    const Eigen::MatrixXd& A = params.gdpp[i].A;
    const Eigen::MatrixXd& B = params.gdpp[i].B;
    Eigen::VectorXd p = X.leftCols(n) * w.Y.head(n);
    Eigen::VectorXd q = A * p;
    Eigen::MatrixXd W = X.leftCols(n) * X.leftCols(n).transpose();
    Eigen::MatrixXd C = B * W * A;
    if (keep) {
      w.Xs[i] = X;
      w.Ys[i] = w.Y;
      w.Ws[i] = W;
      w.Cs[i] = C;
      w.ps[i] = p;
      w.qs[i] = q;
    }
    w.Y.noalias() += c * (X.transpose() * q);
    X += c * C * X;
  }
  return w.Y[n];
}

double gdpp_loss_grad(const TransformerParams& params, const Prompt& prompt,
                      GradientBundle& grad, Work& w) {
  const int d = params.d;
  const int n = static_cast<int>(prompt.y.size());
  const int k = params.depth();
  const double c = 1.0 / n;
  const double e = gdpp_forward(params, prompt, 0.0, w, true) + prompt.y_query;
  Eigen::VectorXd gY = Eigen::VectorXd::Zero(n + 1);
  gY[n] = 2.0 * e;
  Eigen::MatrixXd gX = Eigen::MatrixXd::Zero(d, n + 1);
  for (int i = k - 1; i >= 0; --i) {
    const Eigen::MatrixXd& A = params.gdpp[i].A;
    const Eigen::MatrixXd& B = params.gdpp[i].B;
    const Eigen::MatrixXd& X = w.Xs[i];
    // Label-path adjoints: Y' = Y + c q^T X with q = A (Xm Y).
    Eigen::VectorXd dq = c * (X * gY);
    grad.dA[i].noalias() += dq * w.ps[i].transpose();
    Eigen::VectorXd dp = A * dq;
    Eigen::VectorXd gYprev = gY;
    gYprev.head(n).noalias() += X.leftCols(n).transpose() * dp;
    Eigen::MatrixXd gXprev = gX;
    gXprev.noalias() += c * w.qs[i] * gY.transpose();
    gXprev.leftCols(n).noalias() += dp * w.Ys[i].head(n).transpose();
    // Covariate-path adjoints: X' = X + c (B W A) X with W = Xm X^T.
    Eigen::MatrixXd dC = c * gX * X.transpose();
    gXprev.noalias() += c * w.Cs[i].transpose() * gX;
    grad.dB[i].noalias() += dC * A.transpose() * w.Ws[i].transpose();
    grad.dA[i].noalias() += w.Ws[i].transpose() * B.transpose() * dC;
    Eigen::MatrixXd dW = B.transpose() * dC * A.transpose();
    gXprev.leftCols(n).noalias() += ((dW + dW.transpose()) * X).leftCols(n);
    gY = std::move(gYprev);
    gX = std::move(gXprev);
  }
  return e * e;
}

double full_forward(const TransformerParams& params, const Prompt& prompt,
                    double y0_corner, Work& w, bool keep) {
  const int d = params.d;
  const int n = static_cast<int>(prompt.y.size());
  const int k = params.depth();
  const double c = 1.0 / n;
  Eigen::MatrixXd Z(d + 1, n + 1);
  Z.topRows(d) = prompt.X;
  Z.row(d).head(n) = prompt.y.transpose();
  Z(d, n) = y0_corner;
  if (keep) {
    w.Zs.assign(k, Eigen::MatrixXd());
    w.Cf.assign(k, Eigen::MatrixXd());
    w.Af.assign(k, Eigen::MatrixXd());
  }
  for (int i = 0; i < k; ++i) {
    Eigen::MatrixXd C = Z.leftCols(n) * Z.leftCols(n).transpose();
    // Zm Z^T only sees the context columns, so C doubles as the masked Gram.
    Eigen::MatrixXd Ap = params.full[i].P * C * params.full[i].Q;
    if (keep) {
      w.Zs[i] = Z;
      w.Cf[i] = C;
      w.Af[i] = Ap;
    }
    Z += c * Ap * Z;
  }
  return Z(d, n);
}

double full_loss_grad(const TransformerParams& params, const Prompt& prompt,
                      GradientBundle& grad, Work& w) {
  const int d = params.d;
  const int n = static_cast<int>(prompt.y.size());
  const int k = params.depth();
  const double c = 1.0 / n;
  const double e = full_forward(params, prompt, 0.0, w, true) + prompt.y_query;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d + 1, n + 1);
  G(d, n) = 2.0 * e;
  for (int i = k - 1; i >= 0; --i) {
    const Eigen::MatrixXd& Z = w.Zs[i];
    const Eigen::MatrixXd& C = w.Cf[i];
    const Eigen::MatrixXd& P = params.full[i].P;
    const Eigen::MatrixXd& Q = params.full[i].Q;
    Eigen::MatrixXd dAp = c * G * Z.transpose();
    Eigen::MatrixXd Gprev = G + c * w.Af[i].transpose() * G;
    grad.dP[i].noalias() += dAp * Q.transpose() * C.transpose();
    grad.dQ[i].noalias() += C.transpose() * P.transpose() * dAp;
    Eigen::MatrixXd dCmat = P.transpose() * dAp * Q.transpose();
    Gprev.leftCols(n).noalias() +=
        ((dCmat + dCmat.transpose()) * Z).leftCols(n);
    G = std::move(Gprev);
  }
  return e * e;
}

void check_prompt(const TransformerParams& params, const Prompt& prompt) {
  if (prompt.X.rows() != params.d)
    throw ValidationError("loss: prompt/parameter dimension mismatch");
}

}  // namespace

double per_prompt_sq_error(const TransformerParams& params, const Prompt& prompt) {
  check_prompt(params, prompt);
  Work w;
  double corner = 0.0;
  switch (params.variant) {
    case Variant::Sparse: corner = sparse_forward(params, prompt, 0.0, w, false); break;
    case Variant::GDPP: corner = gdpp_forward(params, prompt, 0.0, w, false); break;
    case Variant::Full: corner = full_forward(params, prompt, 0.0, w, false); break;
  }
  const double e = corner + prompt.y_query;
  return e * e;
}

double trace_form_loss(const TransformerParams& params, const Prompt& prompt) {
  check_prompt(params, prompt);
  Work w;
  double corner = 0.0;
  switch (params.variant) {
    case Variant::Sparse:
      corner = sparse_forward(params, prompt, prompt.y_query, w, false);
      break;
    case Variant::GDPP:
      corner = gdpp_forward(params, prompt, prompt.y_query, w, false);
      break;
    case Variant::Full:
      corner = full_forward(params, prompt, prompt.y_query, w, false);
      break;
  }
  return corner * corner;
}

double per_prompt_loss_grad(const TransformerParams& params, const Prompt& prompt,
                            GradientBundle& grad) {
  check_prompt(params, prompt);
  Work w;
  double loss = 0.0;
  switch (params.variant) {
    case Variant::Sparse: loss = sparse_loss_grad(params, prompt, grad, w); break;
    case Variant::GDPP: loss = gdpp_loss_grad(params, prompt, grad, w); break;
    case Variant::Full: loss = full_loss_grad(params, prompt, grad, w); break;
  }
  if (params.variant != Variant::Full)
    for (auto& m : grad.dA) m = 0.5 * (m + m.transpose()).eval();
  return loss;
}

namespace {

struct Partial {
  double loss = 0.0;
  GradientBundle grad;
  bool with_grad = false;
};

double batch_eval(const TransformerParams& params, const Batch& batch,
                  GradientBundle* grad_out) {
  if (batch.prompts.empty()) throw ValidationError("loss: empty batch");
  const std::size_t count = batch.prompts.size();
  const std::size_t n_chunks = (count + kDefaultChunk - 1) / kDefaultChunk;
  std::vector<Partial> parts(n_chunks);
  for_each_chunk(count, kDefaultChunk,
                 [&](std::size_t ci, std::size_t begin, std::size_t end) {
                   Partial& part = parts[ci];
                   Work w;
                   if (grad_out) {
                     part.grad = GradientBundle::zeros_like(params);
                     part.with_grad = true;
                   }
                   for (std::size_t i = begin; i < end; ++i) {
                     const Prompt& prompt = batch.prompts[i];
                     switch (params.variant) {
                       case Variant::Sparse:
                         part.loss += grad_out
                                          ? sparse_loss_grad(params, prompt, part.grad, w)
                                          : [&] {
                                              const double corner = sparse_forward(
                                                  params, prompt, 0.0, w, false);
                                              const double e = corner + prompt.y_query;
                                              return e * e;
                                            }();
                         break;
                       case Variant::GDPP:
                         part.loss += grad_out
                                          ? gdpp_loss_grad(params, prompt, part.grad, w)
                                          : [&] {
                                              const double corner = gdpp_forward(
                                                  params, prompt, 0.0, w, false);
                                              const double e = corner + prompt.y_query;
                                              return e * e;
                                            }();
                         break;
                       case Variant::Full:
                         part.loss += grad_out
                                          ? full_loss_grad(params, prompt, part.grad, w)
                                          : [&] {
                                              const double corner = full_forward(
                                                  params, prompt, 0.0, w, false);
                                              const double e = corner + prompt.y_query;
                                              return e * e;
                                            }();
                         break;
                     }
                   }
                 });
  Partial total = combine_tree(parts, [](Partial& dst, const Partial& src) {
    dst.loss += src.loss;
    if (dst.with_grad) dst.grad.axpy(1.0, src.grad);
  });
  const double inv = 1.0 / static_cast<double>(count);
  if (grad_out) {
    total.grad.scale(inv);
    if (params.variant != Variant::Full) {
      // A lives on the symmetric subspace; project the raw adjoint onto it.
      for (auto& m : total.grad.dA) m = 0.5 * (m + m.transpose()).eval();
    }
    *grad_out = std::move(total.grad);
  }
  return total.loss * inv;
}

}  // namespace

double mc_loss(const TransformerParams& params, const Batch& batch) {
  return batch_eval(params, batch, nullptr);
}

double loss_and_grad(const TransformerParams& params, const Batch& batch,
                     GradientBundle& grad) {
  return batch_eval(params, batch, &grad);
}

SingleLayerParams single_layer_reduce(const FullLayer& layer) {
  const int d = static_cast<int>(layer.P.rows()) - 1;
  SingleLayerParams slp;
  slp.b = layer.P.row(d).transpose();
  slp.A = layer.Q.leftCols(d);
  return slp;
}

double single_layer_per_prompt(const SingleLayerParams& slp, const Prompt& prompt) {
  const int d = static_cast<int>(prompt.X.rows());
  const int n = static_cast<int>(prompt.y.size());
  Eigen::MatrixXd Zc(d + 1, n);
  Zc.topRows(d) = prompt.X.leftCols(n);
  Zc.row(d) = prompt.y.transpose();
  Eigen::MatrixXd C = (Zc * Zc.transpose()) / n;
  const double r = slp.b.dot(C * slp.A * prompt.X.col(n)) +
                   prompt.w_star.dot(prompt.X.col(n));
  return r * r;
}

double single_layer_loss(const SingleLayerParams& slp, const Batch& batch) {
  if (batch.prompts.empty()) throw ValidationError("single_layer_loss: empty batch");
  double s = 0.0;
  for (const auto& p : batch.prompts) s += single_layer_per_prompt(slp, p);
  return s / static_cast<double>(batch.prompts.size());
}

double single_layer_per_prompt_grad(const SingleLayerParams& slp, const Prompt& prompt,
                                    Eigen::VectorXd& db, Eigen::MatrixXd& dA) {
  const int d = static_cast<int>(prompt.X.rows());
  const int n = static_cast<int>(prompt.y.size());
  Eigen::MatrixXd Zc(d + 1, n);
  Zc.topRows(d) = prompt.X.leftCols(n);
  Zc.row(d) = prompt.y.transpose();
  Eigen::MatrixXd C = (Zc * Zc.transpose()) / n;
  const Eigen::VectorXd xq = prompt.X.col(n);
  const Eigen::VectorXd Axq = slp.A * xq;
  const double r = slp.b.dot(C * Axq) + prompt.w_star.dot(xq);
  db.noalias() += 2.0 * r * (C * Axq);
  dA.noalias() += 2.0 * r * (C * slp.b) * xq.transpose();
  return r * r;
}

}  // namespace icl
