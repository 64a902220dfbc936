#include "optim.hpp"

#include <cmath>
#include <deque>

#include "errors.hpp"

namespace icl {
namespace {

struct LineSearchResult {
  double alpha = 0.0;
  double loss = 0.0;
  bool ok = false;
};

// Strong Wolfe line search: bracketing walk plus bisection zoom. phi(a) is the
// objective along x + a*p; x_try/g_try return the last evaluated point.
LineSearchResult strong_wolfe(const Objective& objective, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& p, double f0, double dphi0,
                              double c1, double c2, Eigen::VectorXd& x_try,
                              Eigen::VectorXd& g_try) {
  LineSearchResult res;
  auto eval = [&](double a, double& dphi) {
    x_try = x + a * p;
    const double f = objective(x_try, g_try);
    dphi = g_try.dot(p);
    return f;
  };
  auto zoom = [&](double lo, double f_lo, double hi) {
    for (int i = 0; i < 60; ++i) {
      const double a = 0.5 * (lo + hi);
      double dphi = 0.0;
      const double f = eval(a, dphi);
      if (f > f0 + c1 * a * dphi0 || f >= f_lo) {
        hi = a;
      } else {
        if (std::abs(dphi) <= -c2 * dphi0) {
          res = {a, f, true};
          return;
        }
        if (dphi * (hi - lo) >= 0.0) hi = lo;
        lo = a;
        f_lo = f;
      }
    }
  };
  double a_prev = 0.0, f_prev = f0;
  double a = 1.0;
  for (int i = 0; i < 30; ++i) {
    double dphi = 0.0;
    const double f = eval(a, dphi);
    if (f > f0 + c1 * a * dphi0 || (i > 0 && f >= f_prev)) {
      zoom(a_prev, f_prev, a);
      return res;
    }
    if (std::abs(dphi) <= -c2 * dphi0) {
      res = {a, f, true};
      return res;
    }
    if (dphi >= 0.0) {
      zoom(a, f, a_prev);
      return res;
    }
    a_prev = a;
    f_prev = f;
    a *= 2.0;
  }
  return res;
}

OptimResult lbfgs(const Objective& objective, Eigen::VectorXd x,
                  const OptimizerConfig& config, const StepObserver& observer) {
  const int dim = static_cast<int>(x.size());
  Eigen::VectorXd g(dim), x_try(dim), g_try(dim);
  double f = objective(x, g);
  if (observer) observer(0, x, f);
  std::deque<Eigen::VectorXd> S, Y;
  std::deque<double> rho;
  OptimResult res;
  res.line_search_failed = false;
  int iter = 0;
  for (; iter < config.max_iters; ++iter) {
    if (g.norm() <= config.grad_tol) break;
    // Two-loop recursion for the quasi-Newton direction.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      alpha[i] = rho[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    if (!S.empty()) {
      const double gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
      q *= gamma;
    }
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double beta = rho[i] * Y[i].dot(q);
      q += (alpha[i] - beta) * S[i];
    }
    Eigen::VectorXd p = -q;
    double dphi0 = g.dot(p);
    if (!(dphi0 < 0.0)) {
      // Curvature history went bad; fall back to steepest descent.
      p = -g;
      dphi0 = -g.squaredNorm();
      S.clear();
      Y.clear();
      rho.clear();
    }
    LineSearchResult ls = strong_wolfe(objective, x, p, f, dphi0, config.c1,
                                       config.c2, x_try, g_try);
    if (!ls.ok) {
      res.line_search_failed = true;
      break;
    }
    Eigen::VectorXd s = x_try - x;
    Eigen::VectorXd yv = g_try - g;
    const double sy = s.dot(yv);
    if (sy > 1e-16 * s.norm() * yv.norm()) {
      S.push_back(std::move(s));
      Y.push_back(std::move(yv));
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > config.memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    const double f_prev = f;
    x = x_try;
    g = g_try;
    f = ls.loss;
    if (observer) observer(iter + 1, x, f);
    if (config.loss_tol > 0.0 &&
        f_prev - f <= config.loss_tol * std::max(1.0, std::abs(f_prev)))
      break;
  }
  res.x = std::move(x);
  res.loss = f;
  res.grad_norm = g.norm();
  res.iters = iter;
  return res;
}

OptimResult gd_backtracking(const Objective& objective, Eigen::VectorXd x,
                            const OptimizerConfig& config,
                            const StepObserver& observer) {
  const int dim = static_cast<int>(x.size());
  Eigen::VectorXd g(dim), x_try(dim), g_try(dim);
  double f = objective(x, g);
  if (observer) observer(0, x, f);
  OptimResult res;
  double step = 1.0;
  int iter = 0;
  for (; iter < config.max_iters; ++iter) {
    const double gsq = g.squaredNorm();
    if (std::sqrt(gsq) <= config.grad_tol) break;
    bool accepted = false;
    double f_try = 0.0;
    for (int halvings = 0; halvings < 60; ++halvings) {
      x_try = x - step * g;
      f_try = objective(x_try, g_try);
      if (std::isfinite(f_try) && f_try <= f - config.c1 * step * gsq) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }
    const double f_prev = f;
    x = x_try;
    g = g_try;
    f = f_try;
    step *= 2.0;
    if (observer) observer(iter + 1, x, f);
    if (config.loss_tol > 0.0 &&
        f_prev - f <= config.loss_tol * std::max(1.0, std::abs(f_prev)))
      break;
  }
  res.x = std::move(x);
  res.loss = f;
  res.grad_norm = g.norm();
  res.iters = iter;
  return res;
}

}  // namespace

OptimResult minimize(const Objective& objective, Eigen::VectorXd x0,
                     const OptimizerConfig& config, const StepObserver& observer) {
  if (x0.size() == 0) throw ValidationError("minimize: empty parameter vector");
  if (config.memory < 1 || config.grad_tol <= 0.0)
    throw ValidationError("minimize: bad optimizer configuration");
  if (config.method == OptimizerConfig::Method::QuasiNewton)
    return lbfgs(objective, std::move(x0), config, observer);
  return gd_backtracking(objective, std::move(x0), config, observer);
}

}  // namespace icl
