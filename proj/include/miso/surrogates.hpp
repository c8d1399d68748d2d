#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>

#include "miso/linalg.hpp"
#include "miso/terms.hpp"

namespace miso {

// First-order surrogate constructors. Every family is represented
// intensionally (anchor + cached constants) and exposes either a closed-form
// minimizer step or a cheap evaluator; the solvers only ever need those.

enum class SurrogateFamily {
  lipschitz_gradient,
  proximal_gradient,
  dc_linearized,
  quadratic,
  jensen,
  huber_variational,
};

// Declared class of a constructed surrogate: the error h = g - f is L-smooth,
// g is rho-strongly convex (rho = 0 when no claim is made).
struct SurrogateSpec {
  SurrogateFamily family;
  ParamVector kappa;
  double L = 0.0;
  double rho = 0.0;
  bool majorizing = true;
};

using GradFn = std::function<ParamVector(const ParamVector&)>;
using ValueFn = std::function<double(const ParamVector&)>;

// kappa - (1/L) grad f(kappa); minimizer of the gradient surrogate, class
// S_{2L,L}(f, kappa).
inline ParamVector lipschitz_gradient_step(const GradFn& f_grad, const ParamVector& kappa,
                                           double L) {
  if (L <= 0.0) throw std::invalid_argument("lipschitz_gradient_step: L must be positive");
  ParamVector g = f_grad(kappa);
  if (!all_finite(g)) throw std::runtime_error("lipschitz_gradient_step: non-finite gradient");
  return kappa - g / L;
}

// prox(penalty, kappa - (1/L) grad f1(kappa), 1/L); class S_{L,L}(f, kappa)
// when f1 is convex.
inline ParamVector proximal_gradient_step(const GradFn& f1_grad, const ParamVector& kappa,
                                          double L, const PenaltyTerm& penalty) {
  if (L <= 0.0) throw std::invalid_argument("proximal_gradient_step: L must be positive");
  if (!penalty.convex())
    throw std::invalid_argument("proximal_gradient_step: penalty must be convex");
  ParamVector g = f1_grad(kappa);
  if (!all_finite(g)) throw std::runtime_error("proximal_gradient_step: non-finite gradient");
  return prox(penalty, kappa - g / L, 1.0 / L);
}

// Majorizer of f1 + log_penalty obtained by linearizing the concave penalty
// at kappa: f1(theta) + sum_j w_j |theta_j| + constant, tight at kappa.
struct DcSurrogate {
  ValueFn f1;
  ParamVector weights;
  double constant = 0.0;

  double value(const ParamVector& theta) const {
    double s = constant + f1(theta);
    for (Index j = 0; j < theta.size(); ++j) s += weights[j] * std::abs(theta[j]);
    return s;
  }
};

inline DcSurrogate dc_majorizer(ValueFn f1, const PenaltyTerm& penalty, const ParamVector& kappa) {
  if (penalty.kind != PenaltyKind::log_penalty)
    throw std::invalid_argument("dc_majorizer: penalty must be log_penalty");
  DcSurrogate g;
  g.f1 = std::move(f1);
  g.weights = reweighted_l1_weights(penalty.lambda, penalty.epsilon, kappa);
  double anchored = 0.0;
  for (Index j = 0; j < kappa.size(); ++j) anchored += g.weights[j] * std::abs(kappa[j]);
  g.constant = penalty.value(kappa) - anchored;
  return g;
}

// ---------------------------------------------------------------------------
// Quadratic surrogates g(theta) = f(k) + grad'(theta-k) + 1/2 (theta-k)' H (theta-k)
// ---------------------------------------------------------------------------

struct QuadraticModel {
  Eigen::MatrixXd H;
  ParamVector kappa;
  ParamVector grad;
  double value = 0.0;
};

struct Box {
  ParamVector lo, hi;
};

inline ParamVector quadratic_step(const QuadraticModel& model,
                                  const std::optional<Box>& constraint = std::nullopt) {
  const Index p = model.kappa.size();
  if (model.H.rows() != p || model.H.cols() != p)
    throw std::invalid_argument("quadratic_step: H dimension mismatch");
  if (!model.H.isApprox(model.H.transpose(), 1e-12))
    throw std::invalid_argument("quadratic_step: H must be symmetric");
  if (!constraint) {
    Eigen::LLT<Eigen::MatrixXd> llt(model.H);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("quadratic_step: H is not positive definite");
    return model.kappa - llt.solve(model.grad);
  }
  for (Index j = 0; j < p; ++j) {
    if (model.H(j, j) <= 0.0)
      throw std::runtime_error("quadratic_step: H is not positive definite");
    if (constraint->lo[j] > constraint->hi[j])
      throw std::invalid_argument("quadratic_step: empty box");
  }
  // Projected cyclic coordinate descent on the box-constrained quadratic.
  ParamVector theta = model.kappa;
  for (Index j = 0; j < p; ++j) theta[j] = std::clamp(theta[j], constraint->lo[j], constraint->hi[j]);
  ParamVector residual = model.grad + model.H * (theta - model.kappa);
  for (int sweep = 0; sweep < 10000; ++sweep) {
    double max_move = 0.0;
    for (Index j = 0; j < p; ++j) {
      const double target = std::clamp(theta[j] - residual[j] / model.H(j, j),
                                       constraint->lo[j], constraint->hi[j]);
      const double move = target - theta[j];
      if (move != 0.0) {
        theta[j] = target;
        residual += move * model.H.col(j);
      }
      max_move = std::max(max_move, std::abs(move));
    }
    if (max_move < 1e-14) break;
  }
  return theta;
}

// ---------------------------------------------------------------------------
// Jensen surrogates for theta -> f(x' theta), f scalar convex and L-smooth
// ---------------------------------------------------------------------------

struct JensenSurrogate {
  std::function<double(double)> f_scalar;
  ParamVector weights;  // zero off the support of x
  ParamVector x, kappa;
  double anchor_margin = 0.0;  // x' kappa
  double lipschitz = 0.0;      // L' of the separable surrogate

  double value(const ParamVector& theta) const {
    double s = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
      if (weights[i] == 0.0) continue;
      s += weights[i] * f_scalar(x[i] / weights[i] * (theta[i] - kappa[i]) + anchor_margin);
    }
    return s;
  }
};

inline JensenSurrogate jensen_surrogate(std::function<double(double)> f_scalar, double L_scalar,
                                        const ParamVector& x, int nu, const ParamVector& kappa) {
  check_same_dim(x.size(), kappa.size(), "jensen_surrogate");
  if (nu < 0 || nu > 2) throw std::invalid_argument("jensen_surrogate: nu must be 0, 1 or 2");
  JensenSurrogate g;
  g.f_scalar = std::move(f_scalar);
  g.x = x;
  g.kappa = kappa;
  g.anchor_margin = dot(x, kappa);
  g.weights = ParamVector::Zero(x.size());

  const double linf = x.lpNorm<Eigen::Infinity>();
  if (linf == 0.0) throw std::invalid_argument("jensen_surrogate: x must be nonzero");
  Index support = 0;
  for (Index i = 0; i < x.size(); ++i)
    if (x[i] != 0.0) ++support;

  switch (nu) {
    case 0:
      for (Index i = 0; i < x.size(); ++i)
        if (x[i] != 0.0) g.weights[i] = 1.0 / static_cast<double>(support);
      g.lipschitz = L_scalar * linf * linf * static_cast<double>(support);
      break;
    case 1: {
      const double l1 = x.lpNorm<1>();
      for (Index i = 0; i < x.size(); ++i) g.weights[i] = std::abs(x[i]) / l1;
      g.lipschitz = L_scalar * linf * l1;
      break;
    }
    default: {
      const double sq = x.squaredNorm();
      for (Index i = 0; i < x.size(); ++i) g.weights[i] = x[i] * x[i] / sq;
      g.lipschitz = L_scalar * sq;
      break;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Variational Huber surrogate: one reweighted least-squares step
// ---------------------------------------------------------------------------

// Minimizes 1/2 sum_i [ (y_i - x_i' theta)^2 / w_i + w_i ] with the optimal
// weights w_i = max(|y_i - x_i' kappa|, delta).
inline ParamVector huber_irls_step(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   double delta, const ParamVector& kappa) {
  check_same_dim(X.cols(), kappa.size(), "huber_irls_step");
  check_same_dim(X.rows(), y.size(), "huber_irls_step labels");
  const Index m = X.rows(), p = X.cols();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  ParamVector b = ParamVector::Zero(p);
  for (Index i = 0; i < m; ++i) {
    const double w = huber_optimal_weight(delta, y[i] - X.row(i).dot(kappa));
    A += X.row(i).transpose() * X.row(i) / w;
    b += X.row(i).transpose() * y[i] / w;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("huber_irls_step: singular weighted normal equations");
  return llt.solve(b);
}

// ---------------------------------------------------------------------------
// Numeric verification of the surrogate contract
// ---------------------------------------------------------------------------

struct SurrogateCheckReport {
  int majorization_violations = 0;
  double worst_violation = 0.0;  // max over samples of f - g
  double tightness_gap = 0.0;    // |g(kappa) - f(kappa)|
  double grad_gap = 0.0;         // finite-difference ||grad h(kappa)||
  double grad_scale = 0.0;       // finite-difference ||grad f(kappa)||
  double smoothness_ratio = 0.0; // max |h| / (1/2 ||theta-kappa||^2)
  double L_declared = 0.0;

  bool majorizing_ok = true;
  bool tightness_ok = true;
  bool gradient_ok = true;
  bool smoothness_ok = true;

  bool ok() const { return majorizing_ok && tightness_ok && gradient_ok && smoothness_ok; }
};

struct SurrogateCheckOptions {
  int n_samples = 1000;
  double radius = 0.0;  // 0: use 10 (1 + ||kappa||)
  std::uint64_t seed = 12345;
  bool expect_majorizing = true;
  double majorization_slack = 1e-10;
  double tightness_tol = 1e-12;
  double smoothness_headroom = 1e-6;
};

inline SurrogateCheckReport check_surrogate(const ValueFn& f, const ValueFn& g,
                                            const ParamVector& kappa, double L_declared,
                                            const SurrogateCheckOptions& opts = {}) {
  SurrogateCheckReport report;
  report.L_declared = L_declared;
  const Index p = kappa.size();
  const double radius = opts.radius > 0.0 ? opts.radius : 10.0 * (1.0 + kappa.norm());

  report.tightness_gap = std::abs(g(kappa) - f(kappa));
  report.tightness_ok = report.tightness_gap <= opts.tightness_tol;

  // Central finite differences of h = g - f and of f at the anchor.
  ParamVector grad_h(p), grad_f(p);
  for (Index j = 0; j < p; ++j) {
    const double step = 1e-5 * (1.0 + std::abs(kappa[j]));
    ParamVector hi = kappa, lo = kappa;
    hi[j] += step;
    lo[j] -= step;
    const double f_hi = f(hi), f_lo = f(lo);
    grad_f[j] = (f_hi - f_lo) / (2.0 * step);
    grad_h[j] = ((g(hi) - f_hi) - (g(lo) - f_lo)) / (2.0 * step);
  }
  report.grad_gap = grad_h.norm();
  report.grad_scale = grad_f.norm();
  report.gradient_ok = report.grad_gap <= 1e-5 * (1.0 + report.grad_scale);

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  report.worst_violation = -std::numeric_limits<double>::infinity();
  const double dist_cutoff = 1e-8 * (1.0 + kappa.norm());
  for (int s = 0; s < opts.n_samples; ++s) {
    ParamVector dir(p);
    for (Index j = 0; j < p; ++j) dir[j] = gauss(rng);
    const double nrm = dir.norm();
    if (nrm == 0.0) continue;
    const double r = radius * std::pow(unit(rng), 1.0 / static_cast<double>(p));
    ParamVector theta = kappa + (r / nrm) * dir;
    const double fv = f(theta), gv = g(theta);
    const double h = gv - fv;
    report.worst_violation = std::max(report.worst_violation, fv - gv);
    if (opts.expect_majorizing && fv - gv > opts.majorization_slack)
      ++report.majorization_violations;
    const double d2 = (theta - kappa).squaredNorm();
    if (std::sqrt(d2) >= dist_cutoff)
      report.smoothness_ratio = std::max(report.smoothness_ratio, std::abs(h) / (0.5 * d2));
  }
  report.majorizing_ok = !opts.expect_majorizing || report.majorization_violations == 0;
  report.smoothness_ok = report.smoothness_ratio <= L_declared * (1.0 + opts.smoothness_headroom);
  return report;
}

}  // namespace miso
