#pragma once

#include <cmath>
#include <stdexcept>

#include "miso/linalg.hpp"

namespace miso {

// ---------------------------------------------------------------------------
// Smooth losses. Scalar losses take the label y and the prediction yhat;
// the Huber loss acts on a residual and carries its own threshold delta.
// ---------------------------------------------------------------------------

enum class LossKind { logistic, squared, huber };

inline double loss_value(LossKind kind, double y, double yhat) {
  switch (kind) {
    case LossKind::logistic: {
      const double z = y * yhat;
      // log(1 + exp(-z)) without overflow on either tail
      return z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
    }
    case LossKind::squared:
      return 0.5 * (y - yhat) * (y - yhat);
    default:
      throw std::invalid_argument("loss_value: huber takes a residual, use huber_value");
  }
}

// d/dyhat of loss_value
inline double loss_derivative(LossKind kind, double y, double yhat) {
  switch (kind) {
    case LossKind::logistic: {
      const double z = y * yhat;
      if (z >= 0.0) {
        const double e = std::exp(-z);
        return -y * e / (1.0 + e);
      }
      return -y / (1.0 + std::exp(z));
    }
    case LossKind::squared:
      return yhat - y;
    default:
      throw std::invalid_argument("loss_derivative: huber takes a residual");
  }
}

inline double huber_value(double delta, double u) {
  if (delta <= 0.0) throw std::invalid_argument("huber_value: delta must be positive");
  const double a = std::abs(u);
  return a <= delta ? u * u / (2.0 * delta) + delta / 2.0 : a;
}

// argmin over w >= delta of (u^2 / w + w) / 2
inline double huber_optimal_weight(double delta, double u) {
  if (delta <= 0.0) throw std::invalid_argument("huber_optimal_weight: delta must be positive");
  return std::max(std::abs(u), delta);
}

// ---------------------------------------------------------------------------
// Penalties
// ---------------------------------------------------------------------------

enum class PenaltyKind { none, l1, l2, log_penalty };

struct PenaltyTerm {
  PenaltyKind kind = PenaltyKind::none;
  double lambda = 0.0;
  double epsilon = 0.0;  // log_penalty only

  static PenaltyTerm none() { return {}; }
  static PenaltyTerm l1(double lambda) { return {PenaltyKind::l1, lambda, 0.0}; }
  static PenaltyTerm l2(double lambda) { return {PenaltyKind::l2, lambda, 0.0}; }
  static PenaltyTerm log_penalty(double lambda, double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("log_penalty: epsilon must be positive");
    return {PenaltyKind::log_penalty, lambda, epsilon};
  }

  bool convex() const { return kind != PenaltyKind::log_penalty; }

  double value(const ParamVector& theta) const {
    switch (kind) {
      case PenaltyKind::none:
        return 0.0;
      case PenaltyKind::l1:
        return lambda * theta.lpNorm<1>();
      case PenaltyKind::l2:
        return 0.5 * lambda * theta.squaredNorm();
      case PenaltyKind::log_penalty: {
        double s = 0.0;
        for (Index j = 0; j < theta.size(); ++j) s += std::log(std::abs(theta[j]) + epsilon);
        return lambda * s;
      }
    }
    return 0.0;
  }
};

// sign(v) * max(|v| - t, 0); exact zero on ties
inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// argmin_x  penalty(x) + ||x - v||^2 / (2 step)
inline ParamVector prox(const PenaltyTerm& pen, const ParamVector& v, double step) {
  if (step <= 0.0) throw std::invalid_argument("prox: step must be positive");
  switch (pen.kind) {
    case PenaltyKind::none:
      return v;
    case PenaltyKind::l1: {
      ParamVector out(v.size());
      const double t = step * pen.lambda;
      for (Index j = 0; j < v.size(); ++j) out[j] = soft_threshold(v[j], t);
      return out;
    }
    case PenaltyKind::l2:
      return v / (1.0 + step * pen.lambda);
    case PenaltyKind::log_penalty:
      throw std::invalid_argument("prox: log_penalty has no closed-form prox; majorize it first");
  }
  return v;
}

inline ParamVector prox_weighted_l1(const ParamVector& v, const ParamVector& weights, double step) {
  check_same_dim(v.size(), weights.size(), "prox_weighted_l1");
  if (step <= 0.0) throw std::invalid_argument("prox_weighted_l1: step must be positive");
  ParamVector out(v.size());
  for (Index j = 0; j < v.size(); ++j) out[j] = soft_threshold(v[j], step * weights[j]);
  return out;
}

// Tangent weights of the log penalty at kappa: lambda / (|kappa_j| + epsilon).
inline ParamVector reweighted_l1_weights(double lambda, double epsilon, const ParamVector& kappa) {
  if (epsilon <= 0.0) throw std::invalid_argument("reweighted_l1_weights: epsilon must be positive");
  ParamVector w(kappa.size());
  for (Index j = 0; j < kappa.size(); ++j) w[j] = lambda / (std::abs(kappa[j]) + epsilon);
  return w;
}

// ---------------------------------------------------------------------------
// Per-example curvature bounds for theta -> loss(y, x' theta)
// ---------------------------------------------------------------------------

inline double example_lipschitz_bound(LossKind kind, double x_sqnorm) {
  switch (kind) {
    case LossKind::logistic:
      return 0.25 * x_sqnorm;
    case LossKind::squared:
      return x_sqnorm;
    default:
      throw std::invalid_argument("example_lipschitz_bound: unsupported loss");
  }
}

inline double example_lipschitz_bound(LossKind kind, const ParamVector& x) {
  return example_lipschitz_bound(kind, x.squaredNorm());
}

inline double example_lipschitz_bound(LossKind kind, const SparseRow& x) {
  return example_lipschitz_bound(kind, x.squared_norm());
}

// Curvature of the variational Huber upper bound with weights clamped at delta.
inline double huber_lipschitz_bound(double delta, double total_sqnorm) {
  if (delta <= 0.0) throw std::invalid_argument("huber_lipschitz_bound: delta must be positive");
  return total_sqnorm / delta;
}

}  // namespace miso
