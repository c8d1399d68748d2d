#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "miso/dataset.hpp"
#include "miso/linalg.hpp"
#include "miso/terms.hpp"

namespace miso {

struct DualityGapResult {
  double primal = 0.0;
  double dual = 0.0;
  double relative = 0.0;
};

class LogisticCompositeView;

// l2-regularized logistic regression. Components carry the regularizer, so
// each f^t(theta) = log(1 + exp(-y_t x_t' theta)) + (lambda/2) ||theta||^2 is
// lambda-strongly convex and the penalty slot stays empty; composite() gives
// the split view (plain losses + l2 penalty) instead.
class LogisticL2Problem {
 public:
  LogisticL2Problem(Dataset data, double lambda) : data_(std::move(data)), lambda_(lambda) {
    if (lambda_ <= 0.0) throw std::invalid_argument("LogisticL2Problem: lambda must be positive");
  }

  Index T() const { return data_.rows(); }
  Index dim() const { return data_.cols(); }
  double lambda() const { return lambda_; }
  double mu() const { return lambda_; }
  const Dataset& data() const { return data_; }
  const PenaltyTerm& penalty() const { return penalty_; }

  double margin(Index t, const ParamVector& theta) const { return data_.row_dot(t, theta); }
  double label(Index t) const { return data_.label(t); }
  void add_row(Index t, double coef, ParamVector& theta) const { data_.row_axpy(t, coef, theta); }
  double loss_at(Index t, double margin) const {
    return loss_value(LossKind::logistic, data_.label(t), margin);
  }
  double loss_derivative_at(Index t, double margin) const {
    return loss_derivative(LossKind::logistic, data_.label(t), margin);
  }

  double component_value(Index t, const ParamVector& theta) const {
    return loss_at(t, margin(t, theta)) + 0.5 * lambda_ * theta.squaredNorm();
  }

  // Value and gradient of one component from a single margin evaluation.
  double component_eval(Index t, const ParamVector& theta, ParamVector& grad) const {
    const double m = margin(t, theta);
    const double d = loss_derivative_at(t, m);
    grad = lambda_ * theta;
    data_.row_axpy(t, d, grad);
    return loss_at(t, m) + 0.5 * lambda_ * theta.squaredNorm();
  }

  double component_lipschitz(Index t) const {
    return example_lipschitz_bound(LossKind::logistic, data_.row_sqnorm(t)) + lambda_;
  }

  double objective(const ParamVector& theta) const {
    check_same_dim(dim(), theta.size(), "objective");
    double s = 0.0;
    for (Index t = 0; t < T(); ++t) s += loss_at(t, margin(t, theta));
    return s / static_cast<double>(T()) + 0.5 * lambda_ * theta.squaredNorm();
  }

  ParamVector full_smooth_gradient(const ParamVector& theta) const {
    check_same_dim(dim(), theta.size(), "full_smooth_gradient");
    ParamVector g = ParamVector::Zero(dim());
    for (Index t = 0; t < T(); ++t)
      data_.row_axpy(t, loss_derivative_at(t, margin(t, theta)), g);
    g /= static_cast<double>(T());
    g += lambda_ * theta;
    return g;
  }

  // Fenchel certificate: the dual point alpha_t, minus the loss derivative in
  // the classification margin y_t x_t' theta, lies in (0,1); the dual value is
  // the negative entropy sum minus the squared norm of the induced
  // primal-dual residual direction.
  DualityGapResult duality_gap(const ParamVector& theta) const {
    const Index n = T();
    const double invT = 1.0 / static_cast<double>(n);
    double entropy = 0.0;
    ParamVector v = ParamVector::Zero(dim());
    for (Index t = 0; t < n; ++t) {
      double alpha = -data_.label(t) * loss_derivative_at(t, margin(t, theta));
      alpha = std::clamp(alpha, 1e-12, 1.0 - 1e-12);
      entropy += alpha * std::log(alpha) + (1.0 - alpha) * std::log1p(-alpha);
      data_.row_axpy(t, alpha * data_.label(t), v);
    }
    v *= invT;
    DualityGapResult out;
    out.primal = objective(theta);
    out.dual = -invT * entropy - v.squaredNorm() / (2.0 * lambda_);
    out.relative = (out.primal - out.dual) / std::abs(out.dual);
    return out;
  }

  LogisticCompositeView composite() const;

 private:
  Dataset data_;
  double lambda_;
  PenaltyTerm penalty_ = PenaltyTerm::none();
};

// Split view of the same objective: components are the bare losses and the l2
// term lives in the penalty slot (proximal-gradient form).
class LogisticCompositeView {
 public:
  explicit LogisticCompositeView(const LogisticL2Problem& parent)
      : parent_(&parent), penalty_(PenaltyTerm::l2(parent.lambda())) {}

  Index T() const { return parent_->T(); }
  Index dim() const { return parent_->dim(); }
  const PenaltyTerm& penalty() const { return penalty_; }

  double component_value(Index t, const ParamVector& theta) const {
    return parent_->loss_at(t, parent_->margin(t, theta));
  }

  double component_eval(Index t, const ParamVector& theta, ParamVector& grad) const {
    const double m = parent_->margin(t, theta);
    grad = ParamVector::Zero(dim());
    parent_->add_row(t, parent_->loss_derivative_at(t, m), grad);
    return parent_->loss_at(t, m);
  }

  double component_lipschitz(Index t) const {
    return example_lipschitz_bound(LossKind::logistic, parent_->data().row_sqnorm(t));
  }

  double objective(const ParamVector& theta) const { return parent_->objective(theta); }

  ParamVector full_smooth_gradient(const ParamVector& theta) const {
    ParamVector g = ParamVector::Zero(dim());
    for (Index t = 0; t < T(); ++t)
      parent_->add_row(t, parent_->loss_derivative_at(t, parent_->margin(t, theta)), g);
    return g / static_cast<double>(T());
  }

  DualityGapResult duality_gap(const ParamVector& theta) const {
    return parent_->duality_gap(theta);
  }

 private:
  const LogisticL2Problem* parent_;
  PenaltyTerm penalty_;
};

inline LogisticCompositeView LogisticL2Problem::composite() const {
  return LogisticCompositeView(*this);
}

// Squared loss with the concave log penalty: (1/2T) sum (y_t - x_t' theta)^2
// + lambda sum_j log(|theta_j| + epsilon). Non-convex; handled by majorizing
// the penalty with reweighted l1.
class SparseLogPenaltyProblem {
 public:
  SparseLogPenaltyProblem(Dataset data, double lambda, double epsilon = 0.01)
      : data_(std::move(data)), penalty_(PenaltyTerm::log_penalty(lambda, epsilon)) {
    if (lambda <= 0.0)
      throw std::invalid_argument("SparseLogPenaltyProblem: lambda must be positive");
  }

  Index T() const { return data_.rows(); }
  Index dim() const { return data_.cols(); }
  const Dataset& data() const { return data_; }
  const PenaltyTerm& penalty() const { return penalty_; }
  double lambda() const { return penalty_.lambda; }
  double epsilon() const { return penalty_.epsilon; }

  double component_value(Index t, const ParamVector& theta) const {
    const double r = data_.label(t) - data_.row_dot(t, theta);
    return 0.5 * r * r;
  }

  double component_eval(Index t, const ParamVector& theta, ParamVector& grad) const {
    const double r = data_.label(t) - data_.row_dot(t, theta);
    grad = ParamVector::Zero(dim());
    data_.row_axpy(t, -r, grad);
    return 0.5 * r * r;
  }

  double component_lipschitz(Index t) const {
    return example_lipschitz_bound(LossKind::squared, data_.row_sqnorm(t));
  }

  double objective(const ParamVector& theta) const {
    check_same_dim(dim(), theta.size(), "objective");
    double s = 0.0;
    for (Index t = 0; t < T(); ++t) s += component_value(t, theta);
    return s / static_cast<double>(T()) + penalty_.value(theta);
  }

  ParamVector full_smooth_gradient(const ParamVector& theta) const {
    ParamVector g = ParamVector::Zero(dim());
    for (Index t = 0; t < T(); ++t) {
      const double r = data_.label(t) - data_.row_dot(t, theta);
      data_.row_axpy(t, -r, g);
    }
    return g / static_cast<double>(T());
  }

 private:
  Dataset data_;
  PenaltyTerm penalty_;
};

// Prox-gradient residual at theta given the smooth gradient there. Smooth
// problems reduce to ||grad||; the log penalty is first majorized at theta.
inline double prox_gradient_residual(const ParamVector& theta, const ParamVector& grad1,
                                     const PenaltyTerm& pen, double L_ref) {
  if (L_ref <= 0.0) throw std::invalid_argument("prox_gradient_residual: L_ref must be positive");
  const ParamVector forward = theta - grad1 / L_ref;
  ParamVector candidate;
  if (pen.kind == PenaltyKind::log_penalty) {
    const ParamVector w = reweighted_l1_weights(pen.lambda, pen.epsilon, theta);
    candidate = prox_weighted_l1(forward, w, 1.0 / L_ref);
  } else {
    candidate = prox(pen, forward, 1.0 / L_ref);
  }
  return L_ref * (theta - candidate).norm();
}

template <class Problem>
double stationarity_residual(const Problem& problem, const ParamVector& theta, double L_ref) {
  return prox_gradient_residual(theta, problem.full_smooth_gradient(theta), problem.penalty(),
                                L_ref);
}

// theta_0 = (||y|| / ||X X' y||) X' y
inline ParamVector sparse_init(const Dataset& data) {
  const Index T = data.rows();
  ParamVector v = ParamVector::Zero(data.cols());
  for (Index t = 0; t < T; ++t) data.row_axpy(t, data.label(t), v);
  if (v.norm() == 0.0) throw std::invalid_argument("sparse_init: X' y is zero");
  Eigen::VectorXd u(T);
  for (Index t = 0; t < T; ++t) u[t] = data.row_dot(t, v);
  return (data.labels().norm() / u.norm()) * v;
}

inline Index nnz(const ParamVector& theta, double tol = 1e-12) {
  if (tol < 0.0) throw std::invalid_argument("nnz: tol must be non-negative");
  Index n = 0;
  for (Index j = 0; j < theta.size(); ++j)
    if (std::abs(theta[j]) > tol) ++n;
  return n;
}

}  // namespace miso
