#pragma once

#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "miso/linalg.hpp"
#include "miso/problems.hpp"
#include "miso/surrogates.hpp"
#include "miso/terms.hpp"

namespace miso {

// Finite-sum problem consumed by the solvers: T smooth components plus a
// penalty slot (possibly empty). Smooth regularizers may be folded into the
// components instead, in which case penalty() is none.
template <class P>
concept ComponentProblem = requires(const P& p, Index t, const ParamVector& v, ParamVector& g) {
  { p.T() } -> std::convertible_to<Index>;
  { p.dim() } -> std::convertible_to<Index>;
  { p.component_value(t, v) } -> std::convertible_to<double>;
  { p.component_eval(t, v, g) } -> std::convertible_to<double>;
  { p.component_lipschitz(t) } -> std::convertible_to<double>;
  { p.penalty() } -> std::convertible_to<PenaltyTerm>;
  { p.objective(v) } -> std::convertible_to<double>;
  { p.full_smooth_gradient(v) } -> std::convertible_to<ParamVector>;
};

// Linear models expose margins and scalar loss derivatives, which is what the
// memory-light MISOmu store needs.
template <class P>
concept LinearModelProblem =
    ComponentProblem<P> && requires(const P& p, Index t, double m, const ParamVector& v,
                                    ParamVector& out) {
      { p.margin(t, v) } -> std::convertible_to<double>;
      { p.loss_at(t, m) } -> std::convertible_to<double>;
      { p.loss_derivative_at(t, m) } -> std::convertible_to<double>;
      { p.mu() } -> std::convertible_to<double>;
      p.add_row(t, m, out);
    };

template <class P>
concept DualCertified = requires(const P& p, const ParamVector& v) {
  { p.duality_gap(v) } -> std::convertible_to<DualityGapResult>;
};

enum class Scheme { batch_mm, miso0, miso1, miso2, miso_mu, sag, sgd_h };

struct SolverConfig {
  Scheme scheme = Scheme::miso0;
  double L0 = 0.0;          // 0: derive from the problem's component bounds
  double mu = 0.0;          // miso_mu; 0: take the problem's own mu
  int minibatch = 1;
  int epochs = 50;
  std::uint64_t seed = 0;
  double eta = 0.05;        // subsample fraction for the L search; also L2 = eta * L1
  bool per_component_L = true;
  int lsearch_kmax = 20;
  int resum_every = 10;     // passes between aggregate re-summations
  double divergence_factor = 1e3;
};

struct TraceRecord {
  double pass_count = 0.0;
  double wall_seconds = 0.0;
  double objective = 0.0;
  std::optional<double> duality_gap;
  double stationarity = 0.0;
  Index nnz = 0;
  // Diagnostic only (not part of the CSV schema): value of the averaged
  // surrogate at the iterate, when the scheme maintains one.
  std::optional<double> surrogate_avg;
};

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Dense per-component surrogate store
//
// Component t holds a quadratic model anchored at kappa^t with curvature L_t:
//   g^t(theta) = cbar_t - L_t z_t' theta + (L_t/2) ||theta||^2,
// where z_t = kappa_t - (1/L_t) grad f^t(kappa_t). The aggregates
// S_w = sum L_t z_t, W = sum L_t and C = sum cbar_t make the minimizer of the
// averaged surrogate an O(p) computation.
// ---------------------------------------------------------------------------

class ComponentState {
 public:
  ComponentState() = default;

  ComponentState(Index T, Index p, Eigen::VectorXd Lt, const ParamVector& theta0)
      : Lt_(std::move(Lt)), grad_buf_(p) {
    if (Lt_.size() != T) throw std::invalid_argument("ComponentState: L vector size mismatch");
    if ((Lt_.array() <= 0.0).any())
      throw std::invalid_argument("ComponentState: component constants must be positive");
    kappa_.assign(T, theta0);
    z_.assign(T, theta0);
    fval_ = Eigen::VectorXd::Zero(T);
    cbar_ = 0.5 * theta0.squaredNorm() * Lt_;
    mon_lin_ = Eigen::VectorXd::Zero(T);
    mon_q_ = Eigen::VectorXd::Zero(T);
    mon_f_ = Eigen::VectorXd::Zero(T);
    resum();
  }

  Index components() const { return static_cast<Index>(kappa_.size()); }
  Index dim() const { return components() ? kappa_[0].size() : 0; }
  double lipschitz(Index t) const { return Lt_[t]; }
  double max_lipschitz() const { return Lt_.maxCoeff(); }
  double weight_sum() const { return W_; }
  const ParamVector& weighted_z_sum() const { return Sw_; }
  const ParamVector& anchor(Index t) const { return kappa_[t]; }
  const ParamVector& step_vector(Index t) const { return z_[t]; }

  bool track_monitor = false;

  // Rebuild component t's surrogate at the new anchor; returns f^t(theta).
  template <ComponentProblem P>
  double refresh(const P& prob, const ParamVector& theta, Index t) {
    const double value = prob.component_eval(t, theta, grad_buf_);
    if (!std::isfinite(value) || !all_finite(grad_buf_))
      throw std::runtime_error("miso: non-finite component evaluation");
    const double L = Lt_[t];
    if (track_monitor) {
      // Value of the outgoing surrogate at theta, split into its linear part
      // and the quadratic distance so the monitor can re-price it at any L.
      const ParamVector diff = theta - kappa_[t];
      mon_lin_[t] = fval_[t] + L * (kappa_[t] - z_[t]).dot(diff);
      mon_q_[t] = diff.squaredNorm();
      mon_f_[t] = value;
    }
    const double cbar_new = value - grad_buf_.dot(theta) + 0.5 * L * theta.squaredNorm();
    Sw_ += L * theta - grad_buf_ - L * z_[t];
    C_ += cbar_new - cbar_[t];
    z_[t] = theta - grad_buf_ / L;
    kappa_[t] = theta;
    fval_[t] = value;
    cbar_[t] = cbar_new;
    return value;
  }

  ParamVector smooth_minimizer() const { return Sw_ / W_; }

  // Minimizer of the averaged surrogate plus a penalty; the log penalty is
  // majorized by weighted l1 at `weight_anchor`.
  ParamVector composite_minimizer(const PenaltyTerm& pen, const ParamVector& weight_anchor) const {
    const double step = static_cast<double>(components()) / W_;
    if (pen.kind == PenaltyKind::log_penalty) {
      const ParamVector w = reweighted_l1_weights(pen.lambda, pen.epsilon, weight_anchor);
      return prox_weighted_l1(Sw_ / W_, w, step);
    }
    return prox(pen, Sw_ / W_, step);
  }

  // (1/T) sum_t g^t(theta), smooth part only.
  double surrogate_smooth_avg(const ParamVector& theta) const {
    return (C_ + 0.5 * W_ * theta.squaredNorm() - Sw_.dot(theta)) /
           static_cast<double>(components());
  }

  double component_surrogate_value(Index t, const ParamVector& theta) const {
    return cbar_[t] - Lt_[t] * z_[t].dot(theta) + 0.5 * Lt_[t] * theta.squaredNorm();
  }

  void resum() {
    const Index T = components();
    Sw_ = ParamVector::Zero(dim());
    for (Index t = 0; t < T; ++t) Sw_ += Lt_[t] * z_[t];
    W_ = Lt_.sum();
    C_ = cbar_.sum();
  }

  // Multiply every component constant by `factor`, rebuilding cached steps so
  // each surrogate keeps its anchor and its gradient there.
  void rescale(double factor) {
    if (factor <= 0.0) throw std::invalid_argument("ComponentState: rescale factor must be positive");
    const Index T = components();
    for (Index t = 0; t < T; ++t) {
      const double L_old = Lt_[t], L_new = L_old * factor;
      const ParamVector grad = L_old * (kappa_[t] - z_[t]);
      z_[t] = kappa_[t] - grad / L_new;
      cbar_[t] = fval_[t] - grad.dot(kappa_[t]) + 0.5 * L_new * kappa_[t].squaredNorm();
      Lt_[t] = L_new;
    }
    resum();
  }

  // Adjust a state whose components fold an l2 term of weight lambda_old to a
  // new weight, exactly, without touching the data (warm restarts).
  void shift_fold_lambda(double dl) {
    if (dl == 0.0) return;
    const Index T = components();
    for (Index t = 0; t < T; ++t) {
      const double L_old = Lt_[t], L_new = L_old + dl;
      if (L_new <= 0.0) throw std::invalid_argument("ComponentState: lambda shift below zero curvature");
      const ParamVector grad = L_old * (kappa_[t] - z_[t]) + dl * kappa_[t];
      fval_[t] += 0.5 * dl * kappa_[t].squaredNorm();
      z_[t] = kappa_[t] - grad / L_new;
      cbar_[t] = fval_[t] - grad.dot(kappa_[t]) + 0.5 * L_new * kappa_[t].squaredNorm();
      Lt_[t] = L_new;
    }
    resum();
  }

  // Seed the monitor so untouched components contribute equally to both
  // accumulators until their first real visit.
  void neutralize_monitor() {
    mon_lin_ = fval_;
    mon_q_.setZero();
    mon_f_ = fval_;
  }

  double monitor_A() const { return mon_f_.sum(); }

  double monitor_B() const {
    double b = 0.0;
    for (Index t = 0; t < components(); ++t) b += mon_lin_[t] + 0.5 * Lt_[t] * mon_q_[t];
    return b;
  }

 private:
  std::vector<ParamVector> kappa_, z_;
  Eigen::VectorXd Lt_, fval_, cbar_;
  Eigen::VectorXd mon_lin_, mon_q_, mon_f_;
  ParamVector Sw_;
  double W_ = 0.0, C_ = 0.0;
  ParamVector grad_buf_;
};

// ---------------------------------------------------------------------------
// Step rules
// ---------------------------------------------------------------------------

template <ComponentProblem P>
ParamVector miso_step(ComponentState& state, const P& prob, const ParamVector& theta,
                      Index t_hat) {
  state.refresh(prob, theta, t_hat);
  return state.smooth_minimizer();
}

template <ComponentProblem P>
ParamVector miso_composite_step(ComponentState& state, const P& prob, const ParamVector& theta,
                                Index t_hat, const PenaltyTerm& penalty) {
  if (!penalty.convex())
    throw std::invalid_argument("miso_composite_step: penalty must be convex");
  state.refresh(prob, theta, t_hat);
  return state.composite_minimizer(penalty, theta);
}

// Log-penalty variant: the penalty majorizer is re-anchored at the current
// iterate every step, so the update is a weighted soft-threshold.
template <ComponentProblem P>
ParamVector miso_dc_step(ComponentState& state, const P& prob, const ParamVector& theta,
                         Index t_hat, const PenaltyTerm& penalty) {
  if (penalty.kind != PenaltyKind::log_penalty)
    throw std::invalid_argument("miso_dc_step: penalty must be log_penalty");
  state.refresh(prob, theta, t_hat);
  return state.composite_minimizer(penalty, theta);
}

// Memory-light store for mu-strongly-convex linear models: only the scalar
// loss derivative at each anchor is kept; z_t = -(deriv_t/mu) x_t implicitly.
struct ScalarState {
  Eigen::VectorXd deriv;
  Eigen::VectorXd cbar;  // loss(y_t, s_t) - deriv_t * s_t at the anchor margin
  double C = 0.0;
  double mu = 0.0;

  ScalarState() = default;
  ScalarState(Index T, double mu_in) {
    deriv = Eigen::VectorXd::Zero(T);
    cbar = Eigen::VectorXd::Zero(T);
    C = 0.0;
    mu = mu_in;
  }

  double surrogate_avg(const ParamVector& theta_at_minimizer) const {
    return C / static_cast<double>(deriv.size()) - 0.5 * mu * theta_at_minimizer.squaredNorm();
  }
};

template <LinearModelProblem P>
ParamVector miso_mu_step(ScalarState& state, const P& prob, const ParamVector& theta,
                         Index t_hat, double mu) {
  const double m = prob.margin(t_hat, theta);
  const double d_new = prob.loss_derivative_at(t_hat, m);
  if (!std::isfinite(m) || !std::isfinite(d_new))
    throw std::runtime_error("miso_mu_step: non-finite margin");
  ParamVector out = theta;
  prob.add_row(t_hat, -(d_new - state.deriv[t_hat]) / (static_cast<double>(prob.T()) * mu), out);
  const double cb = prob.loss_at(t_hat, m) - d_new * m;
  state.C += cb - state.cbar[t_hat];
  state.cbar[t_hat] = cb;
  state.deriv[t_hat] = d_new;
  return out;
}

template <LinearModelProblem P>
ParamVector scalar_state_minimizer(const ScalarState& state, const P& prob) {
  ParamVector theta = ParamVector::Zero(prob.dim());
  for (Index t = 0; t < prob.T(); ++t)
    prob.add_row(t, -state.deriv[t] / (static_cast<double>(prob.T()) * state.mu), theta);
  return theta;
}

struct SagState {
  std::vector<ParamVector> grads;
  ParamVector sum;

  SagState() = default;
  SagState(Index T, Index p) : grads(T, ParamVector::Zero(p)), sum(ParamVector::Zero(p)) {}
};

template <ComponentProblem P>
ParamVector sag_step(SagState& state, const P& prob, const ParamVector& theta, Index t_hat,
                     double alpha) {
  ParamVector g(prob.dim());
  prob.component_eval(t_hat, theta, g);
  if (!all_finite(g)) throw std::runtime_error("sag_step: non-finite gradient");
  state.sum += g - state.grads[t_hat];
  state.grads[t_hat] = g;
  return theta - (alpha / static_cast<double>(prob.T())) * state.sum;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

enum class InitMode { quadratic_at_theta0, deterministic_pass, warm };

namespace detail {

template <ComponentProblem P>
ParamVector dispatch_step(ComponentState& state, const P& prob, const ParamVector& theta,
                          Index t_hat) {
  const PenaltyTerm& pen = prob.penalty();
  switch (pen.kind) {
    case PenaltyKind::none:
      return miso_step(state, prob, theta, t_hat);
    case PenaltyKind::log_penalty:
      return miso_dc_step(state, prob, theta, t_hat, pen);
    default:
      return miso_composite_step(state, prob, theta, t_hat, pen);
  }
}

// One full in-order pass, updating theta at every visit.
template <ComponentProblem P>
void deterministic_pass(ComponentState& state, const P& prob, ParamVector& theta) {
  for (Index t = 0; t < prob.T(); ++t) theta = dispatch_step(state, prob, theta, t);
}

}  // namespace detail

template <ComponentProblem P>
ComponentState initialize_surrogates(const P& prob, const ParamVector& theta0, InitMode mode,
                                     const Eigen::VectorXd& Lt,
                                     ParamVector* theta_out = nullptr,
                                     const ComponentState* prior = nullptr) {
  check_same_dim(prob.dim(), theta0.size(), "initialize_surrogates");
  if (mode == InitMode::warm) {
    if (!prior) throw std::invalid_argument("initialize_surrogates: warm mode needs a prior state");
    if (prior->components() != prob.T() || prior->dim() != prob.dim())
      throw std::invalid_argument("initialize_surrogates: warm state dimensions mismatch");
    if (theta_out) *theta_out = theta0;
    return *prior;
  }
  ComponentState state(prob.T(), prob.dim(), Lt, theta0);
  ParamVector theta = theta0;
  if (mode == InitMode::deterministic_pass) detail::deterministic_pass(state, prob, theta);
  if (theta_out) *theta_out = theta;
  return state;
}

// ---------------------------------------------------------------------------
// Heuristics
// ---------------------------------------------------------------------------

// View of a fixed subset of components, with the objective averaged over the
// subset only.
template <ComponentProblem P>
class SubsetProblem {
 public:
  SubsetProblem(const P& parent, std::vector<Index> idx)
      : parent_(&parent), idx_(std::move(idx)) {
    if (idx_.empty()) throw std::invalid_argument("SubsetProblem: empty subset");
  }

  Index T() const { return static_cast<Index>(idx_.size()); }
  Index dim() const { return parent_->dim(); }
  const PenaltyTerm& penalty() const { return parent_->penalty(); }

  double component_value(Index i, const ParamVector& v) const {
    return parent_->component_value(idx_[i], v);
  }
  double component_eval(Index i, const ParamVector& v, ParamVector& g) const {
    return parent_->component_eval(idx_[i], v, g);
  }
  double component_lipschitz(Index i) const { return parent_->component_lipschitz(idx_[i]); }

  double objective(const ParamVector& v) const {
    double s = 0.0;
    for (Index i = 0; i < T(); ++i) s += component_value(i, v);
    return s / static_cast<double>(T()) + penalty().value(v);
  }

  ParamVector full_smooth_gradient(const ParamVector& v) const {
    ParamVector g = ParamVector::Zero(dim()), buf(dim());
    for (Index i = 0; i < T(); ++i) {
      component_eval(i, v, buf);
      g += buf;
    }
    return g / static_cast<double>(T());
  }

 private:
  const P* parent_;
  std::vector<Index> idx_;
};

namespace detail {

inline std::vector<Index> sample_subset(Index T, Index count, std::mt19937_64& rng) {
  std::vector<Index> idx(T);
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, T - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

// Runs one in-order pass over a fixed eta-fraction subsample for each
// candidate L = 2^{-k} L0, k = 0..kmax, and returns the candidate with the
// smallest end-of-pass subsample objective.
template <ComponentProblem P>
double heuristic_L_search(const P& prob, const ParamVector& theta0, double L0, double eta,
                          std::uint64_t seed = 0, int kmax = 20) {
  if (L0 <= 0.0) throw std::invalid_argument("heuristic_L_search: L0 must be positive");
  if (eta <= 0.0 || eta > 1.0) throw std::invalid_argument("heuristic_L_search: eta in (0,1]");
  std::mt19937_64 rng(seed);
  const Index count = std::max<Index>(1, static_cast<Index>(std::llround(eta * static_cast<double>(prob.T()))));
  SubsetProblem<P> sub(prob, detail::sample_subset(prob.T(), count, rng));

  double best_L = L0;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= kmax; ++k) {
    const double L = std::ldexp(L0, -k);
    const Eigen::VectorXd Lt = Eigen::VectorXd::Constant(sub.T(), L);
    ParamVector theta = theta0;
    double obj = std::numeric_limits<double>::infinity();
    try {
      ComponentState state(sub.T(), sub.dim(), Lt, theta0);
      detail::deterministic_pass(state, sub, theta);
      obj = sub.objective(theta);
    } catch (const std::runtime_error&) {
      // divergent candidate; skip
    }
    if (std::isfinite(obj) && obj < best_obj) {
      best_obj = obj;
      best_L = L;
    }
  }
  if (!std::isfinite(best_obj)) {
    std::cerr << "heuristic_L_search: all candidates diverged, keeping L0\n";
    return L0;
  }
  return best_L;
}

// Doubles the component constants until the empirical majorization test
// A <= B holds, where A sums f^t at the last visit of each component and B
// sums the outgoing surrogate values re-priced at the current constants.
inline double miso2_monitor(ComponentState& state, double L2) {
  int guard = 0;
  while (state.monitor_A() > state.monitor_B() + 1e-12 * (1.0 + std::abs(state.monitor_A()))) {
    state.rescale(2.0);
    L2 *= 2.0;
    if (++guard > 200) throw std::runtime_error("miso2_monitor: doubling did not terminate");
  }
  return L2;
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

struct RunResult {
  ParamVector theta;
  ParamVector theta_avg;  // running average of the iterates
  std::vector<TraceRecord> trace;
  double L_global = 0.0;  // reference constant used for stationarity scaling
  std::optional<ComponentState> state;  // surrogate store (dense schemes), for warm restarts
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <ComponentProblem P>
TraceRecord make_record(const P& prob, const ParamVector& theta, double pass, double seconds,
                        double L_ref, std::optional<double> gbar) {
  TraceRecord rec;
  rec.pass_count = pass;
  rec.wall_seconds = seconds;
  rec.objective = prob.objective(theta);
  if constexpr (DualCertified<P>) rec.duality_gap = prob.duality_gap(theta).relative;
  rec.stationarity = stationarity_residual(prob, theta, L_ref);
  rec.nnz = nnz(theta);
  rec.surrogate_avg = gbar;
  return rec;
}

inline void check_divergence(double objective, double initial, double factor, bool large_sample_note) {
  if (!std::isfinite(objective) || objective > factor * (std::abs(initial) + 1e-6)) {
    std::string msg = "solver diverged: objective exceeded " + std::to_string(factor) +
                      "x its initial value";
    if (large_sample_note)
      msg += "; miso_mu requires the large-sample regime T >= 2L/mu to converge";
    throw DivergenceError(msg);
  }
}

}  // namespace detail

template <ComponentProblem P>
RunResult batch_mm(const P& prob, SurrogateFamily family, const ParamVector& theta0,
                   int iterations, double L = 0.0, Index record_every = 1) {
  const PenaltyTerm& pen = prob.penalty();
  switch (family) {
    case SurrogateFamily::lipschitz_gradient:
      if (pen.kind != PenaltyKind::none)
        throw std::invalid_argument("batch_mm: lipschitz_gradient needs a smooth problem");
      break;
    case SurrogateFamily::proximal_gradient:
      if (!pen.convex())
        throw std::invalid_argument("batch_mm: proximal_gradient needs a convex penalty");
      break;
    case SurrogateFamily::dc_linearized:
      if (pen.kind != PenaltyKind::log_penalty)
        throw std::invalid_argument("batch_mm: dc_linearized needs the log penalty");
      break;
    default:
      throw std::invalid_argument("batch_mm: family has no batch rule for this problem");
  }
  if (L <= 0.0) {
    double avg = 0.0;
    for (Index t = 0; t < prob.T(); ++t) avg += prob.component_lipschitz(t);
    L = avg / static_cast<double>(prob.T());
  }

  detail::Stopwatch clock;
  RunResult out;
  out.L_global = L;
  ParamVector theta = theta0;
  out.theta_avg = ParamVector::Zero(theta0.size());
  double obj = prob.objective(theta);
  out.trace.push_back(detail::make_record(prob, theta, 0.0, clock.seconds(), L, std::nullopt));
  for (int n = 1; n <= iterations; ++n) {
    const ParamVector grad = prob.full_smooth_gradient(theta);
    if (!all_finite(grad)) throw std::runtime_error("batch_mm: non-finite gradient");
    const ParamVector forward = theta - grad / L;
    switch (family) {
      case SurrogateFamily::lipschitz_gradient:
        theta = forward;
        break;
      case SurrogateFamily::proximal_gradient:
        theta = prox(pen, forward, 1.0 / L);
        break;
      default: {
        const ParamVector w = reweighted_l1_weights(pen.lambda, pen.epsilon, theta);
        theta = prox_weighted_l1(forward, w, 1.0 / L);
        break;
      }
    }
    const double obj_new = prob.objective(theta);
    if (obj_new > obj + 1e-10)
      throw std::runtime_error("batch_mm: objective increased; surrogate constant too small");
    obj = obj_new;
    out.theta_avg += (theta - out.theta_avg) / static_cast<double>(n);
    if (n % record_every == 0 || n == iterations)
      out.trace.push_back(
          detail::make_record(prob, theta, static_cast<double>(n), clock.seconds(), L, std::nullopt));
  }
  out.theta = theta;
  return out;
}

template <ComponentProblem P>
RunResult run(const SolverConfig& cfg, const P& prob, const ParamVector& theta0,
              ComponentState* warm_state = nullptr) {
  const Index T = prob.T();
  check_same_dim(prob.dim(), theta0.size(), "run");
  if (cfg.minibatch < 1 || cfg.minibatch > T)
    throw std::invalid_argument("run: minibatch must lie in [1, T]");
  if (cfg.epochs < 1) throw std::invalid_argument("run: epochs must be positive");
  if (cfg.eta <= 0.0 || cfg.eta > 1.0) throw std::invalid_argument("run: eta must lie in (0,1]");

  if (cfg.scheme == Scheme::batch_mm) {
    const PenaltyTerm& pen = prob.penalty();
    SurrogateFamily family = SurrogateFamily::proximal_gradient;
    if (pen.kind == PenaltyKind::none) family = SurrogateFamily::lipschitz_gradient;
    if (pen.kind == PenaltyKind::log_penalty) family = SurrogateFamily::dc_linearized;
    return batch_mm(prob, family, theta0, cfg.epochs, cfg.L0);
  }

  double base_L = cfg.L0;
  if (base_L <= 0.0) {
    base_L = 0.0;
    for (Index t = 0; t < T; ++t) base_L = std::max(base_L, prob.component_lipschitz(t));
  }
  if (base_L <= 0.0)
    throw std::invalid_argument("run: every component smoothness bound is zero");

  detail::Stopwatch clock;
  std::mt19937_64 rng(cfg.seed);
  RunResult out;
  out.theta_avg = ParamVector::Zero(prob.dim());
  Index iterate_count = 0;
  auto push_average = [&](const ParamVector& theta) {
    ++iterate_count;
    out.theta_avg += (theta - out.theta_avg) / static_cast<double>(iterate_count);
  };

  const double m_frac = static_cast<double>(cfg.minibatch) / static_cast<double>(T);
  std::vector<Index> draw_pool(T);
  std::iota(draw_pool.begin(), draw_pool.end(), Index{0});
  auto draw_minibatch = [&]() {
    for (int i = 0; i < cfg.minibatch; ++i) {
      std::uniform_int_distribution<Index> pick(i, T - 1);
      std::swap(draw_pool[i], draw_pool[pick(rng)]);
    }
  };

  // --- memory-light MISOmu -------------------------------------------------
  if (cfg.scheme == Scheme::miso_mu) {
    if constexpr (LinearModelProblem<P>) {
      const double mu = cfg.mu > 0.0 ? cfg.mu : prob.mu();
      if (mu <= 0.0) throw std::invalid_argument("run: miso_mu needs mu > 0");
      if (prob.penalty().kind != PenaltyKind::none)
        throw std::invalid_argument("run: miso_mu handles smooth (folded) problems only");
      ScalarState state(T, mu);
      ParamVector theta = theta0;
      double pass = 0.0;
      if (theta0.squaredNorm() > 0.0) {
        // Anchor every scalar at theta0 and move to the store's minimizer.
        for (Index t = 0; t < T; ++t) {
          const double m = prob.margin(t, theta0);
          state.deriv[t] = prob.loss_derivative_at(t, m);
          state.cbar[t] = prob.loss_at(t, m) - state.deriv[t] * m;
        }
        state.C = state.cbar.sum();
        theta = scalar_state_minimizer(state, prob);
        pass = 1.0;
      }
      const double f_init = prob.objective(theta0);
      out.L_global = base_L;
      out.trace.push_back(detail::make_record(prob, theta0, 0.0, clock.seconds(), base_L,
                                              std::nullopt));
      if (pass > 0.0) {
        push_average(theta);
        out.trace.push_back(detail::make_record(prob, theta, pass, clock.seconds(), base_L,
                                                state.surrogate_avg(theta)));
      }
      int recorded_pass = static_cast<int>(pass);
      while (pass < static_cast<double>(cfg.epochs) - 1e-12) {
        draw_minibatch();
        for (int i = 0; i < cfg.minibatch; ++i)
          theta = miso_mu_step(state, prob, theta, draw_pool[i], mu);
        push_average(theta);
        pass += m_frac;
        if (static_cast<int>(std::floor(pass + 1e-12)) > recorded_pass) {
          recorded_pass = static_cast<int>(std::floor(pass + 1e-12));
          if (recorded_pass % cfg.resum_every == 0) {
            theta = scalar_state_minimizer(state, prob);
            state.C = state.cbar.sum();
          }
          TraceRecord rec = detail::make_record(prob, theta, pass, clock.seconds(), base_L,
                                                state.surrogate_avg(theta));
          detail::check_divergence(rec.objective, f_init, cfg.divergence_factor, true);
          out.trace.push_back(std::move(rec));
        }
      }
      out.theta = theta;
      return out;
    } else {
      throw std::invalid_argument("run: miso_mu requires a linear-model problem");
    }
  }

  // --- SAG -----------------------------------------------------------------
  if (cfg.scheme == Scheme::sag) {
    if (prob.penalty().kind != PenaltyKind::none)
      throw std::invalid_argument("run: sag handles smooth (folded) problems only");
    const double alpha = 1.0 / (16.0 * base_L);
    SagState state(T, prob.dim());
    ParamVector theta = theta0;
    for (Index t = 0; t < T; ++t) {
      ParamVector g(prob.dim());
      prob.component_eval(t, theta0, g);
      state.grads[t] = g;
      state.sum += g;
    }
    const double f_init = prob.objective(theta0);
    out.L_global = base_L;
    out.trace.push_back(detail::make_record(prob, theta0, 0.0, clock.seconds(), base_L,
                                            std::nullopt));
    double pass = 1.0;  // fill pass
    out.trace.push_back(detail::make_record(prob, theta, pass, clock.seconds(), base_L,
                                            std::nullopt));
    int recorded_pass = 1;
    while (pass < static_cast<double>(cfg.epochs) - 1e-12) {
      draw_minibatch();
      for (int i = 0; i < cfg.minibatch; ++i)
        theta = sag_step(state, prob, theta, draw_pool[i], alpha);
      push_average(theta);
      pass += m_frac;
      if (static_cast<int>(std::floor(pass + 1e-12)) > recorded_pass) {
        recorded_pass = static_cast<int>(std::floor(pass + 1e-12));
        TraceRecord rec =
            detail::make_record(prob, theta, pass, clock.seconds(), base_L, std::nullopt);
        detail::check_divergence(rec.objective, f_init, cfg.divergence_factor, false);
        out.trace.push_back(std::move(rec));
      }
    }
    out.theta = theta;
    return out;
  }

  // --- SGD with decreasing steps --------------------------------------------
  if (cfg.scheme == Scheme::sgd_h) {
    if (prob.penalty().kind != PenaltyKind::none)
      throw std::invalid_argument("run: sgd_h handles smooth (folded) problems only");
    const Index count =
        std::max<Index>(1, static_cast<Index>(std::llround(cfg.eta * static_cast<double>(T))));
    SubsetProblem<P> sub(prob, detail::sample_subset(T, count, rng));
    const double n0 = static_cast<double>(count);
    double best_rho = 1.0 / base_L, best_obj = std::numeric_limits<double>::infinity();
    double tuning_passes = 0.0;
    for (int k = 0; k <= cfg.lsearch_kmax; ++k) {
      const double rho = std::ldexp(10.0 / base_L, -k);
      ParamVector theta = theta0;
      ParamVector g(prob.dim());
      bool ok = true;
      for (Index i = 0; i < count; ++i) {
        sub.component_eval(i, theta, g);
        theta -= rho / std::sqrt(static_cast<double>(i + 1) + n0) * g;
        if (!all_finite(theta)) {
          ok = false;
          break;
        }
      }
      tuning_passes += cfg.eta;
      const double obj = ok ? sub.objective(theta) : std::numeric_limits<double>::infinity();
      if (std::isfinite(obj) && obj < best_obj) {
        best_obj = obj;
        best_rho = rho;
      }
    }
    ParamVector theta = theta0;
    ParamVector g(prob.dim());
    const double f_init = prob.objective(theta0);
    out.L_global = base_L;
    double pass = tuning_passes;
    out.trace.push_back(
        detail::make_record(prob, theta0, pass, clock.seconds(), base_L, std::nullopt));
    int recorded_pass = static_cast<int>(std::floor(pass + 1e-12));
    long iter = 0;
    while (pass < static_cast<double>(cfg.epochs) - 1e-12) {
      draw_minibatch();
      for (int i = 0; i < cfg.minibatch; ++i) {
        prob.component_eval(draw_pool[i], theta, g);
        theta -= best_rho / std::sqrt(static_cast<double>(iter + 1) + n0) * g;
      }
      if (!all_finite(theta)) throw DivergenceError("sgd_h: iterate diverged");
      push_average(theta);
      ++iter;
      pass += m_frac;
      if (static_cast<int>(std::floor(pass + 1e-12)) > recorded_pass) {
        recorded_pass = static_cast<int>(std::floor(pass + 1e-12));
        TraceRecord rec =
            detail::make_record(prob, theta, pass, clock.seconds(), base_L, std::nullopt);
        detail::check_divergence(rec.objective, f_init, cfg.divergence_factor, false);
        out.trace.push_back(std::move(rec));
      }
    }
    out.theta = theta;
    return out;
  }

  // --- MISO0 / MISO1 / MISO2 (dense surrogate store) -------------------------
  const PenaltyTerm& pen = prob.penalty();
  double search_passes = 0.0;
  double scale = 1.0;
  if (!warm_state && (cfg.scheme == Scheme::miso1 || cfg.scheme == Scheme::miso2)) {
    const double L1 = heuristic_L_search(prob, theta0, base_L, cfg.eta, cfg.seed ^ 0x9e3779b9ull,
                                         cfg.lsearch_kmax);
    scale = L1 / base_L;
    search_passes = cfg.eta * static_cast<double>(cfg.lsearch_kmax + 1);
    if (cfg.scheme == Scheme::miso2) scale *= cfg.eta;
  }

  Eigen::VectorXd Lt(T);
  if (cfg.per_component_L) {
    // A component with a zero bound has zero gradient everywhere (constant
    // term); any positive curvature majorizes it, and a vanishing weight
    // keeps it from pulling the aggregate minimizer.
    const double L_floor = 1e-12 * base_L * scale;
    for (Index t = 0; t < T; ++t)
      Lt[t] = std::max(prob.component_lipschitz(t) * scale, L_floor);
  } else {
    Lt.setConstant(base_L * scale);
  }

  ParamVector theta = theta0;
  ComponentState state;
  double pass = search_passes;
  const double f_init = prob.objective(theta0);
  out.trace.push_back(detail::make_record(prob, theta0, pass, clock.seconds(),
                                          std::max(base_L, base_L * scale), std::nullopt));
  if (warm_state) {
    state = initialize_surrogates(prob, theta0, InitMode::warm, Lt, &theta, warm_state);
  } else {
    state = initialize_surrogates(prob, theta0, InitMode::deterministic_pass, Lt, &theta);
    pass += 1.0;
  }
  state.track_monitor = cfg.scheme == Scheme::miso2;
  if (state.track_monitor) state.neutralize_monitor();
  const double L_ref = state.max_lipschitz();
  out.L_global = L_ref;

  auto gbar_at = [&](const ParamVector& point, const ParamVector& pen_anchor) -> double {
    double v = state.surrogate_smooth_avg(point);
    if (pen.kind == PenaltyKind::log_penalty) {
      const ParamVector w = reweighted_l1_weights(pen.lambda, pen.epsilon, pen_anchor);
      for (Index j = 0; j < point.size(); ++j)
        v += w[j] * (std::abs(point[j]) - std::abs(pen_anchor[j]));
      v += pen.value(pen_anchor);
    } else {
      v += pen.value(point);
    }
    return v;
  };

  if (!warm_state)
    out.trace.push_back(
        detail::make_record(prob, theta, pass, clock.seconds(), L_ref, gbar_at(theta, theta)));
  int recorded_pass = static_cast<int>(std::floor(pass + 1e-12));
  double L2 = state.max_lipschitz();
  while (pass < static_cast<double>(cfg.epochs) - 1e-12) {
    draw_minibatch();
    const ParamVector anchor = theta;
    for (int i = 0; i < cfg.minibatch; ++i) state.refresh(prob, anchor, draw_pool[i]);
    theta = state.composite_minimizer(pen, anchor);
    push_average(theta);
    pass += m_frac;
    if (static_cast<int>(std::floor(pass + 1e-12)) > recorded_pass) {
      recorded_pass = static_cast<int>(std::floor(pass + 1e-12));
      if (state.track_monitor) {
        const double L2_new = miso2_monitor(state, L2);
        if (L2_new != L2) {
          L2 = L2_new;
          theta = state.composite_minimizer(pen, anchor);
        }
      }
      if (recorded_pass % cfg.resum_every == 0) {
        state.resum();
        theta = state.composite_minimizer(pen, anchor);
      }
      TraceRecord rec = detail::make_record(prob, theta, pass, clock.seconds(), L_ref,
                                            gbar_at(theta, anchor));
      detail::check_divergence(rec.objective, f_init, cfg.divergence_factor, false);
      out.trace.push_back(std::move(rec));
    }
  }
  out.theta = theta;
  out.state = std::move(state);
  return out;
}

}  // namespace miso
