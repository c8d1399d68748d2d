#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "miso/surrogates.hpp"
#include "miso/terms.hpp"

namespace miso {

// Randomized instances of every surrogate family, packaged as (f, g, kappa,
// declared L) for check_surrogate. Shared by the check-surrogates CLI command
// and the certification test suite.

struct CertifyCase {
  ValueFn f;
  ValueFn g;
  ParamVector kappa;
  double L_declared = 0.0;
};

struct CertifySummary {
  std::string family;
  int problems = 0;
  int majorization_violations = 0;
  double worst_tightness = 0.0;
  double worst_grad_gap = 0.0;
  double worst_ratio_margin = 0.0;  // max over cases of smoothness_ratio / L_declared
  bool ok = true;
};

namespace certify_detail {

inline ParamVector gaussian_vector(Index p, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  ParamVector v(p);
  for (Index j = 0; j < p; ++j) v[j] = scale * gauss(rng);
  return v;
}

// Random convex quadratic f(theta) = 1/2 theta' Q theta + b' theta with its
// exact curvature range.
struct QuadraticInstance {
  Eigen::MatrixXd Q;
  ParamVector b;
  double L = 0.0;

  double value(const ParamVector& theta) const {
    return 0.5 * theta.dot(Q * theta) + b.dot(theta);
  }
  ParamVector grad(const ParamVector& theta) const { return Q * theta + b; }
};

inline QuadraticInstance random_quadratic(Index p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> shift(0.1, 1.0);
  Eigen::MatrixXd A(p, p);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j) A(i, j) = gauss(rng);
  QuadraticInstance inst;
  inst.Q = A.transpose() * A / static_cast<double>(p) + shift(rng) * Eigen::MatrixXd::Identity(p, p);
  inst.b = gaussian_vector(p, rng);
  inst.L = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(inst.Q).eigenvalues().maxCoeff();
  return inst;
}

// Anchor with coordinates bounded away from zero, so the log-penalty error
// stays differentiable at kappa.
inline ParamVector off_zero_anchor(Index p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution flip(0.5);
  ParamVector v(p);
  for (Index j = 0; j < p; ++j) v[j] = (flip(rng) ? 1.0 : -1.0) * mag(rng);
  return v;
}

}  // namespace certify_detail

enum class CertifyFamily {
  lipschitz_gradient,
  proximal_gradient,
  dc_linearized,
  quadratic,
  jensen_nu0,
  jensen_nu1,
  jensen_nu2,
  huber_variational,
};

inline const char* certify_family_name(CertifyFamily fam) {
  switch (fam) {
    case CertifyFamily::lipschitz_gradient: return "lipschitz_gradient";
    case CertifyFamily::proximal_gradient: return "proximal_gradient";
    case CertifyFamily::dc_linearized: return "dc_linearized";
    case CertifyFamily::quadratic: return "quadratic";
    case CertifyFamily::jensen_nu0: return "jensen(nu=0)";
    case CertifyFamily::jensen_nu1: return "jensen(nu=1)";
    case CertifyFamily::jensen_nu2: return "jensen(nu=2)";
    case CertifyFamily::huber_variational: return "huber_variational";
  }
  return "?";
}

inline CertifyCase make_certify_case(CertifyFamily fam, std::uint64_t seed) {
  using namespace certify_detail;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> dim(4, 10);
  const Index p = dim(rng);
  CertifyCase out;

  switch (fam) {
    case CertifyFamily::lipschitz_gradient: {
      const QuadraticInstance q = random_quadratic(p, rng);
      const ParamVector kappa = gaussian_vector(p, rng, 2.0);
      const double fk = q.value(kappa);
      const ParamVector gk = q.grad(kappa);
      const double L = q.L;
      out.f = [q](const ParamVector& th) { return q.value(th); };
      out.g = [fk, gk, kappa, L](const ParamVector& th) {
        return fk + gk.dot(th - kappa) + 0.5 * L * (th - kappa).squaredNorm();
      };
      out.kappa = kappa;
      out.L_declared = 2.0 * L;
      break;
    }
    case CertifyFamily::proximal_gradient: {
      const QuadraticInstance q = random_quadratic(p, rng);
      std::uniform_real_distribution<double> lam(0.1, 1.0);
      std::bernoulli_distribution use_l1(0.5);
      const PenaltyTerm pen = use_l1(rng) ? PenaltyTerm::l1(lam(rng)) : PenaltyTerm::l2(lam(rng));
      const ParamVector kappa = gaussian_vector(p, rng, 2.0);
      const double fk = q.value(kappa);
      const ParamVector gk = q.grad(kappa);
      const double L = q.L;
      out.f = [q, pen](const ParamVector& th) { return q.value(th) + pen.value(th); };
      out.g = [fk, gk, kappa, L, pen](const ParamVector& th) {
        return fk + gk.dot(th - kappa) + 0.5 * L * (th - kappa).squaredNorm() + pen.value(th);
      };
      out.kappa = kappa;
      out.L_declared = L;
      break;
    }
    case CertifyFamily::dc_linearized: {
      const QuadraticInstance q = random_quadratic(p, rng);
      std::uniform_real_distribution<double> lam(0.1, 1.0), eps(0.05, 0.2);
      const PenaltyTerm pen = PenaltyTerm::log_penalty(lam(rng), eps(rng));
      const ParamVector kappa = off_zero_anchor(p, rng);
      const DcSurrogate dc =
          dc_majorizer([q](const ParamVector& th) { return q.value(th); }, pen, kappa);
      out.f = [q, pen](const ParamVector& th) { return q.value(th) + pen.value(th); };
      out.g = [dc](const ParamVector& th) { return dc.value(th); };
      out.kappa = kappa;
      out.L_declared = pen.lambda / (pen.epsilon * pen.epsilon);
      break;
    }
    case CertifyFamily::quadratic: {
      const QuadraticInstance q = random_quadratic(p, rng);
      std::uniform_real_distribution<double> bump(0.05, 1.5);
      Eigen::MatrixXd H = q.Q;
      for (Index j = 0; j < p; ++j) H(j, j) += bump(rng);
      const ParamVector kappa = gaussian_vector(p, rng, 2.0);
      const double fk = q.value(kappa);
      const ParamVector gk = q.grad(kappa);
      out.f = [q](const ParamVector& th) { return q.value(th); };
      out.g = [fk, gk, kappa, H](const ParamVector& th) {
        const ParamVector d = th - kappa;
        return fk + gk.dot(d) + 0.5 * d.dot(H * d);
      };
      out.kappa = kappa;
      out.L_declared =
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H - q.Q).eigenvalues().maxCoeff();
      break;
    }
    case CertifyFamily::jensen_nu0:
    case CertifyFamily::jensen_nu1:
    case CertifyFamily::jensen_nu2: {
      const int nu = fam == CertifyFamily::jensen_nu0 ? 0
                     : fam == CertifyFamily::jensen_nu1 ? 1
                                                        : 2;
      ParamVector x = gaussian_vector(p, rng);
      std::bernoulli_distribution drop(0.3);
      for (Index j = 1; j < p; ++j)
        if (drop(rng)) x[j] = 0.0;  // keep x[0] so x != 0
      const ParamVector kappa = gaussian_vector(p, rng);
      auto scalar = [](double u) { return loss_value(LossKind::logistic, 1.0, u); };
      const JensenSurrogate js = jensen_surrogate(scalar, 0.25, x, nu, kappa);
      out.f = [x, scalar](const ParamVector& th) { return scalar(dot(x, th)); };
      out.g = [js](const ParamVector& th) { return js.value(th); };
      out.kappa = kappa;
      out.L_declared = js.lipschitz;
      break;
    }
    case CertifyFamily::huber_variational: {
      std::uniform_int_distribution<Index> rows(3, 6);
      std::uniform_real_distribution<double> deltas(0.5, 1.0);
      const Index m = rows(rng);
      const double delta = deltas(rng);
      Eigen::MatrixXd X(m, p);
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < p; ++j) X(i, j) = gauss(rng);
      const Eigen::VectorXd y = 3.0 * gaussian_vector(m, rng);
      const ParamVector kappa = gaussian_vector(p, rng);
      Eigen::VectorXd w(m);
      for (Index i = 0; i < m; ++i) w[i] = huber_optimal_weight(delta, y[i] - X.row(i).dot(kappa));
      out.f = [X, y, delta](const ParamVector& th) {
        double s = 0.0;
        for (Index i = 0; i < X.rows(); ++i) s += huber_value(delta, y[i] - X.row(i).dot(th));
        return s;
      };
      out.g = [X, y, w](const ParamVector& th) {
        double s = 0.0;
        for (Index i = 0; i < X.rows(); ++i) {
          const double r = y[i] - X.row(i).dot(th);
          s += 0.5 * (r * r / w[i] + w[i]);
        }
        return s;
      };
      out.kappa = kappa;
      double total = 0.0;
      for (Index i = 0; i < m; ++i) total += X.row(i).squaredNorm();
      out.L_declared = huber_lipschitz_bound(delta, total);
      break;
    }
  }
  return out;
}

inline CertifySummary certify_family(CertifyFamily fam, int n_problems, int n_samples,
                                     std::uint64_t seed) {
  CertifySummary summary;
  summary.family = certify_family_name(fam);
  summary.problems = n_problems;
  for (int i = 0; i < n_problems; ++i) {
    const CertifyCase c = make_certify_case(fam, seed + static_cast<std::uint64_t>(i) * 7919u);
    SurrogateCheckOptions opts;
    opts.n_samples = n_samples;
    opts.seed = seed + 104729u * static_cast<std::uint64_t>(i);
    const SurrogateCheckReport r = check_surrogate(c.f, c.g, c.kappa, c.L_declared, opts);
    summary.majorization_violations += r.majorization_violations;
    summary.worst_tightness = std::max(summary.worst_tightness, r.tightness_gap);
    summary.worst_grad_gap = std::max(summary.worst_grad_gap, r.grad_gap);
    summary.worst_ratio_margin =
        std::max(summary.worst_ratio_margin, r.smoothness_ratio / r.L_declared);
    summary.ok = summary.ok && r.ok();
  }
  return summary;
}

inline std::vector<CertifySummary> certify_all(int n_problems = 10, int n_samples = 1000,
                                               std::uint64_t seed = 20240901) {
  std::vector<CertifySummary> out;
  for (CertifyFamily fam :
       {CertifyFamily::lipschitz_gradient, CertifyFamily::proximal_gradient,
        CertifyFamily::dc_linearized, CertifyFamily::quadratic, CertifyFamily::jensen_nu0,
        CertifyFamily::jensen_nu1, CertifyFamily::jensen_nu2, CertifyFamily::huber_variational})
    out.push_back(certify_family(fam, n_problems, n_samples, seed));
  return out;
}

}  // namespace miso
