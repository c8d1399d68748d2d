#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace miso;

namespace {

Dataset tiny_dataset() {
  Eigen::MatrixXd X(2, 2);
  X << 1.0, 0.0, 0.0, 1.0;
  Eigen::VectorXd y(2);
  y << 1.0, -1.0;
  return Dataset(X, y);
}

ParamVector gauss_vec(Index p, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  ParamVector v(p);
  for (Index j = 0; j < p; ++j) v[j] = gauss(rng);
  return v;
}

}  // namespace

TEST_CASE("logistic l2 problem basics") {
  const LogisticL2Problem prob(tiny_dataset(), 0.1);
  CHECK(prob.T() == 2);
  CHECK(prob.dim() == 2);
  CHECK(prob.mu() == 0.1);
  CHECK(prob.penalty().kind == PenaltyKind::none);
  CHECK(prob.objective(ParamVector::Zero(2)) == Catch::Approx(std::log(2.0)).margin(1e-15));

  ParamVector grad(2);
  const double v = prob.component_eval(0, ParamVector::Zero(2), grad);
  CHECK(v == Catch::Approx(std::log(2.0)).margin(1e-15));
  CHECK(grad[0] == Catch::Approx(-0.5).margin(1e-15));
  CHECK(grad[1] == 0.0);

  ParamVector theta(2);
  theta << 2.0, -1.0;
  ParamVector g2(2);
  prob.component_eval(1, theta, g2);
  // gradient carries the lambda theta term
  CHECK(g2[0] == Catch::Approx(0.1 * 2.0).margin(1e-15));

  CHECK(prob.component_lipschitz(0) == Catch::Approx(0.25 + 0.1).margin(1e-15));
  CHECK_THROWS_AS(LogisticL2Problem(tiny_dataset(), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(prob.objective(ParamVector::Zero(3)), std::invalid_argument);
}

TEST_CASE("logistic gradients match finite differences") {
  const Dataset data = testutil::logistic_dataset(20, 4, 101, false);
  const LogisticL2Problem prob(data, 0.05);
  std::mt19937_64 rng(103);
  for (int rep = 0; rep < 100; ++rep) {
    const ParamVector theta = gauss_vec(4, rng);
    const ParamVector g = prob.full_smooth_gradient(theta);
    const ParamVector fd = testutil::fd_gradient(
        [&](const ParamVector& t) { return prob.objective(t); }, theta);
    CHECK((g - fd).norm() <= 1e-6 * (1.0 + g.norm()));

    const Index t = static_cast<Index>(rep % 20);
    ParamVector cg(4);
    const double cv = prob.component_eval(t, theta, cg);
    CHECK(cv == Catch::Approx(prob.component_value(t, theta)).margin(1e-14));
    const ParamVector cfd = testutil::fd_gradient(
        [&](const ParamVector& u) { return prob.component_value(t, u); }, theta);
    CHECK((cg - cfd).norm() <= 1e-6 * (1.0 + cg.norm()));
  }

  // averaging the component gradients reproduces the full gradient
  const ParamVector theta = gauss_vec(4, rng);
  ParamVector sum = ParamVector::Zero(4), g(4);
  for (Index t = 0; t < prob.T(); ++t) {
    prob.component_eval(t, theta, g);
    sum += g;
  }
  sum /= static_cast<double>(prob.T());
  CHECK((sum - prob.full_smooth_gradient(theta)).norm() <= 1e-10);
}

TEST_CASE("composite view splits the regularizer") {
  const Dataset data = testutil::logistic_dataset(15, 3, 107, true);
  const LogisticL2Problem prob(data, 0.2);
  const LogisticCompositeView view = prob.composite();
  CHECK(view.T() == prob.T());
  CHECK(view.penalty().kind == PenaltyKind::l2);
  CHECK(view.penalty().lambda == 0.2);

  std::mt19937_64 rng(109);
  const ParamVector theta = gauss_vec(3, rng);
  CHECK(view.objective(theta) == Catch::Approx(prob.objective(theta)).margin(1e-14));
  const ParamVector split = view.full_smooth_gradient(theta) + 0.2 * theta;
  CHECK((split - prob.full_smooth_gradient(theta)).norm() <= 1e-12);

  ParamVector g(3);
  const double v = view.component_eval(2, theta, g);
  CHECK(v == Catch::Approx(prob.component_value(2, theta) - 0.1 * theta.squaredNorm())
                .margin(1e-12));
  CHECK(view.component_lipschitz(2) ==
        Catch::Approx(prob.component_lipschitz(2) - 0.2).margin(1e-14));
}

TEST_CASE("duality gap hand values") {
  Eigen::MatrixXd X(4, 1);
  X << 1.0, 1.0, 1.0, 1.0;
  Eigen::VectorXd y_bal(4), y_unbal(4);
  y_bal << 1.0, 1.0, -1.0, -1.0;
  y_unbal << 1.0, 1.0, 1.0, -1.0;

  const LogisticL2Problem balanced(Dataset(X, y_bal), 0.5);
  const DualityGapResult rb = balanced.duality_gap(ParamVector::Zero(1));
  CHECK(rb.primal == Catch::Approx(std::log(2.0)).margin(1e-12));
  CHECK(rb.dual == Catch::Approx(std::log(2.0)).margin(1e-9));
  CHECK(std::abs(rb.relative) <= 1e-8);

  const LogisticL2Problem unbalanced(Dataset(X, y_unbal), 0.5);
  const DualityGapResult ru = unbalanced.duality_gap(ParamVector::Zero(1));
  CHECK(ru.dual == Catch::Approx(std::log(2.0) - 0.0625).margin(1e-12));
}

TEST_CASE("weak duality holds everywhere") {
  const Dataset data = testutil::logistic_dataset(30, 4, 113, true);
  const LogisticL2Problem prob(data, 0.1);
  std::mt19937_64 rng(127);
  for (int rep = 0; rep < 1000; ++rep) {
    const ParamVector theta = gauss_vec(4, rng, 3.0);
    const DualityGapResult r = prob.duality_gap(theta);
    CHECK(r.primal - r.dual >= -1e-12);
  }
  // extreme points exercise the clamp and stay finite
  const DualityGapResult far = prob.duality_gap(ParamVector::Constant(4, 1e4));
  CHECK(std::isfinite(far.dual));
  CHECK(far.primal - far.dual >= -1e-12);
}

TEST_CASE("duality gap vanishes at the optimum") {
  const Dataset data = testutil::logistic_dataset(100, 5, 131, true);
  const double lambda = 0.1;
  const LogisticL2Problem prob(data, lambda);
  const testutil::Reference ref = testutil::reference_logistic_l2(data, lambda, 100000);
  const DualityGapResult r = prob.duality_gap(ref.theta);
  CHECK(r.primal == Catch::Approx(ref.objective).margin(1e-10));
  CHECK(r.relative >= -1e-12);
  CHECK(r.relative <= 1e-8);
}

TEST_CASE("sparse log penalty problem") {
  Eigen::MatrixXd X(2, 2);
  X << 1.0, 0.0, 0.0, 2.0;
  Eigen::VectorXd y(2);
  y << 2.0, -1.0;
  const SparseLogPenaltyProblem prob(Dataset(X, y), 0.3, 0.05);
  CHECK(prob.lambda() == 0.3);
  CHECK(prob.epsilon() == 0.05);
  CHECK(prob.penalty().kind == PenaltyKind::log_penalty);

  // objective at zero: mean squared labels / 2 plus p lambda log eps
  const double expect = 0.5 * (4.0 + 1.0) / 2.0 + 2.0 * 0.3 * std::log(0.05);
  CHECK(prob.objective(ParamVector::Zero(2)) == Catch::Approx(expect).margin(1e-12));

  ParamVector theta(2);
  theta << 1.0, 1.0;
  CHECK(prob.component_value(0, theta) == Catch::Approx(0.5).margin(1e-15));

  std::mt19937_64 rng(137);
  for (int rep = 0; rep < 100; ++rep) {
    const ParamVector t = gauss_vec(2, rng);
    const ParamVector fd = testutil::fd_gradient(
        [&](const ParamVector& u) {
          double s = 0.0;
          for (Index i = 0; i < prob.T(); ++i) s += prob.component_value(i, u);
          return s / static_cast<double>(prob.T());
        },
        t);
    CHECK((prob.full_smooth_gradient(t) - fd).norm() <= 1e-6);
    // bounded below by the penalty floor
    CHECK(prob.objective(t) >= 2.0 * 0.3 * std::log(0.05) - 1e-12);
  }
  CHECK_THROWS_AS(SparseLogPenaltyProblem(Dataset(X, y), 0.0), std::invalid_argument);
}

TEST_CASE("stationarity residual") {
  std::mt19937_64 rng(139);
  // smooth case: residual equals the gradient norm for any L_ref
  for (int rep = 0; rep < 50; ++rep) {
    const ParamVector theta = gauss_vec(3, rng), grad = gauss_vec(3, rng);
    const double L = 0.5 + std::abs(gauss_vec(1, rng)[0]);
    CHECK(prox_gradient_residual(theta, grad, PenaltyTerm::none(), L) ==
          Catch::Approx(grad.norm()).margin(1e-12));
  }

  // lasso fixed point has zero residual
  ParamVector a(3);
  a << 2.0, 0.1, -1.5;
  const double lam = 0.3;
  ParamVector star(3);
  for (Index j = 0; j < 3; ++j) star[j] = soft_threshold(a[j], lam);
  const ParamVector grad_star = star - a;  // f1 = 1/2 ||theta - a||^2
  CHECK(prox_gradient_residual(star, grad_star, PenaltyTerm::l1(lam), 1.0) <= 1e-12);

  // doubling L_ref keeps the residual within [1x, 2x]
  for (int rep = 0; rep < 200; ++rep) {
    const ParamVector theta = gauss_vec(4, rng), grad = gauss_vec(4, rng);
    const double L = 0.2 + std::abs(gauss_vec(1, rng)[0]);
    for (const PenaltyTerm& pen :
         {PenaltyTerm::l1(0.4), PenaltyTerm::l2(0.4), PenaltyTerm::log_penalty(0.4, 0.05)}) {
      const double r1 = prox_gradient_residual(theta, grad, pen, L);
      const double r2 = prox_gradient_residual(theta, grad, pen, 2.0 * L);
      CHECK(r2 >= r1 - 1e-10);
      CHECK(r2 <= 2.0 * r1 + 1e-10);
    }
  }
  CHECK_THROWS_AS(prox_gradient_residual(gauss_vec(2, rng), gauss_vec(2, rng),
                                         PenaltyTerm::none(), 0.0),
                  std::invalid_argument);

  // template wrapper agrees with the direct call
  const Dataset data = testutil::logistic_dataset(10, 3, 149, true);
  const LogisticL2Problem prob(data, 0.1);
  const ParamVector t0 = gauss_vec(3, rng);
  CHECK(stationarity_residual(prob, t0, 1.0) ==
        Catch::Approx(prob.full_smooth_gradient(t0).norm()).margin(1e-12));
}

TEST_CASE("sparse init") {
  Eigen::MatrixXd I2(2, 2);
  I2 << 1.0, 0.0, 0.0, 1.0;
  Eigen::VectorXd e1(2);
  e1 << 1.0, 0.0;
  const ParamVector id_init = sparse_init(Dataset(I2, e1));
  CHECK(id_init[0] == Catch::Approx(1.0).margin(1e-14));
  CHECK(id_init[1] == 0.0);

  Eigen::MatrixXd X(3, 2);
  X << 1.0, 2.0, 0.0, 1.0, 1.0, 0.0;
  Eigen::VectorXd y(3);
  y << 1.0, 2.0, 3.0;
  const ParamVector init = sparse_init(Dataset(X, y));
  const double coef = std::sqrt(14.0 / 176.0);
  CHECK(init[0] == Catch::Approx(4.0 * coef).margin(1e-12));
  CHECK(init[1] == Catch::Approx(4.0 * coef).margin(1e-12));

  const ParamVector doubled = sparse_init(Dataset(X, (2.0 * y).eval()));
  CHECK((doubled - 2.0 * init).norm() <= 1e-12);

  Eigen::MatrixXd Xz(2, 2);
  Xz << 1.0, 0.0, -1.0, 0.0;
  Eigen::VectorXd yz(2);
  yz << 1.0, 1.0;
  CHECK_THROWS_AS(sparse_init(Dataset(Xz, yz)), std::invalid_argument);
}

TEST_CASE("nnz counting") {
  ParamVector v(3);
  v << 1.0, 0.0, 1e-13;
  CHECK(nnz(v) == 1);
  CHECK(nnz(ParamVector::Zero(3)) == 0);
  CHECK(nnz(v, 0.0) == 2);
  CHECK_THROWS_AS(nnz(v, -1.0), std::invalid_argument);
}
