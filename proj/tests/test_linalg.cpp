#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "test_util.hpp"

using namespace miso;

namespace {

ParamVector vec(std::initializer_list<double> xs) {
  ParamVector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

ParamVector random_vec(Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  ParamVector v(p);
  for (Index j = 0; j < p; ++j) v[j] = gauss(rng);
  return v;
}

SparseRow random_sparse(Index p, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(0.4);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SparseRow r;
  for (Index j = 0; j < p; ++j)
    if (keep(rng)) {
      r.indices.push_back(j);
      r.values.push_back(gauss(rng));
    }
  return r;
}

}  // namespace

TEST_CASE("dot on dense and sparse operands") {
  CHECK(dot(vec({1, 2, 3}), vec({4, 5, 6})) == 32.0);

  SparseRow r;
  r.indices = {1};
  r.values = {2.0};
  CHECK(dot(r, vec({4, 5, 6})) == 10.0);

  CHECK(dot(vec({3, -1}), ParamVector::Zero(2)) == 0.0);
  CHECK_THROWS_AS(dot(vec({1, 2}), vec({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("dot is bilinear on random inputs") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const ParamVector a = random_vec(7, rng), u = random_vec(7, rng), v = random_vec(7, rng);
    const double lhs = dot(a, ParamVector(u + v));
    const double rhs = dot(a, u) + dot(a, v);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(lhs)));
  }
}

TEST_CASE("axpy basics") {
  CHECK(axpy(1.0, vec({1, 0}), vec({0, 0})) == vec({1, 0}));

  std::mt19937_64 rng(5);
  const ParamVector x = random_vec(4, rng), y = random_vec(4, rng);
  CHECK(axpy(0.0, x, y) == y);
  CHECK(axpy(-1.0, x, x).norm() == 0.0);
  CHECK_THROWS_AS(axpy(1.0, vec({1}), vec({1, 2})), std::invalid_argument);
}

TEST_CASE("sparse and dense views of one row agree") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    const SparseRow r = random_sparse(9, rng);
    const ParamVector dense = r.to_dense(9);
    const ParamVector probe = random_vec(9, rng);
    CHECK(std::abs(dot(r, probe) - dot(dense, probe)) <= 1e-14);
    const ParamVector base = random_vec(9, rng);
    CHECK((axpy(0.7, r, base) - axpy(0.7, dense, base)).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("SparseRow validation") {
  SparseRow ok;
  ok.indices = {0, 3, 5};
  ok.values = {1.0, 2.0, 3.0};
  CHECK_NOTHROW(ok.validate(6));
  CHECK_THROWS_AS(ok.validate(5), std::invalid_argument);

  SparseRow bad = ok;
  bad.indices = {0, 3, 3};
  CHECK_THROWS_AS(bad.validate(6), std::invalid_argument);

  SparseRow mismatched = ok;
  mismatched.values.pop_back();
  CHECK_THROWS_AS(mismatched.validate(6), std::invalid_argument);
}

TEST_CASE("standardize centers and scales columns") {
  Dataset::DenseMatrix X(2, 2);
  X << 1, 5, 3, 5;
  Eigen::VectorXd y(2);
  y << 1, -1;
  std::vector<Index> constant;
  const Dataset out = standardize(Dataset(X, y), &constant);

  CHECK(out.row_dense(0)[0] == Catch::Approx(-1.0).margin(1e-14));
  CHECK(out.row_dense(1)[0] == Catch::Approx(1.0).margin(1e-14));
  CHECK(out.row_dense(0)[1] == 0.0);
  CHECK(out.row_dense(1)[1] == 0.0);
  REQUIRE(constant == std::vector<Index>{1});
  CHECK(out.label(0) == 1.0);
  CHECK(out.label(1) == -1.0);
}

TEST_CASE("standardize statistics and idempotence") {
  std::mt19937_64 rng(33);
  Dataset::DenseMatrix X(40, 6);
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = 0; j < X.cols(); ++j) X(i, j) = 3.0 * random_vec(1, rng)[0] + 1.5;
  Eigen::VectorXd y = Eigen::VectorXd::Ones(40);
  const Dataset once = standardize(Dataset(X, y));
  const Dataset twice = standardize(once);

  const Dataset::DenseMatrix& M = once.dense_matrix();
  for (Index j = 0; j < M.cols(); ++j) {
    CHECK(std::abs(M.col(j).mean()) <= 1e-12);
    CHECK(std::abs(M.col(j).squaredNorm() / static_cast<double>(M.rows()) - 1.0) <= 1e-10);
  }
  CHECK((twice.dense_matrix() - M).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("normalize_rows scales nonzero rows and keeps zero rows") {
  Dataset::DenseMatrix X(3, 2);
  X << 3, 4, 0.6, 0.8, 0, 0;
  Eigen::VectorXd y(3);
  y << 1, -1, 1;
  const Dataset out = normalize_rows(Dataset(X, y));
  CHECK(out.row_dense(0)[0] == Catch::Approx(0.6).margin(1e-15));
  CHECK(out.row_dense(0)[1] == Catch::Approx(0.8).margin(1e-15));
  CHECK((out.row_dense(1) - vec({0.6, 0.8})).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(out.row_dense(2).norm() == 0.0);

  const Dataset again = normalize_rows(out);
  CHECK((again.dense_matrix() - out.dense_matrix()).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("normalize_rows on sparse storage") {
  SparseRow r0, r1;
  r0.indices = {0, 2};
  r0.values = {3.0, 4.0};
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(2);
  const Dataset data(4, {r0, r1}, y);
  const Dataset out = normalize_rows(data);
  REQUIRE(out.is_sparse());
  CHECK(out.row_sqnorm(0) == Catch::Approx(1.0).margin(1e-15));
  CHECK(out.row_sqnorm(1) == 0.0);
}

TEST_CASE("Dataset shape, density, and validation") {
  Dataset::DenseMatrix X(2, 3);
  X << 1, 0, 2, 0, 0, 0;
  Eigen::VectorXd y(2);
  y << 1, -1;
  const Dataset dense(X, y);
  CHECK(dense.rows() == 2);
  CHECK(dense.cols() == 3);
  CHECK_FALSE(dense.is_sparse());
  CHECK(dense.nnz() == 2);
  CHECK(dense.density() == Catch::Approx(2.0 / 6.0));

  CHECK_THROWS_AS(Dataset(3, std::vector<SparseRow>{}, Eigen::VectorXd{}), std::invalid_argument);

  SparseRow bad;
  bad.indices = {5};
  bad.values = {1.0};
  CHECK_THROWS_AS(Dataset(3, std::vector<SparseRow>{bad}, Eigen::VectorXd::Ones(1)),
                  std::invalid_argument);
}

TEST_CASE("all_finite flags non-finite entries") {
  CHECK(all_finite(vec({1, 2, 3})));
  ParamVector v = vec({1, 2, 3});
  v[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(all_finite(v));
  v[1] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(all_finite(v));
}
