#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "miso/dataset.hpp"
#include "miso/linalg.hpp"

namespace miso {

enum class DataKind { dense_gaussian, sparse_bernoulli_gaussian };
enum class LabelModel { logistic_planted, linear_noise };

struct DataGenSpec {
  DataKind kind = DataKind::dense_gaussian;
  Index T = 100;
  Index p = 10;
  double density = 1.0;  // sparse kind: per-entry Bernoulli probability
  LabelModel label_model = LabelModel::logistic_planted;
  double sigma = 0.1;        // linear_noise only
  double theta_scale = 5.0;  // ||theta_true||
  Index planted_nnz = 0;     // 0: fully dense ground truth
  std::uint64_t seed = 0;
};

struct GeneratedData {
  Dataset data;
  ParamVector theta_true;
};

inline GeneratedData gen_data(const DataGenSpec& spec) {
  if (spec.T < 1 || spec.p < 1) throw std::invalid_argument("gen_data: T and p must be >= 1");
  if (spec.density <= 0.0 || spec.density > 1.0)
    throw std::invalid_argument("gen_data: density must lie in (0,1]");
  if (spec.planted_nnz < 0 || spec.planted_nnz > spec.p)
    throw std::invalid_argument("gen_data: planted_nnz out of range");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ParamVector theta_true = ParamVector::Zero(spec.p);
  if (spec.planted_nnz > 0) {
    std::vector<Index> idx(spec.p);
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index i = 0; i < spec.planted_nnz; ++i) {
      std::uniform_int_distribution<Index> pick(i, spec.p - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    for (Index i = 0; i < spec.planted_nnz; ++i) theta_true[idx[i]] = gauss(rng);
  } else {
    for (Index j = 0; j < spec.p; ++j) theta_true[j] = gauss(rng);
  }
  const double nrm = theta_true.norm();
  if (nrm > 0.0) theta_true *= spec.theta_scale / nrm;

  const bool dense = spec.kind == DataKind::dense_gaussian || spec.density >= 1.0;
  Eigen::VectorXd margins(spec.T);
  Dataset::DenseMatrix X;
  std::vector<SparseRow> rows;
  if (dense) {
    X.resize(spec.T, spec.p);
    for (Index t = 0; t < spec.T; ++t)
      for (Index j = 0; j < spec.p; ++j) X(t, j) = gauss(rng);
    margins = X * theta_true;
  } else {
    rows.reserve(spec.T);
    for (Index t = 0; t < spec.T; ++t) {
      SparseRow row;
      double m = 0.0;
      for (Index j = 0; j < spec.p; ++j) {
        if (unit(rng) < spec.density) {
          const double v = gauss(rng);
          row.indices.push_back(j);
          row.values.push_back(v);
          m += v * theta_true[j];
        }
      }
      margins[t] = m;
      rows.push_back(std::move(row));
    }
  }

  Eigen::VectorXd labels(spec.T);
  for (Index t = 0; t < spec.T; ++t) {
    if (spec.label_model == LabelModel::logistic_planted) {
      const double prob = 1.0 / (1.0 + std::exp(-margins[t]));
      labels[t] = unit(rng) < prob ? 1.0 : -1.0;
    } else {
      labels[t] = margins[t] + spec.sigma * gauss(rng);
    }
  }

  GeneratedData out{dense ? Dataset(std::move(X), std::move(labels))
                          : Dataset(spec.p, rows, std::move(labels)),
                    std::move(theta_true)};
  return out;
}

}  // namespace miso
