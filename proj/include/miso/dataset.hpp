#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "miso/linalg.hpp"

namespace miso {

// Design matrix plus labels. Rows are examples; storage is either dense
// row-major or CSR, selected at construction. Row squared norms are cached.
class Dataset {
 public:
  using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Dataset() = default;

  Dataset(DenseMatrix X, Eigen::VectorXd labels)
      : p_(X.cols()), labels_(std::move(labels)), dense_(std::move(X)), sparse_(false) {
    if (dense_.rows() == 0) throw std::invalid_argument("Dataset: no examples");
    check_same_dim(dense_.rows(), labels_.size(), "Dataset labels");
    cache_norms();
  }

  Dataset(Index p, const std::vector<SparseRow>& rows, Eigen::VectorXd labels)
      : p_(p), labels_(std::move(labels)), sparse_(true) {
    if (rows.empty()) throw std::invalid_argument("Dataset: no examples");
    check_same_dim(static_cast<Index>(rows.size()), labels_.size(), "Dataset labels");
    row_ptr_.reserve(rows.size() + 1);
    row_ptr_.push_back(0);
    for (const SparseRow& r : rows) {
      r.validate(p_);
      col_.insert(col_.end(), r.indices.begin(), r.indices.end());
      val_.insert(val_.end(), r.values.begin(), r.values.end());
      row_ptr_.push_back(static_cast<Index>(col_.size()));
    }
    cache_norms();
  }

  Index rows() const { return sparse_ ? static_cast<Index>(row_ptr_.size()) - 1 : dense_.rows(); }
  Index cols() const { return p_; }
  bool is_sparse() const { return sparse_; }
  double label(Index t) const { return labels_[t]; }
  const Eigen::VectorXd& labels() const { return labels_; }

  double row_dot(Index t, const ParamVector& theta) const {
    check_same_dim(p_, theta.size(), "row_dot");
    if (!sparse_) return dense_.row(t).dot(theta);
    double s = 0.0;
    for (Index k = row_ptr_[t]; k < row_ptr_[t + 1]; ++k) s += val_[k] * theta[col_[k]];
    return s;
  }

  // theta += alpha * x_t
  void row_axpy(Index t, double alpha, ParamVector& theta) const {
    check_same_dim(p_, theta.size(), "row_axpy");
    if (!sparse_) {
      theta += alpha * dense_.row(t).transpose();
      return;
    }
    for (Index k = row_ptr_[t]; k < row_ptr_[t + 1]; ++k) theta[col_[k]] += alpha * val_[k];
  }

  double row_sqnorm(Index t) const { return sqnorms_[t]; }

  ParamVector row_dense(Index t) const {
    ParamVector out = ParamVector::Zero(p_);
    row_axpy(t, 1.0, out);
    return out;
  }

  SparseRow row_sparse(Index t) const {
    SparseRow r;
    if (sparse_) {
      for (Index k = row_ptr_[t]; k < row_ptr_[t + 1]; ++k) {
        r.indices.push_back(col_[k]);
        r.values.push_back(val_[k]);
      }
    } else {
      for (Index j = 0; j < p_; ++j) {
        if (dense_(t, j) != 0.0) {
          r.indices.push_back(j);
          r.values.push_back(dense_(t, j));
        }
      }
    }
    return r;
  }

  Index nnz() const {
    if (sparse_) {
      Index n = 0;
      for (double v : val_)
        if (v != 0.0) ++n;
      return n;
    }
    Index n = 0;
    for (Index t = 0; t < dense_.rows(); ++t)
      for (Index j = 0; j < p_; ++j)
        if (dense_(t, j) != 0.0) ++n;
    return n;
  }

  double density() const {
    return static_cast<double>(nnz()) / (static_cast<double>(rows()) * static_cast<double>(p_));
  }

  const DenseMatrix& dense_matrix() const {
    if (sparse_) throw std::logic_error("Dataset: dense_matrix() on sparse storage");
    return dense_;
  }

 private:
  void cache_norms() {
    const Index T = rows();
    sqnorms_.resize(T);
    if (sparse_) {
      for (Index t = 0; t < T; ++t) {
        double s = 0.0;
        for (Index k = row_ptr_[t]; k < row_ptr_[t + 1]; ++k) s += val_[k] * val_[k];
        sqnorms_[t] = s;
      }
    } else {
      for (Index t = 0; t < T; ++t) sqnorms_[t] = dense_.row(t).squaredNorm();
    }
  }

  Index p_ = 0;
  Eigen::VectorXd labels_;
  DenseMatrix dense_;
  bool sparse_ = false;
  std::vector<Index> row_ptr_, col_;
  std::vector<double> val_;
  Eigen::VectorXd sqnorms_;
};

// Center each feature and scale it to unit (population) variance. Constant
// features cannot be scaled; they are zeroed out and reported through
// `constant_features` when a sink is given.
inline Dataset standardize(const Dataset& data, std::vector<Index>* constant_features = nullptr) {
  if (data.is_sparse())
    throw std::invalid_argument("standardize: requires dense storage");
  Dataset::DenseMatrix X = data.dense_matrix();
  const Index T = X.rows(), p = X.cols();
  for (Index j = 0; j < p; ++j) {
    const double mean = X.col(j).mean();
    X.col(j).array() -= mean;
    const double var = X.col(j).squaredNorm() / static_cast<double>(T);
    if (var <= 0.0) {
      X.col(j).setZero();
      if (constant_features) constant_features->push_back(j);
      continue;
    }
    X.col(j) /= std::sqrt(var);
  }
  return Dataset(std::move(X), data.labels());
}

inline Dataset normalize_rows(const Dataset& data) {
  const Index T = data.rows();
  if (!data.is_sparse()) {
    Dataset::DenseMatrix X = data.dense_matrix();
    for (Index t = 0; t < T; ++t) {
      const double nrm = X.row(t).norm();
      if (nrm > 0.0) X.row(t) /= nrm;
    }
    return Dataset(std::move(X), data.labels());
  }
  std::vector<SparseRow> rows;
  rows.reserve(T);
  for (Index t = 0; t < T; ++t) {
    SparseRow r = data.row_sparse(t);
    const double nrm = std::sqrt(r.squared_norm());
    if (nrm > 0.0)
      for (double& v : r.values) v /= nrm;
    rows.push_back(std::move(r));
  }
  return Dataset(data.cols(), rows, data.labels());
}

}  // namespace miso
