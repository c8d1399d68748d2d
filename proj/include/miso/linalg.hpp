#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace miso {

using ParamVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool all_finite(const ParamVector& v) {
  return v.allFinite();
}

// One example row in compressed form: strictly increasing 0-based indices,
// explicit zeros are not stored.
struct SparseRow {
  std::vector<Index> indices;
  std::vector<double> values;

  Index nnz() const { return static_cast<Index>(indices.size()); }

  void validate(Index dim) const {
    if (indices.size() != values.size())
      throw std::invalid_argument("SparseRow: indices/values length mismatch");
    Index prev = -1;
    for (std::size_t k = 0; k < indices.size(); ++k) {
      if (indices[k] <= prev)
        throw std::invalid_argument("SparseRow: indices must be strictly increasing");
      if (indices[k] >= dim) {
        std::ostringstream msg;
        msg << "SparseRow: index " << indices[k] << " out of range for dimension " << dim;
        throw std::invalid_argument(msg.str());
      }
      prev = indices[k];
    }
  }

  double squared_norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return s;
  }

  ParamVector to_dense(Index dim) const {
    validate(dim);
    ParamVector out = ParamVector::Zero(dim);
    for (std::size_t k = 0; k < indices.size(); ++k) out[indices[k]] = values[k];
    return out;
  }
};

inline void check_same_dim(Index a, Index b, const char* op) {
  if (a != b) {
    std::ostringstream msg;
    msg << op << ": dimension mismatch (" << a << " vs " << b << ")";
    throw std::invalid_argument(msg.str());
  }
}

inline double dot(const ParamVector& a, const ParamVector& b) {
  check_same_dim(a.size(), b.size(), "dot");
  return a.dot(b);
}

inline double dot(const SparseRow& a, const ParamVector& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.indices.size(); ++k) {
    if (a.indices[k] >= b.size())
      throw std::invalid_argument("dot: sparse index out of range");
    s += a.values[k] * b[a.indices[k]];
  }
  return s;
}

// y + alpha * x, leaving y untouched.
inline ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y) {
  check_same_dim(x.size(), y.size(), "axpy");
  return y + alpha * x;
}

inline void axpy_inplace(double alpha, const SparseRow& x, ParamVector& y) {
  for (std::size_t k = 0; k < x.indices.size(); ++k) {
    if (x.indices[k] >= y.size())
      throw std::invalid_argument("axpy: sparse index out of range");
    y[x.indices[k]] += alpha * x.values[k];
  }
}

inline ParamVector axpy(double alpha, const SparseRow& x, const ParamVector& y) {
  ParamVector out = y;
  axpy_inplace(alpha, x, out);
  return out;
}

}  // namespace miso
