#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ecit/error.hpp"

namespace ecit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr Eigen::Index kMinRows = 8;

// (x, y, z) samples sharing one row index. z may have zero columns, which
// makes every test unconditional.
class DataTriple {
 public:
  DataTriple(Matrix x, Matrix y, Matrix z)
      : x_(std::move(x)), y_(std::move(y)), z_(std::move(z)) {
    if (z_.size() == 0 && z_.rows() != x_.rows()) z_.resize(x_.rows(), 0);
    if (x_.rows() != y_.rows() || x_.rows() != z_.rows()) {
      throw DataError("row counts differ: x " + std::to_string(x_.rows()) + ", y " +
                      std::to_string(y_.rows()) + ", z " + std::to_string(z_.rows()));
    }
    if (x_.cols() < 1 || y_.cols() < 1) {
      throw DataError("x and y need at least one column each");
    }
    if (x_.rows() < kMinRows) {
      throw DataError("need at least " + std::to_string(kMinRows) + " rows, got " +
                      std::to_string(x_.rows()));
    }
    check_finite(x_, "x");
    check_finite(y_, "y");
    check_finite(z_, "z");
  }

  DataTriple(Matrix x, Matrix y) : DataTriple(std::move(x), std::move(y), Matrix()) {}

  const Matrix& x() const noexcept { return x_; }
  const Matrix& y() const noexcept { return y_; }
  const Matrix& z() const noexcept { return z_; }
  Eigen::Index n() const noexcept { return x_.rows(); }
  Eigen::Index dx() const noexcept { return x_.cols(); }
  Eigen::Index dy() const noexcept { return y_.cols(); }
  Eigen::Index dz() const noexcept { return z_.cols(); }

  DataTriple rows(std::span<const Eigen::Index> idx) const {
    return DataTriple(take(x_, idx), take(y_, idx), take(z_, idx));
  }

 private:
  static Matrix take(const Matrix& m, std::span<const Eigen::Index> idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
    }
    return out;
  }

  static void check_finite(const Matrix& m, const char* block) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (!std::isfinite(m(i, j))) {
          throw DataError(std::string("non-finite value in ") + block + "[" +
                          std::to_string(j) + "] at row " + std::to_string(i));
        }
      }
    }
  }

  Matrix x_;
  Matrix y_;
  Matrix z_;
};

// Pick columns out of a data matrix.
inline Matrix select_columns(const Matrix& data, std::span<const Eigen::Index> cols) {
  Matrix out(data.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] < 0 || cols[j] >= data.cols()) {
      throw DataError("column index " + std::to_string(cols[j]) + " out of range (" +
                      std::to_string(data.cols()) + " columns)");
    }
    out.col(static_cast<Eigen::Index>(j)) = data.col(cols[j]);
  }
  return out;
}

inline DataTriple make_triple(const Matrix& data, std::span<const Eigen::Index> x,
                              std::span<const Eigen::Index> y,
                              std::span<const Eigen::Index> z) {
  return DataTriple(select_columns(data, x), select_columns(data, y),
                    select_columns(data, z));
}

// Zero mean, unit (n-1) variance per column. A constant column is an error
// naming the block and column.
inline Matrix standardize(const Matrix& m, const std::string& block) {
  Matrix out = m;
  const double denom = static_cast<double>(std::max<Eigen::Index>(m.rows() - 1, 1));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double mean = out.col(j).mean();
    out.col(j).array() -= mean;
    const double sd = std::sqrt(out.col(j).squaredNorm() / denom);
    if (!(sd > 0.0) || sd <= 1e-12 * (std::abs(mean) + 1.0)) {
      throw DataError("column " + block + "[" + std::to_string(j) +
                      "] is constant; the kernel bandwidth would be zero");
    }
    out.col(j) /= sd;
  }
  return out;
}

}  // namespace ecit
