#pragma once

#include <cassert>
#include <algorithm>
#include <cstddef>
#include <vector>

namespace dfsdca {

/// Row-major dense matrix used for the desk-scale oracles and the Newton
/// solve of the reference problem.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }

  bool is_symmetric(double tol) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool DenseMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = i + 1; j < cols_; ++j) {
      const double a = (*this)(i, j), b = (*this)(j, i);
      const double scale = std::max({1.0, a < 0 ? -a : a, b < 0 ? -b : b});
      if ((a - b > tol * scale) || (b - a > tol * scale)) return false;
    }
  return true;
}

}  // namespace dfsdca
