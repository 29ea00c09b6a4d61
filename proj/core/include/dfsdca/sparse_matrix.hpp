#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dfsdca {

/// Read-only view of one column X_:i of a SparseColumnMatrix.
struct ColumnView {
  std::span<const std::uint32_t> rows;
  std::span<const double> values;

  std::size_t size() const noexcept { return rows.size(); }
  double dot(std::span<const double> w) const noexcept {
    double acc = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) acc += values[k] * w[rows[k]];
    return acc;
  }
  /// w += a * X_:i
  void axpy(double a, std::span<double> w) const noexcept {
    for (std::size_t k = 0; k < rows.size(); ++k) w[rows[k]] += a * values[k];
  }
  double squared_norm() const noexcept {
    double acc = 0.0;
    for (double v : values) acc += v * v;
    return acc;
  }
};

/// d x n matrix stored column-major (CSC). Columns are examples.
///
/// Invariants enforced at construction: row indices are in [0, d) and
/// strictly increasing within a column, no explicit zeros are stored.
/// Empty columns are allowed here; Dataset rejects them.
class SparseColumnMatrix {
 public:
  class Builder;

  SparseColumnMatrix() = default;
  SparseColumnMatrix(std::size_t rows, std::vector<std::size_t> col_ptr,
                     std::vector<std::uint32_t> row_idx, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return col_ptr_.empty() ? 0 : col_ptr_.size() - 1; }
  std::size_t nnz() const noexcept { return values_.size(); }

  ColumnView column(std::size_t i) const noexcept {
    const std::size_t b = col_ptr_[i], e = col_ptr_[i + 1];
    return {std::span<const std::uint32_t>(row_idx_).subspan(b, e - b),
            std::span<const double>(values_).subspan(b, e - b)};
  }

  std::span<const std::size_t> col_ptr() const noexcept { return col_ptr_; }
  std::span<const std::uint32_t> row_indices() const noexcept { return row_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Dense value X_ji (linear search in the column; for oracles and tests).
  double at(std::size_t row, std::size_t col) const noexcept;

  /// Returns a copy where column i is multiplied by scale[i].
  SparseColumnMatrix scale_columns(std::span<const double> scale) const;

 private:
  std::size_t rows_ = 0;
  std::vector<std::size_t> col_ptr_{0};
  std::vector<std::uint32_t> row_idx_;
  std::vector<double> values_;
};

/// Column-by-column construction; entries within a column must be pushed in
/// increasing row order. Zero values are skipped.
class SparseColumnMatrix::Builder {
 public:
  explicit Builder(std::size_t rows) : rows_(rows) {}
  void push(std::uint32_t row, double value);
  void finish_column() { col_ptr_.push_back(values_.size()); }
  SparseColumnMatrix build() &&;

 private:
  std::size_t rows_;
  std::vector<std::size_t> col_ptr_{0};
  std::vector<std::uint32_t> row_idx_;
  std::vector<double> values_;
};

/// L_i = sum_j X_ji^2 for every column.
std::vector<double> column_squared_norms(const SparseColumnMatrix& x);

}  // namespace dfsdca
