#include "dfsdca/sparse_matrix.hpp"

#include <algorithm>
#include <string>

#include "dfsdca/error.hpp"

namespace dfsdca {

SparseColumnMatrix::SparseColumnMatrix(std::size_t rows, std::vector<std::size_t> col_ptr,
                                       std::vector<std::uint32_t> row_idx,
                                       std::vector<double> values)
    : rows_(rows),
      col_ptr_(std::move(col_ptr)),
      row_idx_(std::move(row_idx)),
      values_(std::move(values)) {
  if (col_ptr_.empty() || col_ptr_.front() != 0 || col_ptr_.back() != values_.size() ||
      row_idx_.size() != values_.size())
    throw Error("sparse matrix: inconsistent CSC arrays");
  for (std::size_t c = 0; c + 1 < col_ptr_.size(); ++c) {
    if (col_ptr_[c] > col_ptr_[c + 1]) throw Error("sparse matrix: column pointers decrease");
    for (std::size_t k = col_ptr_[c]; k < col_ptr_[c + 1]; ++k) {
      if (row_idx_[k] >= rows_)
        throw Error("sparse matrix: row index out of range in column " + std::to_string(c));
      if (k > col_ptr_[c] && row_idx_[k] <= row_idx_[k - 1])
        throw Error("sparse matrix: row indices not strictly increasing in column " +
                    std::to_string(c));
      if (values_[k] == 0.0)
        throw Error("sparse matrix: explicit zero in column " + std::to_string(c));
    }
  }
}

double SparseColumnMatrix::at(std::size_t row, std::size_t col) const noexcept {
  const auto c = column(col);
  const auto it = std::lower_bound(c.rows.begin(), c.rows.end(), row);
  if (it == c.rows.end() || *it != row) return 0.0;
  return c.values[static_cast<std::size_t>(it - c.rows.begin())];
}

SparseColumnMatrix SparseColumnMatrix::scale_columns(std::span<const double> scale) const {
  if (scale.size() != cols()) throw Error("scale_columns: size mismatch");
  SparseColumnMatrix out = *this;
  for (std::size_t c = 0; c < cols(); ++c) {
    if (!(scale[c] != 0.0)) throw Error("scale_columns: zero scale");
    for (std::size_t k = col_ptr_[c]; k < col_ptr_[c + 1]; ++k) out.values_[k] *= scale[c];
  }
  return out;
}

void SparseColumnMatrix::Builder::push(std::uint32_t row, double value) {
  if (value == 0.0) return;
  row_idx_.push_back(row);
  values_.push_back(value);
}

SparseColumnMatrix SparseColumnMatrix::Builder::build() && {
  return SparseColumnMatrix(rows_, std::move(col_ptr_), std::move(row_idx_), std::move(values_));
}

std::vector<double> column_squared_norms(const SparseColumnMatrix& x) {
  std::vector<double> out(x.cols());
  for (std::size_t i = 0; i < x.cols(); ++i) out[i] = x.column(i).squared_norm();
  return out;
}

}  // namespace dfsdca
