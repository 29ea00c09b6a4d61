#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dfsdca/sparse_matrix.hpp"

namespace dfsdca {

/// Transposed sparsity pattern: for each feature j the sorted example set
/// J_j = { i : X_ji != 0 }.
class FeatureIndex {
 public:
  FeatureIndex() = default;
  explicit FeatureIndex(const SparseColumnMatrix& x);

  std::size_t features() const noexcept { return ptr_.empty() ? 0 : ptr_.size() - 1; }
  std::span<const std::uint32_t> support(std::size_t j) const noexcept {
    return std::span<const std::uint32_t>(examples_).subspan(ptr_[j], ptr_[j + 1] - ptr_[j]);
  }
  std::size_t support_size(std::size_t j) const noexcept { return ptr_[j + 1] - ptr_[j]; }

 private:
  std::vector<std::size_t> ptr_{0};
  std::vector<std::uint32_t> examples_;
};

/// Training data: matrix, labels, squared column norms and feature index.
/// Immutable once built; features with empty support are removed and d is
/// shrunk accordingly.
class Dataset {
 public:
  /// Throws dfsdca::Error when labels do not match n, n == 0, or a column
  /// has no nonzero entry.
  Dataset(SparseColumnMatrix x, std::vector<double> labels);

  std::size_t n() const noexcept { return x_.cols(); }
  std::size_t d() const noexcept { return x_.rows(); }
  std::size_t nnz() const noexcept { return x_.nnz(); }

  const SparseColumnMatrix& matrix() const noexcept { return x_; }
  std::span<const double> labels() const noexcept { return y_; }
  std::span<const double> squared_norms() const noexcept { return norms_; }
  const FeatureIndex& feature_index() const noexcept { return index_; }

  /// Stable 64-bit FNV-1a digest over shape, pattern, values and labels.
  std::uint64_t digest() const noexcept;

 private:
  SparseColumnMatrix x_;
  std::vector<double> y_;
  std::vector<double> norms_;
  FeatureIndex index_;
};

/// L_i = ||X_:i||^2, recomputed from the matrix.
std::vector<double> squared_norms(const Dataset& data);

/// Same data with column i rescaled so that ||X_:i||^2 == target[i].
Dataset rescale_to_squared_norms(const Dataset& data, std::span<const double> target);

}  // namespace dfsdca
