#include "dfsdca/dataset.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "dfsdca/error.hpp"

namespace dfsdca {
namespace {

// Drops rows (features) with no nonzero and renumbers the rest densely.
SparseColumnMatrix drop_empty_rows(SparseColumnMatrix x) {
  std::vector<std::uint32_t> remap(x.rows(), 0);
  std::vector<bool> used(x.rows(), false);
  for (auto r : x.row_indices()) used[r] = true;
  std::uint32_t next = 0;
  for (std::size_t r = 0; r < x.rows(); ++r)
    if (used[r]) remap[r] = next++;
  if (next == x.rows()) return x;

  std::vector<std::uint32_t> rows(x.row_indices().begin(), x.row_indices().end());
  for (auto& r : rows) r = remap[r];
  return SparseColumnMatrix(next, {x.col_ptr().begin(), x.col_ptr().end()}, std::move(rows),
                            {x.values().begin(), x.values().end()});
}

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < len; ++k) {
      h ^= p[k];
      h *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
};

}  // namespace

FeatureIndex::FeatureIndex(const SparseColumnMatrix& x) {
  ptr_.assign(x.rows() + 1, 0);
  for (auto r : x.row_indices()) ++ptr_[r + 1];
  for (std::size_t j = 0; j < x.rows(); ++j) ptr_[j + 1] += ptr_[j];
  examples_.resize(x.nnz());
  std::vector<std::size_t> fill(ptr_.begin(), ptr_.end() - 1);
  // Columns are visited in increasing order, so each J_j comes out sorted.
  for (std::size_t i = 0; i < x.cols(); ++i)
    for (auto r : x.column(i).rows) examples_[fill[r]++] = static_cast<std::uint32_t>(i);
}

Dataset::Dataset(SparseColumnMatrix x, std::vector<double> labels)
    : x_(drop_empty_rows(std::move(x))), y_(std::move(labels)) {
  if (x_.cols() == 0) throw Error("dataset: no examples");
  if (y_.size() != x_.cols())
    throw Error("dataset: " + std::to_string(y_.size()) + " labels for " +
                std::to_string(x_.cols()) + " examples");
  norms_ = column_squared_norms(x_);
  for (std::size_t i = 0; i < norms_.size(); ++i) {
    if (!(norms_[i] > 0.0) || !std::isfinite(norms_[i]))
      throw Error("dataset: example " + std::to_string(i) + " has no nonzero entry");
  }
  for (double y : y_)
    if (!std::isfinite(y)) throw Error("dataset: non-finite label");
  index_ = FeatureIndex(x_);
}

std::uint64_t Dataset::digest() const noexcept {
  Fnv1a f;
  f.u64(d());
  f.u64(n());
  for (auto c : x_.col_ptr()) f.u64(c);
  for (auto r : x_.row_indices()) f.u64(r);
  for (auto v : x_.values()) f.f64(v);
  for (auto y : y_) f.f64(y);
  return f.h;
}

std::vector<double> squared_norms(const Dataset& data) {
  return column_squared_norms(data.matrix());
}

Dataset rescale_to_squared_norms(const Dataset& data, std::span<const double> target) {
  if (target.size() != data.n()) throw Error("rescale: size mismatch");
  std::vector<double> scale(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (!(target[i] > 0.0)) throw Error("rescale: target norms must be positive");
    scale[i] = std::sqrt(target[i] / data.squared_norms()[i]);
  }
  return Dataset(data.matrix().scale_columns(scale),
                 {data.labels().begin(), data.labels().end()});
}

}  // namespace dfsdca
