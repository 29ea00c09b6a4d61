#pragma once

#include <span>
#include <string>
#include <string_view>

namespace dfsdca {

enum class LossKind { logistic, square };

LossKind parse_loss_kind(std::string_view name);
std::string to_string(LossKind kind);

/// Per-example loss phi_i(z) with label y_i; convex and (1/gamma)-smooth.
///   logistic: log(1 + exp(-y z)), gamma = 4   (labels must be +-1)
///   square:   (z - y)^2 / 2,      gamma = 1
class LossModel {
 public:
  explicit LossModel(LossKind kind) : kind_(kind) {}

  LossKind kind() const noexcept { return kind_; }
  double gamma() const noexcept { return kind_ == LossKind::logistic ? 4.0 : 1.0; }

  double value(double z, double y) const noexcept;
  double derivative(double z, double y) const noexcept;
  double second_derivative(double z, double y) const noexcept;

  /// Throws dfsdca::Error for labels the loss cannot take.
  void validate_labels(std::span<const double> labels) const;

 private:
  LossKind kind_;
};

}  // namespace dfsdca
