#include "dfsdca/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dfsdca/error.hpp"

namespace dfsdca {

LossKind parse_loss_kind(std::string_view name) {
  if (name == "logistic") return LossKind::logistic;
  if (name == "square") return LossKind::square;
  throw Error("unknown loss '" + std::string(name) + "'");
}

std::string to_string(LossKind kind) {
  return kind == LossKind::logistic ? "logistic" : "square";
}

double LossModel::value(double z, double y) const noexcept {
  if (kind_ == LossKind::square) return 0.5 * (z - y) * (z - y);
  const double m = y * z;
  return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

double LossModel::derivative(double z, double y) const noexcept {
  if (kind_ == LossKind::square) return z - y;
  const double m = std::clamp(y * z, -500.0, 500.0);
  return -y / (1.0 + std::exp(m));
}

double LossModel::second_derivative(double z, double y) const noexcept {
  if (kind_ == LossKind::square) return 1.0;
  const double e = std::exp(-std::abs(std::clamp(y * z, -500.0, 500.0)));
  return y * y * e / ((1.0 + e) * (1.0 + e));
}

void LossModel::validate_labels(std::span<const double> labels) const {
  if (kind_ != LossKind::logistic) return;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != 1.0 && labels[i] != -1.0)
      throw Error("logistic loss needs labels in {-1,+1}; example " + std::to_string(i) +
                  " has " + std::to_string(labels[i]));
}

}  // namespace dfsdca
