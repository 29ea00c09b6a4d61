#include "dfsdca/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "dfsdca/error.hpp"

namespace dfsdca {

NormDistribution parse_norm_distribution(std::string_view name) {
  if (name == "uniform") return NormDistribution::uniform;
  if (name == "chisq1") return NormDistribution::chisq1;
  if (name == "chisq10") return NormDistribution::chisq10;
  if (name == "chisq100") return NormDistribution::chisq100;
  if (name == "extreme") return NormDistribution::extreme;
  throw Error("unknown norm distribution '" + std::string(name) + "'");
}

std::string to_string(NormDistribution dist) {
  switch (dist) {
    case NormDistribution::uniform: return "uniform";
    case NormDistribution::chisq1: return "chisq1";
    case NormDistribution::chisq10: return "chisq10";
    case NormDistribution::chisq100: return "chisq100";
    case NormDistribution::extreme: return "extreme";
  }
  return "unknown";
}

std::vector<double> draw_squared_norms(NormDistribution dist, std::size_t n,
                                       std::mt19937_64& rng) {
  std::vector<double> L(n, 1.0);
  std::normal_distribution<double> normal;
  const auto chisq = [&](int k) {
    for (auto& l : L) {
      double acc = 0.0;
      for (int r = 0; r < k; ++r) {
        const double z = normal(rng);
        acc += z * z;
      }
      l = acc;
    }
  };
  switch (dist) {
    case NormDistribution::uniform: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (auto& l : L) {
        do l = 2.0 * u(rng);
        while (l == 0.0);
      }
      break;
    }
    case NormDistribution::chisq1: chisq(1); break;
    case NormDistribution::chisq10: chisq(10); break;
    case NormDistribution::chisq100: chisq(100); break;
    case NormDistribution::extreme:
      if (n > 0) L[0] = 1000.0;
      break;
  }
  // A chi-squared draw of exactly zero has probability zero but would break
  // the positive-norm invariant.
  for (auto& l : L)
    if (!(l > 0.0)) l = std::numeric_limits<double>::min();
  return L;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 2) throw Error("synthetic: n must be at least 2");
  if (spec.d < 1) throw Error("synthetic: d must be at least 1");
  if (!(spec.omega > 0.0 && spec.omega <= 1.0)) throw Error("synthetic: omega must be in (0, 1]");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Per-feature density with mean omega: U(0, 2 omega) below one half,
  // U(2 omega - 1, 1) above.
  const double lo = spec.omega <= 0.5 ? 0.0 : 2.0 * spec.omega - 1.0;
  const double hi = spec.omega <= 0.5 ? 2.0 * spec.omega : 1.0;
  const double n = static_cast<double>(spec.n);

  std::vector<std::vector<std::pair<std::uint32_t, double>>> columns(spec.n);
  std::vector<std::size_t> perm(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) perm[i] = i;

  for (std::size_t j = 0; j < spec.d; ++j) {
    const double density = std::clamp(lo + (hi - lo) * unit(rng), 1.0 / n, 1.0);
    const auto k = static_cast<std::size_t>(std::llround(density * n));
    for (std::size_t r = 0; r < k; ++r) {
      std::uniform_int_distribution<std::size_t> pick(r, spec.n - 1);
      std::swap(perm[r], perm[pick(rng)]);
      columns[perm[r]].emplace_back(static_cast<std::uint32_t>(j), normal(rng));
    }
  }
  std::uniform_int_distribution<std::uint32_t> any_row(0, static_cast<std::uint32_t>(spec.d - 1));
  for (auto& col : columns) {
    if (col.empty()) {
      double v = 0.0;
      while (v == 0.0) v = normal(rng);
      col.emplace_back(any_row(rng), v);
    }
  }

  std::vector<double> w_bar(spec.d);
  for (auto& w : w_bar) w = normal(rng);
  std::vector<double> labels(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    double z = 0.0;
    for (const auto& [row, v] : columns[i]) z += v * w_bar[row];
    labels[i] = (z + 0.1 * normal(rng)) >= 0.0 ? 1.0 : -1.0;
  }

  SparseColumnMatrix::Builder builder(spec.d);
  for (const auto& col : columns) {
    for (const auto& [row, v] : col) builder.push(row, v);
    builder.finish_column();
  }
  const Dataset raw(std::move(builder).build(), std::move(labels));
  const auto target = draw_squared_norms(spec.dist, spec.n, rng);
  return rescale_to_squared_norms(raw, target);
}

}  // namespace dfsdca
