#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dfsdca/dataset.hpp"

namespace dfsdca {

/// Laws for the squared example norms L_i = ||X_:i||^2.
enum class NormDistribution { uniform, chisq1, chisq10, chisq100, extreme };

NormDistribution parse_norm_distribution(std::string_view name);
std::string to_string(NormDistribution dist);

struct SyntheticSpec {
  std::size_t n = 0;
  std::size_t d = 0;
  double omega = 0.1;  // target mean feature density in (0, 1]
  NormDistribution dist = NormDistribution::uniform;
  std::uint64_t seed = 0;
};

/// Draws n squared norms from `dist`:
///   uniform   2 U(0,1)
///   chisqK    chi-squared with K degrees of freedom (sum of K squared normals)
///   extreme   all ones except L_0 = 1000
std::vector<double> draw_squared_norms(NormDistribution dist, std::size_t n,
                                       std::mt19937_64& rng);

/// Sparse random design with per-feature densities of mean `omega`, standard
/// normal nonzeros, columns rescaled to norms drawn from `dist`, and labels
/// from the sign of a planted linear model plus noise. Pure function of spec.
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace dfsdca
