#pragma once

// Exact verification at desk scale: full enumeration of a sampling's law,
// the ESO inequality, probability-matrix identities and normalized
// eigenvalues. Everything here is dense and brute force on purpose.

#include <cstddef>
#include <span>
#include <vector>

#include "dfsdca/dataset.hpp"
#include "dfsdca/dense.hpp"
#include "dfsdca/sampling.hpp"

namespace dfsdca::oracle {

inline constexpr std::size_t kMaxOutcomes = 1'000'000;
inline constexpr std::size_t kMaxDense = 64;

struct Outcome {
  std::vector<std::size_t> indices;  // sorted
  double probability = 0.0;
};

struct EnumeratedSampling {
  std::size_t n = 0;
  std::vector<Outcome> outcomes;

  double total_probability() const;
  std::vector<double> marginals() const;
};

/// Cartesian product of the buckets with product probabilities.
EnumeratedSampling enumerate_bucket_sampling(const BucketPlan& plan);
/// All C(n, tau) subsets, equally likely.
EnumeratedSampling enumerate_tau_nice(std::size_t n, std::size_t tau);
/// Singletons {i} with probability p_i.
EnumeratedSampling enumerate_serial(std::span<const double> p);

/// E || sum_{i in S} h_i X_:i ||^2
double exact_eso_lhs(const SparseColumnMatrix& x, const EnumeratedSampling& sampling,
                     std::span<const double> h);

struct EsoCheckReport {
  std::size_t checks = 0;
  std::size_t violations = 0;        // relative violation beyond tolerance
  double max_violation = 0.0;        // max (lhs - rhs) / rhs over probed h
  double min_slack_ratio = 0.0;      // min rhs / lhs (tightness; >= 1 when valid)
  double tolerance = 1e-10;

  bool passed() const noexcept { return violations == 0; }
};

/// Probes E||sum h_i X_:i||^2 <= sum p_i v_i h_i^2 with `trials` standard
/// normal h plus every unit vector.
EsoCheckReport check_eso(const SparseColumnMatrix& x, const EnumeratedSampling& sampling,
                         std::span<const double> v, std::size_t trials, Rng& rng,
                         double tolerance = 1e-10);
EsoCheckReport check_eso(const SparseColumnMatrix& x, const BucketPlan& plan,
                         std::span<const double> v, std::size_t trials, Rng& rng,
                         double tolerance = 1e-10);

/// P_ij from the enumeration.
DenseMatrix probability_matrix(const EnumeratedSampling& sampling);

/// P(J) o M: keeps rows and columns in J, zeroes the rest.
DenseMatrix restrict_to(const DenseMatrix& m, std::span<const std::uint32_t> support);

/// lambda'(M) = max { h^T M h : h^T Diag(M) h <= 1 }; the largest eigenvalue
/// of D^{-1/2} M D^{-1/2} on the support of the diagonal. 0 for a zero matrix.
double lambda_prime(const DenseMatrix& m);

struct LemmaReport {
  bool lemma1 = true;
  double lemma1_max_error = 0.0;
  bool lemma2 = true;
  double lemma2_min_eigenvalue = 0.0;
  bool lemma3 = true;
  double lemma3_min_eigenvalue = 0.0;
};

/// Probability matrix from enumeration vs p p^T o (E - B) + Diag(p), to 1e-12.
bool check_lemma1(const BucketPlan& plan, double* max_error = nullptr);

/// P(J) o B - P(J)/omega'_J  and  (sum_J p) Diag(P(J o S)) - P(J) o p p^T
/// are both PSD (smallest eigenvalue >= -1e-10). n <= 32.
bool check_lemma2_lemma3(std::span<const std::size_t> support, const BucketPlan& plan,
                         LemmaReport* report = nullptr);

/// v_i = sum_j lambda'(P(J_j o S)) X_ji^2, the tight ESO parameters the
/// closed-form bucket formula bounds from above.
std::vector<double> lambda_prime_v(const Dataset& data, const BucketPlan& plan);

}  // namespace dfsdca::oracle
