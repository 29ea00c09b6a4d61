#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dfsdca/dataset.hpp"
#include "dfsdca/dense.hpp"

namespace dfsdca {

using Rng = std::mt19937_64;

/// Partition B_1..B_tau of [n] into nonempty buckets.
class Partition {
 public:
  Partition() = default;
  /// Buckets given explicitly; validated to be disjoint, nonempty, covering [n].
  Partition(std::size_t n, std::vector<std::vector<std::size_t>> buckets);

  std::size_t n() const noexcept { return assignment_.size(); }
  std::size_t tau() const noexcept { return buckets_.size(); }
  std::size_t bucket_of(std::size_t i) const noexcept { return assignment_[i]; }
  std::span<const std::size_t> bucket(std::size_t l) const noexcept { return buckets_[l]; }
  std::span<const std::size_t> assignment() const noexcept { return assignment_; }
  const std::optional<std::uint64_t>& shuffle_seed() const noexcept { return shuffle_seed_; }

 private:
  friend Partition make_partition(std::size_t, std::size_t, std::optional<std::uint64_t>);
  std::vector<std::vector<std::size_t>> buckets_;
  std::vector<std::size_t> assignment_;
  std::optional<std::uint64_t> shuffle_seed_;
};

/// Contiguous blocks of size ceil(n/tau) or floor(n/tau) over [0, n), or over
/// a seeded shuffle of it. Throws when tau == 0 or tau > n.
Partition make_partition(std::size_t n, std::size_t tau,
                         std::optional<std::uint64_t> shuffle_seed = std::nullopt);

/// A bucket sampling: a partition and a probability vector p with
/// sum_{i in B_l} p_i = 1 for every bucket and p_i > 0.
class BucketPlan {
 public:
  /// Throws when p has the wrong size, an entry below 1e-15, or a bucket sum
  /// off by more than 1e-12.
  BucketPlan(Partition partition, std::vector<double> p);

  /// p_i = 1 / |B_l(i)|.
  static BucketPlan uniform(Partition partition);

  const Partition& partition() const noexcept { return partition_; }
  std::span<const double> p() const noexcept { return p_; }
  std::size_t n() const noexcept { return p_.size(); }
  std::size_t tau() const noexcept { return partition_.tau(); }

  /// One index per bucket, each drawn independently with the conditional
  /// probabilities of its bucket. `out` is resized to tau.
  void draw(Rng& rng, std::vector<std::size_t>& out) const;

  /// Provenance: bucket sizes, digest of p, shuffle seed, as JSON text.
  std::string to_json() const;

 private:
  std::size_t draw_in_bucket(std::size_t l, double u) const;

  Partition partition_;
  std::vector<double> p_;
  std::vector<double> cumulative_;  // per-bucket prefix sums, laid out bucket by bucket
  std::vector<std::size_t> offset_;
};

std::vector<std::size_t> draw_bucket_sample(const BucketPlan& plan, Rng& rng);

/// Uniform tau-subsets of [n] via partial Fisher-Yates on a persistent
/// permutation; each draw is O(tau).
class TauNiceSampler {
 public:
  TauNiceSampler(std::size_t n, std::size_t tau);
  std::span<const std::size_t> draw(Rng& rng);
  std::size_t n() const noexcept { return perm_.size(); }
  std::size_t tau() const noexcept { return tau_; }

 private:
  std::vector<std::size_t> perm_;
  std::size_t tau_;
};

std::vector<std::size_t> draw_tau_nice(std::size_t n, std::size_t tau, Rng& rng);

/// P_ij = Prob(i in S, j in S) for the bucket sampling. Dense; n <= 4096.
DenseMatrix probability_matrix(const BucketPlan& plan);

/// omega'_j = number of buckets meeting J_j, for every feature.
std::vector<std::size_t> bucket_intersection_counts(const Partition& partition,
                                                    const FeatureIndex& index);

enum class SamplingKind { serial_uniform, serial_importance, tau_nice, bucket };

std::string to_string(SamplingKind kind);

/// Description of a sampling S-hat for the solver.
struct SamplingSpec {
  SamplingKind kind = SamplingKind::serial_uniform;
  std::size_t tau = 1;
  std::vector<double> probabilities;         // serial_importance
  std::shared_ptr<const BucketPlan> plan;    // bucket
  std::uint64_t seed = 0;

  static SamplingSpec serial_uniform(std::uint64_t seed = 0);
  static SamplingSpec serial_importance(std::vector<double> p, std::uint64_t seed = 0);
  static SamplingSpec tau_nice(std::size_t tau, std::uint64_t seed = 0);
  static SamplingSpec bucket(std::shared_ptr<const BucketPlan> plan, std::uint64_t seed = 0);

  /// Throws when the payload does not match the kind or n.
  void validate(std::size_t n) const;
  /// p_i = Prob(i in S).
  std::vector<double> marginals(std::size_t n) const;
  std::size_t batch_size() const noexcept;
};

/// Stateful draw engine for a SamplingSpec; owns its RNG stream.
class Sampler {
 public:
  Sampler(const SamplingSpec& spec, std::size_t n);
  std::span<const std::size_t> draw();

 private:
  SamplingKind kind_;
  Rng rng_;
  std::shared_ptr<const BucketPlan> plan_;
  std::optional<TauNiceSampler> nice_;
  std::vector<std::size_t> buffer_;
};

}  // namespace dfsdca
