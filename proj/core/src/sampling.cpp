#include "dfsdca/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dfsdca/error.hpp"
#include "format.hpp"

namespace dfsdca {

Partition::Partition(std::size_t n, std::vector<std::vector<std::size_t>> buckets)
    : buckets_(std::move(buckets)), assignment_(n, static_cast<std::size_t>(-1)) {
  if (buckets_.empty()) throw Error("partition: no buckets");
  std::size_t covered = 0;
  for (std::size_t l = 0; l < buckets_.size(); ++l) {
    if (buckets_[l].empty()) throw Error("partition: empty bucket " + std::to_string(l));
    for (auto i : buckets_[l]) {
      if (i >= n) throw Error("partition: index out of range");
      if (assignment_[i] != static_cast<std::size_t>(-1))
        throw Error("partition: index " + std::to_string(i) + " in two buckets");
      assignment_[i] = l;
      ++covered;
    }
  }
  if (covered != n) throw Error("partition: buckets do not cover [n]");
}

Partition make_partition(std::size_t n, std::size_t tau,
                         std::optional<std::uint64_t> shuffle_seed) {
  if (tau == 0 || tau > n)
    throw Error("partition: tau=" + std::to_string(tau) + " must be in [1, n=" +
                std::to_string(n) + "]");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  // The first n % tau buckets get one extra element.
  std::vector<std::vector<std::size_t>> buckets(tau);
  const std::size_t base = n / tau, extra = n % tau;
  std::size_t pos = 0;
  for (std::size_t l = 0; l < tau; ++l) {
    const std::size_t size = base + (l < extra ? 1 : 0);
    buckets[l].assign(order.begin() + pos, order.begin() + pos + size);
    pos += size;
  }
  Partition out(n, std::move(buckets));
  out.shuffle_seed_ = shuffle_seed;
  return out;
}

BucketPlan::BucketPlan(Partition partition, std::vector<double> p)
    : partition_(std::move(partition)), p_(std::move(p)) {
  if (p_.size() != partition_.n()) throw Error("bucket plan: p has wrong size");
  offset_.resize(partition_.tau() + 1, 0);
  cumulative_.reserve(p_.size());
  for (std::size_t l = 0; l < partition_.tau(); ++l) {
    double sum = 0.0;
    for (auto i : partition_.bucket(l)) {
      if (!(p_[i] >= 1e-15) || !std::isfinite(p_[i]))
        throw Error("bucket plan: p_" + std::to_string(i) + " must be positive (>= 1e-15)");
      sum += p_[i];
      cumulative_.push_back(sum);
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw Error("bucket plan: probabilities of bucket " + std::to_string(l) +
                  " sum to " + std::to_string(sum));
    offset_[l + 1] = cumulative_.size();
  }
}

BucketPlan BucketPlan::uniform(Partition partition) {
  std::vector<double> p(partition.n());
  for (std::size_t l = 0; l < partition.tau(); ++l) {
    const double q = 1.0 / static_cast<double>(partition.bucket(l).size());
    for (auto i : partition.bucket(l)) p[i] = q;
  }
  return BucketPlan(std::move(partition), std::move(p));
}

std::size_t BucketPlan::draw_in_bucket(std::size_t l, double u) const {
  const auto first = cumulative_.begin() + static_cast<std::ptrdiff_t>(offset_[l]);
  const auto last = cumulative_.begin() + static_cast<std::ptrdiff_t>(offset_[l + 1]);
  // The bucket total may be 1 - 1e-12; scale u so the last element is reachable.
  auto it = std::upper_bound(first, last, u * *(last - 1));
  if (it == last) --it;
  return partition_.bucket(l)[static_cast<std::size_t>(it - first)];
}

void BucketPlan::draw(Rng& rng, std::vector<std::size_t>& out) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  out.resize(tau());
  for (std::size_t l = 0; l < tau(); ++l) {
    out[l] = partition_.bucket(l).size() == 1 ? partition_.bucket(l)[0]
                                              : draw_in_bucket(l, unit(rng));
  }
}

std::string BucketPlan::to_json() const {
  std::ostringstream os;
  os << "{\"tau\":" << tau() << ",\"n\":" << n() << ",\"bucket_sizes\":[";
  for (std::size_t l = 0; l < tau(); ++l) os << (l ? "," : "") << partition_.bucket(l).size();
  os << "],\"p_digest\":\"" << detail::hex64(detail::fnv1a(p_)) << "\",\"shuffle_seed\":";
  if (partition_.shuffle_seed())
    os << *partition_.shuffle_seed();
  else
    os << "null";
  os << "}";
  return os.str();
}

std::vector<std::size_t> draw_bucket_sample(const BucketPlan& plan, Rng& rng) {
  std::vector<std::size_t> out;
  plan.draw(rng, out);
  return out;
}

TauNiceSampler::TauNiceSampler(std::size_t n, std::size_t tau) : perm_(n), tau_(tau) {
  if (tau == 0 || tau > n) throw Error("tau-nice: tau must be in [1, n]");
  std::iota(perm_.begin(), perm_.end(), 0);
}

std::span<const std::size_t> TauNiceSampler::draw(Rng& rng) {
  const std::size_t n = perm_.size();
  // Partial Fisher-Yates: the prefix is a uniform ordered tau-tuple whatever
  // the current arrangement of perm_ is.
  if (tau_ < n) {
    for (std::size_t r = 0; r < tau_; ++r) {
      std::uniform_int_distribution<std::size_t> pick(r, n - 1);
      std::swap(perm_[r], perm_[pick(rng)]);
    }
  }
  return std::span<const std::size_t>(perm_).first(tau_);
}

std::vector<std::size_t> draw_tau_nice(std::size_t n, std::size_t tau, Rng& rng) {
  TauNiceSampler sampler(n, tau);
  const auto s = sampler.draw(rng);
  return {s.begin(), s.end()};
}

DenseMatrix probability_matrix(const BucketPlan& plan) {
  const std::size_t n = plan.n();
  if (n > 4096) throw Error("probability_matrix: n > 4096; use desk-scale instances");
  const auto& part = plan.partition();
  const auto p = plan.p();
  DenseMatrix P(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j)
        P(i, j) = p[i];
      else if (part.bucket_of(i) != part.bucket_of(j))
        P(i, j) = p[i] * p[j];
    }
  return P;
}

std::vector<std::size_t> bucket_intersection_counts(const Partition& partition,
                                                    const FeatureIndex& index) {
  std::vector<std::size_t> omega(index.features(), 0);
  // last_feature[l] records the most recent feature that touched bucket l.
  std::vector<std::size_t> last_feature(partition.tau(), static_cast<std::size_t>(-1));
  for (std::size_t j = 0; j < index.features(); ++j) {
    for (auto i : index.support(j)) {
      const auto l = partition.bucket_of(i);
      if (last_feature[l] != j) {
        last_feature[l] = j;
        ++omega[j];
      }
    }
  }
  return omega;
}

std::string to_string(SamplingKind kind) {
  switch (kind) {
    case SamplingKind::serial_uniform: return "serial-uniform";
    case SamplingKind::serial_importance: return "serial-importance";
    case SamplingKind::tau_nice: return "tau-nice";
    case SamplingKind::bucket: return "bucket";
  }
  return "unknown";
}

SamplingSpec SamplingSpec::serial_uniform(std::uint64_t seed) {
  SamplingSpec s;
  s.kind = SamplingKind::serial_uniform;
  s.seed = seed;
  return s;
}

SamplingSpec SamplingSpec::serial_importance(std::vector<double> p, std::uint64_t seed) {
  SamplingSpec s;
  s.kind = SamplingKind::serial_importance;
  s.probabilities = std::move(p);
  s.seed = seed;
  return s;
}

SamplingSpec SamplingSpec::tau_nice(std::size_t tau, std::uint64_t seed) {
  SamplingSpec s;
  s.kind = SamplingKind::tau_nice;
  s.tau = tau;
  s.seed = seed;
  return s;
}

SamplingSpec SamplingSpec::bucket(std::shared_ptr<const BucketPlan> plan, std::uint64_t seed) {
  SamplingSpec s;
  s.kind = SamplingKind::bucket;
  s.tau = plan ? plan->tau() : 0;
  s.plan = std::move(plan);
  s.seed = seed;
  return s;
}

void SamplingSpec::validate(std::size_t n) const {
  switch (kind) {
    case SamplingKind::serial_uniform:
      if (tau != 1) throw Error("serial sampling must have tau = 1");
      break;
    case SamplingKind::serial_importance: {
      if (tau != 1) throw Error("serial sampling must have tau = 1");
      if (probabilities.size() != n) throw Error("serial importance: p has wrong size");
      double sum = 0.0;
      for (double q : probabilities) {
        if (!(q >= 1e-15)) throw Error("serial importance: p must be positive");
        sum += q;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw Error("serial importance: p must sum to 1");
      break;
    }
    case SamplingKind::tau_nice:
      if (tau == 0 || tau > n) throw Error("tau-nice: tau must be in [1, n]");
      break;
    case SamplingKind::bucket:
      if (!plan) throw Error("bucket sampling without a plan");
      if (plan->n() != n) throw Error("bucket plan size does not match the dataset");
      if (tau != plan->tau()) throw Error("bucket sampling: tau does not match the plan");
      break;
  }
}

std::vector<double> SamplingSpec::marginals(std::size_t n) const {
  validate(n);
  switch (kind) {
    case SamplingKind::serial_uniform: return std::vector<double>(n, 1.0 / static_cast<double>(n));
    case SamplingKind::serial_importance: return probabilities;
    case SamplingKind::tau_nice:
      return std::vector<double>(n, static_cast<double>(tau) / static_cast<double>(n));
    case SamplingKind::bucket: return {plan->p().begin(), plan->p().end()};
  }
  return {};
}

std::size_t SamplingSpec::batch_size() const noexcept { return tau; }

Sampler::Sampler(const SamplingSpec& spec, std::size_t n) : kind_(spec.kind), rng_(spec.seed) {
  spec.validate(n);
  switch (kind_) {
    case SamplingKind::serial_uniform:
    case SamplingKind::tau_nice: nice_.emplace(n, spec.tau); break;
    case SamplingKind::serial_importance:
      plan_ = std::make_shared<const BucketPlan>(make_partition(n, 1), spec.probabilities);
      break;
    case SamplingKind::bucket: plan_ = spec.plan; break;
  }
}

std::span<const std::size_t> Sampler::draw() {
  if (nice_) return nice_->draw(rng_);
  plan_->draw(rng_, buffer_);
  return buffer_;
}

}  // namespace dfsdca
