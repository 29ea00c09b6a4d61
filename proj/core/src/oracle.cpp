#include "dfsdca/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dfsdca/error.hpp"
#include "dfsdca/jacobi.hpp"

namespace dfsdca::oracle {
namespace {

template <typename Index>
DenseMatrix restrict_impl(const DenseMatrix& m, std::span<const Index> support) {
  DenseMatrix out(m.rows(), m.cols());
  for (auto a : support)
    for (auto b : support) out(a, b) = m(a, b);
  return out;
}

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

}  // namespace

double EnumeratedSampling::total_probability() const {
  double acc = 0.0;
  for (const auto& o : outcomes) acc += o.probability;
  return acc;
}

std::vector<double> EnumeratedSampling::marginals() const {
  std::vector<double> p(n, 0.0);
  for (const auto& o : outcomes)
    for (auto i : o.indices) p[i] += o.probability;
  return p;
}

EnumeratedSampling enumerate_bucket_sampling(const BucketPlan& plan) {
  const auto& part = plan.partition();
  double count = 1.0;
  for (std::size_t l = 0; l < part.tau(); ++l) count *= static_cast<double>(part.bucket(l).size());
  if (count > static_cast<double>(kMaxOutcomes))
    throw Error("enumeration: " + std::to_string(static_cast<long long>(count)) +
                " outcomes exceed the oracle limit");

  EnumeratedSampling out;
  out.n = plan.n();
  out.outcomes.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> digit(part.tau(), 0);
  while (true) {
    Outcome o;
    o.probability = 1.0;
    for (std::size_t l = 0; l < part.tau(); ++l) {
      const auto i = part.bucket(l)[digit[l]];
      o.indices.push_back(i);
      o.probability *= plan.p()[i];
    }
    std::sort(o.indices.begin(), o.indices.end());
    out.outcomes.push_back(std::move(o));

    std::size_t l = 0;
    while (l < part.tau() && ++digit[l] == part.bucket(l).size()) digit[l++] = 0;
    if (l == part.tau()) break;
  }
  return out;
}

EnumeratedSampling enumerate_tau_nice(std::size_t n, std::size_t tau) {
  if (tau == 0 || tau > n) throw Error("enumeration: tau must be in [1, n]");
  const double count = binomial(n, tau);
  if (count > static_cast<double>(kMaxOutcomes)) throw Error("enumeration: too many subsets");
  EnumeratedSampling out;
  out.n = n;
  const double prob = 1.0 / count;
  std::vector<std::size_t> pick(tau);
  for (std::size_t k = 0; k < tau; ++k) pick[k] = k;
  while (true) {
    out.outcomes.push_back({pick, prob});
    std::size_t k = tau;
    while (k > 0 && pick[k - 1] == n - tau + k - 1) --k;
    if (k == 0) break;
    ++pick[k - 1];
    for (std::size_t r = k; r < tau; ++r) pick[r] = pick[r - 1] + 1;
  }
  return out;
}

EnumeratedSampling enumerate_serial(std::span<const double> p) {
  EnumeratedSampling out;
  out.n = p.size();
  for (std::size_t i = 0; i < p.size(); ++i) out.outcomes.push_back({{i}, p[i]});
  return out;
}

double exact_eso_lhs(const SparseColumnMatrix& x, const EnumeratedSampling& sampling,
                     std::span<const double> h) {
  if (h.size() != x.cols() || sampling.n != x.cols()) throw Error("exact_eso_lhs: size mismatch");
  std::vector<double> u(x.rows());
  double total = 0.0;
  for (const auto& o : sampling.outcomes) {
    std::fill(u.begin(), u.end(), 0.0);
    for (auto i : o.indices) x.column(i).axpy(h[i], u);
    double sq = 0.0;
    for (double e : u) sq += e * e;
    total += o.probability * sq;
  }
  return total;
}

EsoCheckReport check_eso(const SparseColumnMatrix& x, const EnumeratedSampling& sampling,
                         std::span<const double> v, std::size_t trials, Rng& rng,
                         double tolerance) {
  const std::size_t n = x.cols();
  if (v.size() != n) throw Error("check_eso: v has wrong size");
  const auto p = sampling.marginals();
  EsoCheckReport report;
  report.tolerance = tolerance;
  report.max_violation = -std::numeric_limits<double>::infinity();
  report.min_slack_ratio = std::numeric_limits<double>::infinity();

  std::normal_distribution<double> normal;
  std::vector<double> h(n);
  const auto probe = [&] {
    const double lhs = exact_eso_lhs(x, sampling, h);
    double rhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) rhs += p[i] * v[i] * h[i] * h[i];
    ++report.checks;
    const double rel = (lhs - rhs) / std::max(rhs, std::numeric_limits<double>::min());
    report.max_violation = std::max(report.max_violation, rel);
    if (rel > tolerance) ++report.violations;
    if (lhs > 0.0) report.min_slack_ratio = std::min(report.min_slack_ratio, rhs / lhs);
  };
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& e : h) e = normal(rng);
    probe();
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(h.begin(), h.end(), 0.0);
    h[i] = 1.0;
    probe();
  }
  return report;
}

EsoCheckReport check_eso(const SparseColumnMatrix& x, const BucketPlan& plan,
                         std::span<const double> v, std::size_t trials, Rng& rng,
                         double tolerance) {
  return check_eso(x, enumerate_bucket_sampling(plan), v, trials, rng, tolerance);
}

DenseMatrix probability_matrix(const EnumeratedSampling& sampling) {
  DenseMatrix P(sampling.n, sampling.n);
  for (const auto& o : sampling.outcomes)
    for (auto i : o.indices)
      for (auto j : o.indices) P(i, j) += o.probability;
  return P;
}

DenseMatrix restrict_to(const DenseMatrix& m, std::span<const std::uint32_t> support) {
  return restrict_impl(m, support);
}

double lambda_prime(const DenseMatrix& m) {
  if (m.rows() != m.cols()) throw Error("lambda_prime: matrix is not square");
  if (m.rows() > kMaxDense) throw Error("lambda_prime: matrix larger than the oracle limit");
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (m(i, i) < 0.0) throw Error("lambda_prime: negative diagonal");
    if (m(i, i) > 0.0) support.push_back(i);
  }
  if (support.empty()) return 0.0;
  DenseMatrix normalized(support.size(), support.size());
  for (std::size_t a = 0; a < support.size(); ++a)
    for (std::size_t b = 0; b < support.size(); ++b) {
      const auto i = support[a], j = support[b];
      normalized(a, b) = m(i, j) / std::sqrt(m(i, i) * m(j, j));
    }
  return max_eigenvalue(normalized);
}

bool check_lemma1(const BucketPlan& plan, double* max_error) {
  const auto enumerated = probability_matrix(enumerate_bucket_sampling(plan));
  const auto closed = dfsdca::probability_matrix(plan);
  double err = 0.0;
  for (std::size_t i = 0; i < plan.n(); ++i)
    for (std::size_t j = 0; j < plan.n(); ++j)
      err = std::max(err, std::abs(enumerated(i, j) - closed(i, j)));
  if (max_error) *max_error = err;
  return err <= 1e-12;
}

bool check_lemma2_lemma3(std::span<const std::size_t> support, const BucketPlan& plan,
                         LemmaReport* report) {
  const std::size_t n = plan.n();
  if (n > 32) throw Error("lemma check: n > 32");
  if (support.empty()) throw Error("lemma check: J must be nonempty");
  const auto& part = plan.partition();
  const auto p = plan.p();

  std::vector<bool> in_j(n, false);
  for (auto i : support) {
    if (i >= n) throw Error("lemma check: index out of range");
    in_j[i] = true;
  }
  std::vector<bool> bucket_hit(part.tau(), false);
  double mass = 0.0;
  for (auto i : support) {
    bucket_hit[part.bucket_of(i)] = true;
    mass += p[i];
  }
  const auto omega = static_cast<double>(std::count(bucket_hit.begin(), bucket_hit.end(), true));

  // block bound: P(J) o B - P(J) / omega'_J  (P(J) is the 0/1 indicator of J x J)
  DenseMatrix l2(n, n);
  // diagonal bound: (sum_J p) Diag(P(J o S)) - P(J) o p p^T
  DenseMatrix l3(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!in_j[i] || !in_j[j]) continue;
      const double same_bucket = part.bucket_of(i) == part.bucket_of(j) ? 1.0 : 0.0;
      l2(i, j) = same_bucket - 1.0 / omega;
      l3(i, j) = (i == j ? mass * p[i] : 0.0) - p[i] * p[j];
    }
  const double e2 = min_eigenvalue(l2), e3 = min_eigenvalue(l3);
  LemmaReport r;
  r.lemma2 = e2 >= -1e-10;
  r.lemma2_min_eigenvalue = e2;
  r.lemma3 = e3 >= -1e-10;
  r.lemma3_min_eigenvalue = e3;
  if (report) {
    report->lemma2 = r.lemma2;
    report->lemma2_min_eigenvalue = e2;
    report->lemma3 = r.lemma3;
    report->lemma3_min_eigenvalue = e3;
  }
  return r.lemma2 && r.lemma3;
}

std::vector<double> lambda_prime_v(const Dataset& data, const BucketPlan& plan) {
  if (data.n() > kMaxDense) throw Error("lambda_prime_v: n larger than the oracle limit");
  const auto P = dfsdca::probability_matrix(plan);
  const auto& index = data.feature_index();
  std::vector<double> lp(index.features());
  for (std::size_t j = 0; j < lp.size(); ++j) lp[j] = lambda_prime(restrict_to(P, index.support(j)));
  std::vector<double> v(data.n(), 0.0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto col = data.matrix().column(i);
    for (std::size_t k = 0; k < col.size(); ++k) v[i] += lp[col.rows[k]] * col.values[k] * col.values[k];
  }
  return v;
}

}  // namespace dfsdca::oracle
