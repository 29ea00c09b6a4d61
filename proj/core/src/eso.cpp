#include "dfsdca/eso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dfsdca/error.hpp"
#include "format.hpp"

namespace dfsdca {
namespace {

// v_i = sum_j multiplier_j X_ji^2
std::vector<double> weighted_squared_norms(const SparseColumnMatrix& x,
                                           std::span<const double> multiplier) {
  std::vector<double> v(x.cols());
  for (std::size_t i = 0; i < x.cols(); ++i) {
    const auto col = x.column(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < col.size(); ++k)
      acc += multiplier[col.rows[k]] * col.values[k] * col.values[k];
    v[i] = acc;
  }
  return v;
}

// delta_j = sum_{i in J_j} p_i
std::vector<double> support_mass(const FeatureIndex& index, std::span<const double> p) {
  std::vector<double> delta(index.features());
  for (std::size_t j = 0; j < index.features(); ++j) {
    double acc = 0.0;
    for (auto i : index.support(j)) acc += p[i];
    delta[j] = acc;
  }
  return delta;
}

std::vector<double> v_bucket_with_counts(const Dataset& data, std::span<const std::size_t> omega,
                                         std::span<const double> p) {
  const auto delta = support_mass(data.feature_index(), p);
  std::vector<double> m(delta.size());
  for (std::size_t j = 0; j < m.size(); ++j)
    m[j] = 1.0 + (1.0 - 1.0 / static_cast<double>(omega[j])) * delta[j];
  return weighted_squared_norms(data.matrix(), m);
}

void check_partition(const Dataset& data, const Partition& partition) {
  if (partition.n() != data.n()) throw Error("partition size does not match the dataset");
}

std::vector<double> uniform_bucket_probs(const Partition& partition) {
  std::vector<double> p(partition.n());
  for (std::size_t l = 0; l < partition.tau(); ++l) {
    const double q = 1.0 / static_cast<double>(partition.bucket(l).size());
    for (auto i : partition.bucket(l)) p[i] = q;
  }
  return p;
}

}  // namespace

LambdaGamma::LambdaGamma(double lambda, double gamma)
    : lambda_(lambda), gamma_(gamma), product_(lambda * gamma) {
  if (!(lambda > 0.0) || !(gamma > 0.0) || !std::isfinite(product_))
    throw Error("lambda and gamma must be positive and finite");
}

std::string to_string(EsoFormula formula) {
  switch (formula) {
    case EsoFormula::serial: return "serial";
    case EsoFormula::serial_importance: return "serial-importance";
    case EsoFormula::tau_nice: return "tau-nice";
    case EsoFormula::bucket: return "bucket";
    case EsoFormula::uniform_bucket: return "uniform-bucket";
    case EsoFormula::conservative_bucket: return "conservative-bucket";
    case EsoFormula::practical_importance: return "practical-importance";
    case EsoFormula::alternating: return "alternating";
  }
  return "unknown";
}

ThetaResult theta(std::span<const double> p, std::span<const double> v, double lambda_gamma) {
  if (p.empty() || p.size() != v.size()) throw Error("theta: p and v must match and be nonempty");
  const double c = static_cast<double>(p.size()) * lambda_gamma;
  ThetaResult r;
  r.theta = std::numeric_limits<double>::infinity();
  r.inverse = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0) || !(v[i] > 0.0)) throw Error("theta: p and v must be positive");
    const double t = p[i] * c / (v[i] + c);
    if (t < r.theta) {
      r.theta = t;
      r.argmin = i;
    }
    r.inverse = std::max(r.inverse, 1.0 / p[i] + v[i] / (p[i] * c));
  }
  if (r.theta > 1.0) throw Error("theta: stepsize above 1");
  return r;
}

EsoBundle EsoBundle::make(std::vector<double> v, std::vector<double> p, EsoFormula provenance,
                          double lambda_gamma) {
  EsoBundle b;
  const auto t = dfsdca::theta(p, v, lambda_gamma);
  b.theta = t.theta;
  b.inverse_theta = t.inverse;
  b.argmin = t.argmin;
  b.n = p.size();
  b.v = std::move(v);
  b.p = std::move(p);
  b.provenance = provenance;
  b.lambda_gamma = lambda_gamma;
  return b;
}

std::string EsoBundle::to_json() const {
  std::ostringstream os;
  os << "{\"provenance\":\"" << to_string(provenance) << "\",\"n\":" << n
     << ",\"lambda_gamma\":" << detail::json_number(lambda_gamma)
     << ",\"theta\":" << detail::json_number(theta)
     << ",\"inverse_theta\":" << detail::json_number(inverse_theta) << ",\"argmin\":" << argmin
     << ",\"v_digest\":\"" << detail::hex64(detail::fnv1a(v)) << "\",\"p_digest\":\""
     << detail::hex64(detail::fnv1a(p)) << "\"}";
  return os.str();
}

double sigma(std::span<const double> L) {
  if (L.empty()) throw Error("sigma: empty input");
  double mx = 0.0, sum = 0.0;
  for (double l : L) {
    if (!(l > 0.0)) throw Error("sigma: squared norms must be positive");
    mx = std::max(mx, l);
    sum += l;
  }
  return mx / (sum / static_cast<double>(L.size()));
}

std::vector<double> v_serial(const Dataset& data) {
  return {data.squared_norms().begin(), data.squared_norms().end()};
}

std::vector<double> v_tau_nice(const Dataset& data, std::size_t tau) {
  const std::size_t n = data.n();
  if (tau == 0 || tau > n) throw Error("v_tau_nice: tau must be in [1, n]");
  if (n == 1) return v_serial(data);
  const auto& index = data.feature_index();
  std::vector<double> m(index.features());
  const double scale = static_cast<double>(tau - 1) / static_cast<double>(n - 1);
  for (std::size_t j = 0; j < m.size(); ++j)
    m[j] = 1.0 + static_cast<double>(index.support_size(j) - 1) * scale;
  return weighted_squared_norms(data.matrix(), m);
}

std::vector<double> v_bucket(const Dataset& data, const Partition& partition,
                             std::span<const double> p) {
  check_partition(data, partition);
  if (p.size() != data.n()) throw Error("v_bucket: p has wrong size");
  const auto omega = bucket_intersection_counts(partition, data.feature_index());
  return v_bucket_with_counts(data, omega, p);
}

std::vector<double> v_bucket(const Dataset& data, const BucketPlan& plan) {
  return v_bucket(data, plan.partition(), plan.p());
}

std::vector<double> v_bucket_conservative(const Dataset& data, const BucketPlan& plan) {
  check_partition(data, plan.partition());
  const auto delta = support_mass(data.feature_index(), plan.p());
  const double shrink = 1.0 - 1.0 / static_cast<double>(plan.tau());
  std::vector<double> m(delta.size());
  for (std::size_t j = 0; j < m.size(); ++j) m[j] = 1.0 + shrink * delta[j];
  return weighted_squared_norms(data.matrix(), m);
}

std::vector<double> v_uniform_bucket(const Dataset& data, const Partition& partition) {
  check_partition(data, partition);
  return v_bucket(data, partition, uniform_bucket_probs(partition));
}

std::vector<double> serial_importance_probs(std::span<const double> v, double lambda_gamma) {
  if (v.empty()) throw Error("serial_importance_probs: empty v");
  const double c = static_cast<double>(v.size()) * lambda_gamma;
  std::vector<double> p(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    p[i] = v[i] + c;
    total += p[i];
  }
  for (auto& q : p) q /= total;
  return p;
}

std::vector<double> bucket_importance_probs(const Partition& partition,
                                            std::span<const double> v, double lambda_gamma) {
  if (v.size() != partition.n()) throw Error("bucket_importance_probs: v has wrong size");
  const double c = static_cast<double>(v.size()) * lambda_gamma;
  std::vector<double> p(v.size());
  for (std::size_t l = 0; l < partition.tau(); ++l) {
    double total = 0.0;
    for (auto i : partition.bucket(l)) total += c + v[i];
    for (auto i : partition.bucket(l)) p[i] = (c + v[i]) / total;
  }
  return p;
}

EsoBundle serial_uniform_bundle(const Dataset& data, const LambdaGamma& lg) {
  return EsoBundle::make(v_serial(data),
                         std::vector<double>(data.n(), 1.0 / static_cast<double>(data.n())),
                         EsoFormula::serial, lg.product());
}

EsoBundle serial_importance_bundle(const Dataset& data, const LambdaGamma& lg) {
  auto v = v_serial(data);
  auto p = serial_importance_probs(v, lg.product());
  return EsoBundle::make(std::move(v), std::move(p), EsoFormula::serial_importance, lg.product());
}

EsoBundle tau_nice_bundle(const Dataset& data, std::size_t tau, const LambdaGamma& lg) {
  return EsoBundle::make(
      v_tau_nice(data, tau),
      std::vector<double>(data.n(), static_cast<double>(tau) / static_cast<double>(data.n())),
      EsoFormula::tau_nice, lg.product());
}

PlanAndBundle uniform_bucket_bundle(const Dataset& data, const Partition& partition,
                                    const LambdaGamma& lg) {
  auto plan = BucketPlan::uniform(partition);
  auto v = v_bucket(data, plan);
  auto bundle = EsoBundle::make(v, {plan.p().begin(), plan.p().end()},
                                EsoFormula::uniform_bucket, lg.product());
  return PlanAndBundle{std::move(plan), std::move(bundle), std::move(v)};
}

PlanAndBundle practical_importance_plan(const Dataset& data, const Partition& partition,
                                        const LambdaGamma& lg) {
  check_partition(data, partition);
  const auto omega = bucket_intersection_counts(partition, data.feature_index());
  auto v_unif = v_bucket_with_counts(data, omega, uniform_bucket_probs(partition));
  auto p = bucket_importance_probs(partition, v_unif, lg.product());
  auto s = v_bucket_with_counts(data, omega, p);
  auto bundle = EsoBundle::make(std::move(s), p, EsoFormula::practical_importance, lg.product());
  return PlanAndBundle{BucketPlan(partition, std::move(p)), std::move(bundle), std::move(v_unif)};
}

PlanAndBundle alternating_optimization_plan(const Dataset& data, const Partition& partition,
                                            const LambdaGamma& lg, double tol,
                                            std::size_t max_iter) {
  check_partition(data, partition);
  if (!(tol > 0.0)) throw Error("alternating optimization: tol must be positive");
  const auto omega = bucket_intersection_counts(partition, data.feature_index());
  auto p = uniform_bucket_probs(partition);
  auto v_unif = v_bucket_with_counts(data, omega, p);

  std::vector<double> best_p = p;
  double best_theta = theta(p, v_unif, lg.product()).theta;
  double residual = std::numeric_limits<double>::infinity();
  std::size_t iter = 0;
  bool converged = false;
  while (iter < max_iter) {
    ++iter;
    const auto v = v_bucket_with_counts(data, omega, p);
    auto next = bucket_importance_probs(partition, v, lg.product());
    residual = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) residual = std::max(residual, std::abs(next[i] - p[i]));
    p = std::move(next);
    const double t = theta(p, v_bucket_with_counts(data, omega, p), lg.product()).theta;
    if (t > best_theta) {
      best_theta = t;
      best_p = p;
    }
    if (residual < tol) {
      converged = true;
      break;
    }
  }
  if (!converged) p = best_p;
  auto v = v_bucket_with_counts(data, omega, p);
  auto bundle = EsoBundle::make(std::move(v), p, EsoFormula::alternating, lg.product());
  PlanAndBundle out{BucketPlan(partition, std::move(p)), std::move(bundle), std::move(v_unif)};
  out.converged = converged;
  out.iterations = iter;
  out.residual = residual;
  return out;
}

std::string SpeedupReport::to_json() const {
  std::ostringstream os;
  os << "{\"sigma\":" << detail::json_number(sigma)
     << ",\"theta_nice\":" << detail::json_number(theta_nice)
     << ",\"theta_imp\":" << detail::json_number(theta_imp)
     << ",\"ratio\":" << detail::json_number(theoretical_ratio) << ",\"beta\":[";
  for (std::size_t l = 0; l < beta.size(); ++l) os << (l ? "," : "") << detail::json_number(beta[l]);
  os << "]}";
  return os.str();
}

SpeedupReport speedup_report(const Dataset& data, const Partition& partition,
                             const LambdaGamma& lg) {
  SpeedupReport r;
  r.sigma = sigma(data.squared_norms());
  r.theta_nice = tau_nice_bundle(data, partition.tau(), lg).theta;
  const auto imp = practical_importance_plan(data, partition, lg);
  r.theta_imp = imp.bundle.theta;
  r.theoretical_ratio = r.theta_imp / r.theta_nice;
  const double c = static_cast<double>(data.n()) * lg.product();
  r.beta.assign(partition.tau(), 0.0);
  for (std::size_t l = 0; l < partition.tau(); ++l)
    for (auto i : partition.bucket(l))
      r.beta[l] = std::max(r.beta[l], (c + imp.bundle.v[i]) / (c + imp.v_uniform[i]));
  return r;
}

}  // namespace dfsdca
