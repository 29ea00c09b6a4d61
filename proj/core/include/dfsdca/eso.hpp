#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dfsdca/dataset.hpp"
#include "dfsdca/sampling.hpp"

namespace dfsdca {

/// The problem constants enter the ESO calculus only through lambda * gamma.
class LambdaGamma {
 public:
  LambdaGamma(double lambda, double gamma);
  double lambda() const noexcept { return lambda_; }
  double gamma() const noexcept { return gamma_; }
  double product() const noexcept { return product_; }

 private:
  double lambda_;
  double gamma_;
  double product_;
};

enum class EsoFormula {
  serial,
  serial_importance,
  tau_nice,
  bucket,
  uniform_bucket,
  conservative_bucket,
  practical_importance,
  alternating,
};

std::string to_string(EsoFormula formula);

/// Largest admissible stepsize and its complexity form.
struct ThetaResult {
  double theta = 0.0;    // min_i p_i n lg / (v_i + n lg)
  double inverse = 0.0;  // max_i (1/p_i + v_i / (p_i n lg)), computed separately
  std::size_t argmin = 0;
};

/// Returns the upper bound on theta for which the dfSDCA rate holds.
ThetaResult theta(std::span<const double> p, std::span<const double> v, double lambda_gamma);

/// ESO parameters, sampling marginals and the stepsize they admit.
struct EsoBundle {
  std::vector<double> v;
  std::vector<double> p;
  double theta = 0.0;
  double inverse_theta = 0.0;
  std::size_t argmin = 0;
  EsoFormula provenance = EsoFormula::serial;
  double lambda_gamma = 0.0;
  std::size_t n = 0;

  static EsoBundle make(std::vector<double> v, std::vector<double> p, EsoFormula provenance,
                        double lambda_gamma);
  /// Digests of v and p plus the scalar fields, as JSON text.
  std::string to_json() const;
};

double sigma(std::span<const double> squared_norms);

std::vector<double> v_serial(const Dataset& data);
std::vector<double> v_tau_nice(const Dataset& data, std::size_t tau);
std::vector<double> v_bucket(const Dataset& data, const BucketPlan& plan);
/// v_bucket at an arbitrary p (need not be normalized); used by the
/// alternating scheme without rebuilding draw tables.
std::vector<double> v_bucket(const Dataset& data, const Partition& partition,
                             std::span<const double> p);
std::vector<double> v_bucket_conservative(const Dataset& data, const BucketPlan& plan);
std::vector<double> v_uniform_bucket(const Dataset& data, const Partition& partition);

std::vector<double> serial_importance_probs(std::span<const double> v, double lambda_gamma);

/// Within-bucket importance weighting p_i = (n lg + v_i) / sum_{k in B_l}(n lg + v_k).
std::vector<double> bucket_importance_probs(const Partition& partition,
                                            std::span<const double> v, double lambda_gamma);

EsoBundle serial_uniform_bundle(const Dataset& data, const LambdaGamma& lg);
EsoBundle serial_importance_bundle(const Dataset& data, const LambdaGamma& lg);
EsoBundle tau_nice_bundle(const Dataset& data, std::size_t tau, const LambdaGamma& lg);

struct PlanAndBundle {
  BucketPlan plan;
  EsoBundle bundle;
  std::vector<double> v_uniform;  // v^(unif) at the partition (practical plan)
  bool converged = true;
  std::size_t iterations = 0;
  double residual = 0.0;
};

PlanAndBundle uniform_bucket_bundle(const Dataset& data, const Partition& partition,
                                    const LambdaGamma& lg);

/// Closed-form importance minibatch plan: p* from v^(unif), then
/// v = s (bucket ESO at p*) and theta(p*, s).
PlanAndBundle practical_importance_plan(const Dataset& data, const Partition& partition,
                                        const LambdaGamma& lg);

/// Alternates v <- v_bucket(p), p <- bucket_importance_probs(v) from the
/// uniform bucket plan until max |dp| < tol or max_iter. Non-convergence is
/// reported through `converged`, not thrown.
PlanAndBundle alternating_optimization_plan(const Dataset& data, const Partition& partition,
                                            const LambdaGamma& lg, double tol = 1e-10,
                                            std::size_t max_iter = 200);

struct SpeedupReport {
  double sigma = 0.0;
  double theta_nice = 0.0;
  double theta_imp = 0.0;
  double theoretical_ratio = 0.0;
  std::vector<double> beta;  // per bucket

  std::string to_json() const;
};

SpeedupReport speedup_report(const Dataset& data, const Partition& partition,
                             const LambdaGamma& lg);

}  // namespace dfsdca
