#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dfsdca/dataset.hpp"
#include "dfsdca/eso.hpp"
#include "dfsdca/loss.hpp"
#include "dfsdca/sampling.hpp"

namespace dfsdca {

/// lambda = max_i ||X_:i|| / n.
double default_lambda(const Dataset& data);

/// P(w) = (1/n) sum_i phi_i(X_:i^T w) + (lambda/2) ||w||^2
double objective(const Dataset& data, const LossModel& loss, double lambda,
                 std::span<const double> w);
std::vector<double> objective_gradient(const Dataset& data, const LossModel& loss,
                                       double lambda, std::span<const double> w);

struct ReferenceSolution {
  std::vector<double> w_star;
  std::vector<double> alpha_star;  // -phi_i'(X_:i^T w*)
  double p_star = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
};

/// Minimizer of P to gradient norm 1e-12. Damped Newton for d <= 2000,
/// gradient descent with backtracking otherwise. Throws dfsdca::Error when
/// the iteration cap is hit.
ReferenceSolution reference_solution(const Dataset& data, const LossModel& loss, double lambda);

struct TracePoint {
  std::size_t iteration = 0;
  double effective_passes = 0.0;
  double objective = 0.0;
  double gap = std::numeric_limits<double>::quiet_NaN();
  double potential = std::numeric_limits<double>::quiet_NaN();
};

struct SolverState {
  std::vector<double> w;
  std::vector<double> alpha;
  std::size_t t = 0;
  double theta = 0.0;
  std::vector<double> p;
  std::vector<TracePoint> trace;
  /// Largest relative deviation of w from (1/(lambda n)) sum_i X_:i alpha_i
  /// seen at checkpoints.
  double max_consistency_drift = 0.0;

  std::vector<double> deltas;  // scratch, one per batch element
};

/// alpha = 0, w = 0, stepsize and marginals taken from the bundle.
SolverState initial_state(const Dataset& data, const EsoBundle& eso);

/// One dfSDCA iteration on batch S. All Delta_i use the same w^(t-1).
/// Throws DivergenceError when a Delta_i is not finite.
void dfsdca_step(SolverState& state, std::span<const std::size_t> batch, const Dataset& data,
                 const LossModel& loss, double lambda);

/// E = (lambda/2)||w - w*||^2 + (gamma/(2n))||alpha - alpha*||^2
double potential(const SolverState& state, const ReferenceSolution& ref, double lambda,
                 double gamma);

/// (1/(lambda n)) sum_i X_:i alpha_i
std::vector<double> primal_from_dual(const Dataset& data, std::span<const double> alpha,
                                     double lambda);

struct SolveOptions {
  double epochs = 50.0;             // runs ceil(epochs * n / tau) iterations
  std::size_t log_every = 0;        // 0: ceil(n / (10 tau))
  const ReferenceSolution* reference = nullptr;
  std::optional<double> target_gap;  // stop at the first checkpoint at or below it
  double divergence_gap = 1e10;
  bool check_consistency = true;
};

/// Gap values written to traces are clamped from below at this floor.
inline constexpr double kGapFloor = 1e-16;

/// Runs dfSDCA with the sampling and stepsize of `eso`. The sampling's RNG is
/// seeded from `sampling.seed`. Throws DivergenceError on divergence.
SolverState solve(const Dataset& data, const LossModel& loss, double lambda,
                  const SamplingSpec& sampling, const EsoBundle& eso,
                  const SolveOptions& options);

/// Effort axis: t * tau / n passes, normalized by tau, i.e. t / n.
double effective_passes(std::size_t t, std::size_t tau, std::size_t n);

/// `effective_passes,gap,potential`, one row per checkpoint.
void write_trace_csv(std::ostream& out, std::span<const TracePoint> trace);

}  // namespace dfsdca
