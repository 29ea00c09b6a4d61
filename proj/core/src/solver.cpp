#include "dfsdca/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "dfsdca/dense.hpp"
#include "dfsdca/error.hpp"
#include "format.hpp"

namespace dfsdca {
namespace {

double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

std::vector<double> margins(const Dataset& data, std::span<const double> w) {
  std::vector<double> z(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) z[i] = data.matrix().column(i).dot(w);
  return z;
}

double objective_from_margins(const Dataset& data, const LossModel& loss, double lambda,
                              std::span<const double> z, std::span<const double> w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) acc += loss.value(z[i], data.labels()[i]);
  const double ww = norm2(w);
  return acc / static_cast<double>(data.n()) + 0.5 * lambda * ww * ww;
}

std::vector<double> gradient_from_margins(const Dataset& data, const LossModel& loss,
                                          double lambda, std::span<const double> z,
                                          std::span<const double> w) {
  std::vector<double> g(w.begin(), w.end());
  for (auto& x : g) x *= lambda;
  const double inv_n = 1.0 / static_cast<double>(data.n());
  for (std::size_t i = 0; i < data.n(); ++i)
    data.matrix().column(i).axpy(inv_n * loss.derivative(z[i], data.labels()[i]), g);
  return g;
}

// Solves H x = b in place for symmetric positive definite H.
void cholesky_solve(DenseMatrix& h, std::vector<double>& b) {
  const std::size_t d = h.rows();
  for (std::size_t j = 0; j < d; ++j) {
    double diag = h(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= h(j, k) * h(j, k);
    if (!(diag > 0.0)) throw Error("reference solution: Hessian not positive definite");
    const double ljj = std::sqrt(diag);
    h(j, j) = ljj;
    for (std::size_t i = j + 1; i < d; ++i) {
      double s = h(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= h(i, k) * h(j, k);
      h(i, j) = s / ljj;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= h(i, k) * b[k];
    b[i] = s / h(i, i);
  }
  for (std::size_t i = d; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < d; ++k) s -= h(k, i) * b[k];
    b[i] = s / h(i, i);
  }
}

constexpr double kGradientTol = 1e-12;

// Gradient norms below this multiple of the data scale cannot be resolved in
// double precision; a stalled iteration that gets there is accepted.
double resolvable_gradient(const Dataset& data) {
  double mx = 0.0;
  for (double l : data.squared_norms()) mx = std::max(mx, l);
  double ymax = 1.0;
  for (double y : data.labels()) ymax = std::max(ymax, std::abs(y));
  return std::max(kGradientTol, 64.0 * std::numeric_limits<double>::epsilon() * std::sqrt(mx) * ymax);
}

ReferenceSolution finish(const Dataset& data, const LossModel& loss, double lambda,
                         std::vector<double> w, double gnorm, std::size_t iterations) {
  ReferenceSolution ref;
  const auto z = margins(data, w);
  ref.alpha_star.resize(data.n());
  for (std::size_t i = 0; i < data.n(); ++i)
    ref.alpha_star[i] = -loss.derivative(z[i], data.labels()[i]);
  ref.p_star = objective_from_margins(data, loss, lambda, z, w);
  ref.w_star = std::move(w);
  ref.gradient_norm = gnorm;
  ref.iterations = iterations;
  return ref;
}

ReferenceSolution newton(const Dataset& data, const LossModel& loss, double lambda) {
  const std::size_t d = data.d(), n = data.n();
  std::vector<double> w(d, 0.0), best_w = w;
  double best_g = std::numeric_limits<double>::infinity();
  std::size_t since_improvement = 0;
  const double accept = resolvable_gradient(data);

  for (std::size_t it = 0; it < 500; ++it) {
    const auto z = margins(data, w);
    const auto g = gradient_from_margins(data, loss, lambda, z, w);
    const double gn = norm2(g);
    if (gn < best_g) {
      best_g = gn;
      best_w = w;
      since_improvement = 0;
    } else if (gn < 1e-6 && ++since_improvement >= 5) {
      break;
    }
    if (gn <= kGradientTol) return finish(data, loss, lambda, w, gn, it);

    DenseMatrix h(d, d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto col = data.matrix().column(i);
      const double c = loss.second_derivative(z[i], data.labels()[i]) / static_cast<double>(n);
      for (std::size_t a = 0; a < col.size(); ++a)
        for (std::size_t b = 0; b <= a; ++b)
          h(col.rows[a], col.rows[b]) += c * col.values[a] * col.values[b];
    }
    for (std::size_t j = 0; j < d; ++j) h(j, j) += lambda;
    std::vector<double> step(g.size());
    for (std::size_t j = 0; j < d; ++j) step[j] = -g[j];
    cholesky_solve(h, step);

    double slope = 0.0;
    for (std::size_t j = 0; j < d; ++j) slope += g[j] * step[j];
    const double f0 = objective_from_margins(data, loss, lambda, z, w);
    double t = 1.0;
    std::vector<double> trial(d);
    // Near the optimum the objective no longer resolves the decrease; take
    // the full Newton step there.
    const bool local = gn < 1e-6;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < d; ++j) trial[j] = w[j] + t * step[j];
      if (local) break;
      const double f1 = objective(data, loss, lambda, trial);
      if (f1 <= f0 + 1e-4 * t * slope) break;
      t *= 0.5;
    }
    w = trial;
  }
  if (best_g <= accept) return finish(data, loss, lambda, best_w, best_g, 500);
  throw Error("reference solution: Newton stalled at gradient norm " + std::to_string(best_g));
}

ReferenceSolution gradient_descent(const Dataset& data, const LossModel& loss, double lambda) {
  const std::size_t d = data.d();
  std::vector<double> w(d, 0.0), trial(d);
  double lmax = 0.0;
  for (double l : data.squared_norms()) lmax = std::max(lmax, l);
  double step = 1.0 / (lmax / loss.gamma() + lambda);
  const double accept = resolvable_gradient(data);
  double best_g = std::numeric_limits<double>::infinity();
  std::vector<double> best_w = w;
  for (std::size_t it = 0; it < 1'000'000; ++it) {
    const auto z = margins(data, w);
    const auto g = gradient_from_margins(data, loss, lambda, z, w);
    const double gn = norm2(g);
    if (gn < best_g) {
      best_g = gn;
      best_w = w;
    }
    if (gn <= kGradientTol) return finish(data, loss, lambda, w, gn, it);
    const double f0 = objective_from_margins(data, loss, lambda, z, w);
    step *= 2.0;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < d; ++j) trial[j] = w[j] - step * g[j];
      if (objective(data, loss, lambda, trial) <= f0 - 0.5 * step * gn * gn) break;
      step *= 0.5;
    }
    if (w == trial) break;
    w = trial;
  }
  if (best_g <= accept) return finish(data, loss, lambda, best_w, best_g, 1'000'000);
  throw Error("reference solution: iteration cap reached at gradient norm " +
              std::to_string(best_g));
}

}  // namespace

double default_lambda(const Dataset& data) {
  double mx = 0.0;
  for (double l : data.squared_norms()) mx = std::max(mx, l);
  return std::sqrt(mx) / static_cast<double>(data.n());
}

double objective(const Dataset& data, const LossModel& loss, double lambda,
                 std::span<const double> w) {
  return objective_from_margins(data, loss, lambda, margins(data, w), w);
}

std::vector<double> objective_gradient(const Dataset& data, const LossModel& loss, double lambda,
                                       std::span<const double> w) {
  return gradient_from_margins(data, loss, lambda, margins(data, w), w);
}

ReferenceSolution reference_solution(const Dataset& data, const LossModel& loss, double lambda) {
  if (!(lambda > 0.0)) throw Error("reference solution: lambda must be positive");
  loss.validate_labels(data.labels());
  return data.d() <= 2000 ? newton(data, loss, lambda) : gradient_descent(data, loss, lambda);
}

SolverState initial_state(const Dataset& data, const EsoBundle& eso) {
  if (eso.p.size() != data.n()) throw Error("solver: ESO bundle does not match the dataset");
  SolverState s;
  s.w.assign(data.d(), 0.0);
  s.alpha.assign(data.n(), 0.0);
  s.theta = eso.theta;
  s.p = eso.p;
  return s;
}

void dfsdca_step(SolverState& state, std::span<const std::size_t> batch, const Dataset& data,
                 const LossModel& loss, double lambda) {
  const auto& x = data.matrix();
  const auto y = data.labels();
  state.deltas.resize(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const std::size_t i = batch[k];
    const double delta = loss.derivative(x.column(i).dot(state.w), y[i]) + state.alpha[i];
    if (!std::isfinite(delta))
      throw DivergenceError("non-finite update at iteration " + std::to_string(state.t + 1) +
                                ", example " + std::to_string(i),
                            state.t + 1, i);
    state.deltas[k] = delta;
  }
  const double n_lambda = static_cast<double>(data.n()) * lambda;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const std::size_t i = batch[k];
    const double delta = state.deltas[k];
    if (delta == 0.0) continue;
    const double step = state.theta / state.p[i];
    state.alpha[i] -= step * delta;
    x.column(i).axpy(-step * delta / n_lambda, state.w);
  }
  ++state.t;
}

double potential(const SolverState& state, const ReferenceSolution& ref, double lambda,
                 double gamma) {
  double dw = 0.0, da = 0.0;
  for (std::size_t j = 0; j < state.w.size(); ++j) {
    const double e = state.w[j] - ref.w_star[j];
    dw += e * e;
  }
  for (std::size_t i = 0; i < state.alpha.size(); ++i) {
    const double e = state.alpha[i] - ref.alpha_star[i];
    da += e * e;
  }
  return 0.5 * lambda * dw + gamma / (2.0 * static_cast<double>(state.alpha.size())) * da;
}

std::vector<double> primal_from_dual(const Dataset& data, std::span<const double> alpha,
                                     double lambda) {
  std::vector<double> w(data.d(), 0.0);
  const double scale = 1.0 / (lambda * static_cast<double>(data.n()));
  for (std::size_t i = 0; i < data.n(); ++i)
    if (alpha[i] != 0.0) data.matrix().column(i).axpy(scale * alpha[i], w);
  return w;
}

double effective_passes(std::size_t t, std::size_t tau, std::size_t n) {
  const double passes = static_cast<double>(t) * static_cast<double>(tau) / static_cast<double>(n);
  return passes / static_cast<double>(tau);
}

SolverState solve(const Dataset& data, const LossModel& loss, double lambda,
                  const SamplingSpec& sampling, const EsoBundle& eso,
                  const SolveOptions& options) {
  const std::size_t n = data.n();
  if (!(lambda > 0.0)) throw Error("solver: lambda must be positive");
  if (!(options.epochs >= 0.0)) throw Error("solver: epochs must be nonnegative");
  loss.validate_labels(data.labels());
  const auto marginals = sampling.marginals(n);
  if (eso.p.size() != n) throw Error("solver: ESO bundle does not match the dataset");
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(marginals[i] - eso.p[i]) > 1e-12 * std::max(1.0, marginals[i]))
      throw Error("solver: ESO probabilities do not match the sampling marginals");

  const std::size_t tau = sampling.batch_size();
  const auto iterations = static_cast<std::size_t>(
      std::ceil(options.epochs * static_cast<double>(n) / static_cast<double>(tau)));
  const std::size_t log_every =
      options.log_every ? options.log_every : (n + 10 * tau - 1) / (10 * tau);

  SolverState state = initial_state(data, eso);
  Sampler sampler(sampling, n);
  const auto* ref = options.reference;

  const auto describe = [&] {
    std::ostringstream os;
    os << "sampling=" << to_string(sampling.kind) << " tau=" << tau << " seed=" << sampling.seed
       << " theta=" << detail::format_double(state.theta) << " lambda="
       << detail::format_double(lambda) << " dataset=" << detail::hex64(data.digest());
    return os.str();
  };

  // Returns true when the run should stop.
  const auto checkpoint = [&]() -> bool {
    TracePoint pt;
    pt.iteration = state.t;
    pt.effective_passes = effective_passes(state.t, tau, n);
    pt.objective = objective(data, loss, lambda, state.w);
    if (ref) {
      pt.gap = std::max(pt.objective - ref->p_star, kGapFloor);
      pt.potential = potential(state, *ref, lambda, loss.gamma());
    }
    const double watch = ref ? pt.gap : pt.objective;
    if (!std::isfinite(pt.objective) || watch > options.divergence_gap)
      throw DivergenceError("diverged at iteration " + std::to_string(state.t) + " (" +
                                describe() + ")",
                            state.t, 0);
    if (options.check_consistency) {
      const auto w_ref = primal_from_dual(data, state.alpha, lambda);
      double diff = 0.0;
      for (std::size_t j = 0; j < w_ref.size(); ++j) {
        const double e = state.w[j] - w_ref[j];
        diff += e * e;
      }
      const double scale = std::max(norm2(w_ref), std::numeric_limits<double>::min());
      state.max_consistency_drift =
          std::max(state.max_consistency_drift, diff == 0.0 ? 0.0 : std::sqrt(diff) / scale);
    }
    state.trace.push_back(pt);
    return ref && options.target_gap && pt.gap <= *options.target_gap;
  };

  if (checkpoint()) return state;
  while (state.t < iterations) {
    dfsdca_step(state, sampler.draw(), data, loss, lambda);
    if (state.t % log_every == 0 || state.t == iterations)
      if (checkpoint()) break;
  }
  return state;
}

void write_trace_csv(std::ostream& out, std::span<const TracePoint> trace) {
  out << "effective_passes,gap,potential\n";
  for (const auto& pt : trace) {
    out << detail::format_double(pt.effective_passes) << ',';
    if (std::isfinite(pt.gap)) out << detail::format_double(pt.gap);
    out << ',';
    if (std::isfinite(pt.potential)) out << detail::format_double(pt.potential);
    out << '\n';
  }
}

}  // namespace dfsdca
