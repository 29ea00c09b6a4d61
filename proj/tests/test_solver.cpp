#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dfsdca/error.hpp"
#include "dfsdca/eso.hpp"
#include "dfsdca/solver.hpp"
#include "dfsdca/synthetic.hpp"
#include "test_support.hpp"

using namespace dfsdca;

namespace {

const LossModel kLogistic(LossKind::logistic);
const LossModel kSquare(LossKind::square);

double dense_objective(const Dataset& ds, const LossModel& loss, double lambda,
                       const std::vector<double>& w) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < ds.d(); ++j) z += ds.matrix().at(j, i) * w[j];
    const double y = ds.labels()[i];
    total += loss.kind() == LossKind::logistic ? std::log1p(std::exp(-y * z)) : 0.5 * (z - y) * (z - y);
  }
  double ww = 0.0;
  for (double x : w) ww += x * x;
  return total / static_cast<double>(ds.n()) + 0.5 * lambda * ww;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

struct Variant {
  SamplingSpec sampling;
  EsoBundle eso;
};

std::vector<Variant> five_variants(const Dataset& ds, std::size_t tau, const LambdaGamma& lg) {
  std::vector<Variant> out;
  const auto part = make_partition(ds.n(), tau);
  out.push_back({SamplingSpec::serial_uniform(), serial_uniform_bundle(ds, lg)});
  auto imp = serial_importance_bundle(ds, lg);
  out.push_back({SamplingSpec::serial_importance(imp.p), imp});
  out.push_back({SamplingSpec::tau_nice(tau), tau_nice_bundle(ds, tau, lg)});
  auto ub = uniform_bucket_bundle(ds, part, lg);
  out.push_back({SamplingSpec::bucket(std::make_shared<const BucketPlan>(ub.plan)), ub.bundle});
  auto pi = practical_importance_plan(ds, part, lg);
  out.push_back({SamplingSpec::bucket(std::make_shared<const BucketPlan>(pi.plan)), pi.bundle});
  return out;
}

}  // namespace

TEST_CASE("loss values, derivatives and gamma") {
  CHECK(kLogistic.gamma() == 4.0);
  CHECK(kSquare.gamma() == 1.0);
  CHECK(kLogistic.value(0.0, 1.0) == doctest::Approx(std::log(2.0)));
  CHECK(kLogistic.derivative(0.0, -1.0) == doctest::Approx(0.5));
  CHECK(kSquare.value(3.0, 1.0) == 2.0);
  CHECK(kSquare.derivative(3.0, 1.0) == 2.0);
  CHECK(std::isfinite(kLogistic.derivative(1e6, -1.0)));
  CHECK(std::isfinite(kLogistic.derivative(-1e6, -1.0)));
  CHECK(std::isfinite(kLogistic.value(-1e6, 1.0)));

  Rng rng(1);
  std::normal_distribution<double> g(0.0, 5.0);
  std::bernoulli_distribution coin(0.5);
  for (const auto* loss : {&kLogistic, &kSquare})
    for (int k = 0; k < 100; ++k) {
      const double z = g(rng);
      const double y = loss == &kLogistic ? (coin(rng) ? 1.0 : -1.0) : g(rng);
      const double h = 1e-5 * std::max(1.0, std::abs(z));
      const double fd = (loss->value(z + h, y) - loss->value(z - h, y)) / (2 * h);
      const double d = loss->derivative(z, y);
      CHECK(std::abs(d - fd) / (1 + std::abs(d)) <= 1e-6);
      const double fd2 = (loss->derivative(z + h, y) - loss->derivative(z - h, y)) / (2 * h);
      CHECK(std::abs(loss->second_derivative(z, y) - fd2) <= 1e-6);
      // 1/gamma smoothness
      const double z2 = g(rng);
      CHECK(std::abs(loss->derivative(z, y) - loss->derivative(z2, y)) <=
            std::abs(z - z2) / loss->gamma() * (1 + 1e-12));
    }

  CHECK_THROWS_AS(kLogistic.validate_labels(std::vector<double>{1.0, 0.5}), Error);
  CHECK_NOTHROW(kSquare.validate_labels(std::vector<double>{1.0, 0.5}));
  CHECK(parse_loss_kind("square") == LossKind::square);
  CHECK_THROWS_AS(parse_loss_kind("hinge"), Error);
}

TEST_CASE("objective") {
  Rng rng(2);
  const auto ds = testing::random_dataset(5, 12, 0.5, rng);
  const std::vector<double> zero(ds.d(), 0.0);
  CHECK(objective(ds, kLogistic, 0.3, zero) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  std::vector<double> labels{0.5, -2.0, 3.0};
  const auto sq = testing::dataset_from_dense(2, 3, {1, 0, 0, 1, 1, 1}, labels);
  CHECK(objective(sq, kSquare, 0.3, std::vector<double>(2, 0.0)) ==
        doctest::Approx((0.25 + 4.0 + 9.0) / 6.0).epsilon(1e-15));

  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = testing::random_dataset(6, 15, 0.4, rng);
    std::vector<double> w(data.d());
    for (auto& x : w) x = g(rng);
    for (const auto* loss : {&kLogistic, &kSquare}) {
      const double want = dense_objective(data, *loss, 0.1, w);
      CHECK(std::abs(objective(data, *loss, 0.1, w) - want) <= 1e-14 * std::max(1.0, want));
    }
  }
}

TEST_CASE("objective gradient matches finite differences") {
  Rng rng(3);
  const auto ds = testing::random_dataset(4, 10, 0.6, rng);
  std::vector<double> w{0.3, -0.2, 0.5, 0.1};
  w.resize(ds.d());
  const auto grad = objective_gradient(ds, kLogistic, 0.05, w);
  for (std::size_t j = 0; j < ds.d(); ++j) {
    auto a = w, b = w;
    a[j] += 1e-6;
    b[j] -= 1e-6;
    const double fd = (objective(ds, kLogistic, 0.05, a) - objective(ds, kLogistic, 0.05, b)) / 2e-6;
    CHECK(std::abs(grad[j] - fd) <= 1e-7);
  }
}

TEST_CASE("default lambda") {
  const auto ds = testing::dataset_from_dense(2, 4, {3, 4, 1, 0, 0, 2, 1, 1});
  CHECK(default_lambda(ds) == doctest::Approx(5.0 / 4.0).epsilon(1e-15));
}

TEST_CASE("reference solution closed forms") {
  const auto one = testing::dataset_from_dense(1, 1, {1.0}, {1.0});
  for (double lambda : {0.1, 1.0, 3.0}) {
    const auto ref = reference_solution(one, kSquare, lambda);
    CHECK(ref.w_star[0] == doctest::Approx(1.0 / (1.0 + lambda)).epsilon(1e-14));
    CHECK(ref.alpha_star[0] == doctest::Approx(1.0 - 1.0 / (1.0 + lambda)).epsilon(1e-13));
  }

  // x with y=+1 and -x with y=+1: P(w) = P(-w)
  const auto mirrored = testing::dataset_from_dense(3, 4, {1, 2, -1, -1, -2, 1, 0.5, 0, 3, -0.5, 0, -3},
                                                    {1.0, 1.0, -1.0, -1.0});
  const auto ref = reference_solution(mirrored, kLogistic, 0.01);
  for (double x : ref.w_star) CHECK(std::abs(x) <= 1e-14);
  CHECK(ref.p_star == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("reference solution reaches gradient norm 1e-12") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ds = testing::random_dataset(8, 40, 0.3, rng);
    for (const auto* loss : {&kLogistic, &kSquare}) {
      const double lambda = default_lambda(ds);
      const auto ref = reference_solution(ds, *loss, lambda);
      CHECK(norm(objective_gradient(ds, *loss, lambda, ref.w_star)) <= 1e-12);
      CHECK(ref.gradient_norm <= 1e-12);
      CHECK(ref.p_star == doctest::Approx(objective(ds, *loss, lambda, ref.w_star)).epsilon(1e-15));
      for (std::size_t i = 0; i < ds.n(); ++i)
        CHECK(ref.alpha_star[i] ==
              -loss->derivative(ds.matrix().column(i).dot(ref.w_star), ds.labels()[i]));
      // w* = (1/(lambda n)) sum X_i alpha*_i
      const auto w = primal_from_dual(ds, ref.alpha_star, lambda);
      for (std::size_t j = 0; j < ds.d(); ++j) CHECK(std::abs(w[j] - ref.w_star[j]) <= 1e-10);
    }
  }
}

TEST_CASE("dfsdca_step by hand, n=2 d=1 square loss") {
  const auto ds = testing::dataset_from_dense(1, 2, {1.0, 2.0}, {1.0, -1.0});
  SolverState s;
  s.w = {0.0};
  s.alpha = {0.0, 0.0};
  s.theta = 0.1;
  s.p = {0.5, 0.5};
  const std::vector<std::size_t> batch{0, 1};
  dfsdca_step(s, batch, ds, kSquare, 0.5);
  // Delta = (-1, 1); alpha -= 0.2 Delta; w -= 0.1/(2*0.5*0.5) Delta_i x_i
  CHECK(std::abs(s.alpha[0] - 0.2) <= 1e-15);
  CHECK(std::abs(s.alpha[1] + 0.2) <= 1e-15);
  CHECK(std::abs(s.w[0] + 0.2) <= 1e-15);
  CHECK(s.t == 1);

  // second step uses the same w for both Delta_i
  dfsdca_step(s, batch, ds, kSquare, 0.5);
  const double d0 = (-0.2 - 1.0) + 0.2, d1 = (-0.4 + 1.0) - 0.2;
  CHECK(std::abs(s.alpha[0] - (0.2 - 0.2 * d0)) <= 1e-15);
  CHECK(std::abs(s.alpha[1] - (-0.2 - 0.2 * d1)) <= 1e-15);
  CHECK(std::abs(s.w[0] - (-0.2 - 0.2 * d0 * 1.0 - 0.2 * d1 * 2.0)) <= 1e-15);
}

TEST_CASE("dfsdca_step fixed points") {
  Rng rng(5);
  const auto ds = testing::random_dataset(6, 30, 0.4, rng);
  const double lambda = default_lambda(ds);
  const LambdaGamma lg(lambda, kLogistic.gamma());
  const auto ref = reference_solution(ds, kLogistic, lambda);

  // zero Delta: w = 0 and alpha_i = -phi'(0)
  auto s = initial_state(ds, tau_nice_bundle(ds, 4, lg));
  for (std::size_t i = 0; i < ds.n(); ++i) s.alpha[i] = -kLogistic.derivative(0.0, ds.labels()[i]);
  const auto alpha0 = s.alpha;
  const std::vector<std::size_t> batch{0, 3, 7};
  dfsdca_step(s, batch, ds, kLogistic, lambda);
  CHECK(s.alpha == alpha0);
  CHECK(std::all_of(s.w.begin(), s.w.end(), [](double x) { return x == 0.0; }));

  s = initial_state(ds, tau_nice_bundle(ds, 4, lg));
  s.w = ref.w_star;
  s.alpha = ref.alpha_star;
  const double e0 = potential(s, ref, lambda, kLogistic.gamma());
  TauNiceSampler sampler(ds.n(), 4);
  for (int k = 0; k < 100; ++k) dfsdca_step(s, sampler.draw(rng), ds, kLogistic, lambda);
  CHECK(std::abs(potential(s, ref, lambda, kLogistic.gamma()) - e0) <= 1e-20);
}

TEST_CASE("dfsdca_step reports non-finite updates") {
  const auto ds = testing::dataset_from_dense(1, 2, {1.0, 2.0}, {1.0, -1.0});
  SolverState s;
  s.w = {std::numeric_limits<double>::quiet_NaN()};
  s.alpha = {0.0, 0.0};
  s.theta = 0.1;
  s.p = {0.5, 0.5};
  s.t = 6;
  const std::vector<std::size_t> batch{1};
  try {
    dfsdca_step(s, batch, ds, kSquare, 0.5);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration() == 7);
    CHECK(e.index() == 1);
  }
}

TEST_CASE("effective passes") {
  CHECK(effective_passes(100, 1, 100) == 1.0);
  CHECK(effective_passes(100, 7, 100) == 1.0);
  CHECK(effective_passes(0, 4, 100) == 0.0);
  CHECK(effective_passes(200, 8, 100) == 2.0);
}

TEST_CASE("solve: iteration count, cadence and consistency") {
  Rng rng(6);
  const auto ds = testing::random_dataset(5, 40, 0.5, rng);
  const double lambda = default_lambda(ds);
  const LambdaGamma lg(lambda, 4.0);
  const auto ref = reference_solution(ds, kLogistic, lambda);
  SolveOptions opt;
  opt.epochs = 3.0;
  opt.reference = &ref;
  const auto st = solve(ds, kLogistic, lambda, SamplingSpec::tau_nice(3, 1), tau_nice_bundle(ds, 3, lg), opt);
  CHECK(st.t == 40);  // ceil(3 * 40 / 3)
  // cadence ceil(40 / 30) = 2, plus t = 0
  CHECK(st.trace.size() == 21);
  CHECK(st.trace.front().iteration == 0);
  CHECK(st.trace.back().iteration == 40);
  CHECK(st.trace.back().effective_passes == 1.0);
  CHECK(st.max_consistency_drift <= 1e-8);
  for (const auto& pt : st.trace) {
    CHECK(pt.gap >= kGapFloor);
    CHECK(pt.potential >= 0.0);
  }
  const double e0 = st.trace.front().potential;
  CHECK(e0 == doctest::Approx(4.0 / (2.0 * 40.0) *
                                  std::inner_product(ref.alpha_star.begin(), ref.alpha_star.end(),
                                                     ref.alpha_star.begin(), 0.0) +
                              0.5 * lambda * norm(ref.w_star) * norm(ref.w_star)));

  SolveOptions bare;
  bare.epochs = 1.0;
  bare.log_every = 5;
  const auto nb = solve(ds, kLogistic, lambda, SamplingSpec::serial_uniform(2), serial_uniform_bundle(ds, lg), bare);
  CHECK(nb.trace.size() == 9);
  CHECK(std::isnan(nb.trace[3].gap));
  CHECK(std::isnan(nb.trace[3].potential));
}

TEST_CASE("solve rejects mismatched inputs") {
  Rng rng(7);
  const auto ds = testing::random_dataset(5, 20, 0.5, rng);
  const LambdaGamma lg(0.1, 4.0);
  SolveOptions opt;
  CHECK_THROWS_AS(solve(ds, kLogistic, 0.1, SamplingSpec::tau_nice(2), tau_nice_bundle(ds, 3, lg), opt), Error);
  CHECK_THROWS_AS(solve(ds, kLogistic, 0.1, SamplingSpec::serial_uniform(), serial_importance_bundle(ds, lg), opt), Error);
  CHECK_THROWS_AS(solve(ds, kLogistic, 0.0, SamplingSpec::serial_uniform(), serial_uniform_bundle(ds, lg), opt), Error);
  std::vector<double> bad(ds.n(), 0.5);
  const Dataset soft(SparseColumnMatrix(ds.matrix()), bad);
  CHECK_THROWS_AS(solve(soft, kLogistic, 0.1, SamplingSpec::serial_uniform(), serial_uniform_bundle(soft, lg), opt), Error);
}

TEST_CASE("solve stops at the target gap and is deterministic") {
  Rng rng(8);
  const auto ds = testing::random_dataset(5, 30, 0.5, rng);
  const double lambda = default_lambda(ds);
  const LambdaGamma lg(lambda, 4.0);
  const auto ref = reference_solution(ds, kLogistic, lambda);
  SolveOptions opt;
  opt.epochs = 200;
  opt.reference = &ref;
  opt.target_gap = 1e-6;
  const auto a = solve(ds, kLogistic, lambda, SamplingSpec::tau_nice(2, 5), tau_nice_bundle(ds, 2, lg), opt);
  const auto b = solve(ds, kLogistic, lambda, SamplingSpec::tau_nice(2, 5), tau_nice_bundle(ds, 2, lg), opt);
  CHECK(a.trace.back().gap <= 1e-6);
  CHECK(a.trace[a.trace.size() - 2].gap > 1e-6);
  CHECK(a.t < 3000);
  CHECK(a.w == b.w);
  CHECK(a.alpha == b.alpha);
}

TEST_CASE("solve raises on divergence with provenance") {
  Rng rng(9);
  const auto ds = testing::random_dataset(5, 30, 0.5, rng);
  const double lambda = 1e-4;
  auto eso = serial_uniform_bundle(ds, LambdaGamma(lambda, 1.0));
  eso.theta = 1.0;  // far outside the admissible bound
  std::vector<double> y(ds.n());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(i);
  const Dataset reg(SparseColumnMatrix(ds.matrix()), y);
  SolveOptions opt;
  opt.epochs = 100;
  try {
    solve(reg, kSquare, lambda, SamplingSpec::serial_uniform(1), eso, opt);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("sampling=serial-uniform") != std::string::npos);
    CHECK(std::string(e.what()).find("dataset=") != std::string::npos);
  }
}

TEST_CASE("trace CSV") {
  std::vector<TracePoint> trace(2);
  trace[0].effective_passes = 0.0;
  trace[0].gap = 0.5;
  trace[0].potential = 0.25;
  trace[1].effective_passes = 0.1;
  std::ostringstream out;
  write_trace_csv(out, trace);
  CHECK(out.str() == "effective_passes,gap,potential\n0,0.5,0.25\n0.1,,\n");
}

TEST_CASE("linear convergence in the seed mean for every sampling") {
  Rng rng(10);
  const auto ds = testing::random_dataset(6, 40, 0.4, rng);
  const double lambda = default_lambda(ds);
  const LambdaGamma lg(lambda, 4.0);
  const auto ref = reference_solution(ds, kLogistic, lambda);
  for (auto& [sampling, eso] : five_variants(ds, 4, lg)) {
    SolveOptions opt;
    opt.reference = &ref;
    opt.epochs = 5;
    const std::size_t tau = sampling.batch_size();
    std::vector<double> mean;
    std::vector<std::size_t> iters;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      sampling.seed = seed;
      const auto st = solve(ds, kLogistic, lambda, sampling, eso, opt);
      mean.resize(st.trace.size(), 0.0);
      iters.resize(st.trace.size());
      for (std::size_t k = 0; k < st.trace.size(); ++k) {
        mean[k] += st.trace[k].potential / 20.0;
        iters[k] = st.trace[k].iteration;
      }
      CHECK(st.max_consistency_drift <= 1e-8);
    }
    INFO("sampling " << to_string(sampling.kind) << " tau " << tau);
    for (std::size_t k = 0; k < mean.size(); ++k)
      CHECK(mean[k] <= 1.2 * std::exp(-eso.theta * static_cast<double>(iters[k])) * mean[0]);
  }
}

TEST_CASE("tau=1 bucket and tau-nice runs agree statistically") {
  Rng rng(11);
  const auto ds = testing::random_dataset(6, 30, 0.4, rng);
  const double lambda = default_lambda(ds);
  const LambdaGamma lg(lambda, 4.0);
  const auto ref = reference_solution(ds, kLogistic, lambda);
  const auto ub = uniform_bucket_bundle(ds, make_partition(30, 1), lg);
  const auto nice = tau_nice_bundle(ds, 1, lg);
  CHECK(ub.bundle.theta == doctest::Approx(nice.theta).epsilon(1e-14));
  SolveOptions opt;
  opt.reference = &ref;
  opt.epochs = 10;
  auto stats = [&](SamplingSpec spec, const EsoBundle& eso) {
    std::vector<double> logs;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      spec.seed = seed;
      logs.push_back(std::log(solve(ds, kLogistic, lambda, spec, eso, opt).trace.back().gap));
    }
    const double m = std::accumulate(logs.begin(), logs.end(), 0.0) / 30.0;
    double var = 0.0;
    for (double x : logs) var += (x - m) * (x - m) / 29.0;
    return std::pair{m, var};
  };
  const auto [ma, va] = stats(SamplingSpec::bucket(std::make_shared<const BucketPlan>(ub.plan)), ub.bundle);
  const auto [mb, vb] = stats(SamplingSpec::tau_nice(1), nice);
  CHECK(std::abs(ma - mb) <= 3.0 * std::sqrt(va / 30.0 + vb / 30.0));
}

TEST_CASE("serial importance beats uniform on skewed norms") {
  Rng rng(12);
  const auto base = testing::random_dataset(5, 60, 0.6, rng);
  std::vector<double> L(60, 1.0);
  L[0] = 200.0;
  L[1] = 100.0;
  const auto ds = rescale_to_squared_norms(base, L);
  const double lambda = default_lambda(ds);
  const LambdaGamma lg(lambda, 4.0);
  const auto ref = reference_solution(ds, kLogistic, lambda);
  SolveOptions opt;
  opt.reference = &ref;
  opt.epochs = 2000;
  opt.target_gap = 1e-10;
  const auto unif = serial_uniform_bundle(ds, lg);
  const auto imp = serial_importance_bundle(ds, lg);
  std::vector<double> ratio;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto a = solve(ds, kLogistic, lambda, SamplingSpec::serial_uniform(seed), unif, opt);
    const auto b = solve(ds, kLogistic, lambda, SamplingSpec::serial_importance(imp.p, seed), imp, opt);
    REQUIRE(a.trace.back().gap <= 1e-10);
    REQUIRE(b.trace.back().gap <= 1e-10);
    ratio.push_back(a.trace.back().effective_passes / b.trace.back().effective_passes);
  }
  std::sort(ratio.begin(), ratio.end());
  CHECK(ratio[2] > 1.0);
}
