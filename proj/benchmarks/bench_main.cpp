#include <benchmark/benchmark.h>

#include <memory>

#include "dfsdca/eso.hpp"
#include "dfsdca/sampling.hpp"
#include "dfsdca/solver.hpp"
#include "dfsdca/synthetic.hpp"

namespace {

const dfsdca::Dataset& dataset() {
  static const auto ds = dfsdca::generate_synthetic({5000, 200, 0.1, dfsdca::NormDistribution::chisq10, 1});
  return ds;
}

void BM_DfsdcaStep(benchmark::State& state) {
  const auto& ds = dataset();
  const auto tau = static_cast<std::size_t>(state.range(0));
  const dfsdca::LossModel loss(dfsdca::LossKind::logistic);
  const double lambda = dfsdca::default_lambda(ds);
  const dfsdca::LambdaGamma lg(lambda, loss.gamma());
  const auto pb = dfsdca::practical_importance_plan(ds, dfsdca::make_partition(ds.n(), tau), lg);
  auto st = dfsdca::initial_state(ds, pb.bundle);
  dfsdca::Rng rng(1);
  std::vector<std::size_t> batch;
  for (auto _ : state) {
    pb.plan.draw(rng, batch);
    dfsdca::dfsdca_step(st, batch, ds, loss, lambda);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(tau));
}
BENCHMARK(BM_DfsdcaStep)->Arg(1)->Arg(8)->Arg(32);

void BM_VBucket(benchmark::State& state) {
  const auto& ds = dataset();
  const auto plan = dfsdca::BucketPlan::uniform(dfsdca::make_partition(ds.n(), static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(dfsdca::v_bucket(ds, plan));
}
BENCHMARK(BM_VBucket)->Arg(8)->Arg(32);

void BM_DrawBucketSample(benchmark::State& state) {
  const auto plan = dfsdca::BucketPlan::uniform(dfsdca::make_partition(50000, static_cast<std::size_t>(state.range(0))));
  dfsdca::Rng rng(1);
  std::vector<std::size_t> out;
  for (auto _ : state) {
    plan.draw(rng, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DrawBucketSample)->Arg(1)->Arg(32);

void BM_DrawTauNice(benchmark::State& state) {
  dfsdca::TauNiceSampler sampler(50000, static_cast<std::size_t>(state.range(0)));
  dfsdca::Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(sampler.draw(rng).data());
}
BENCHMARK(BM_DrawTauNice)->Arg(1)->Arg(32);

}  // namespace
BENCHMARK_MAIN();
