#include <benchmark/benchmark.h>

#include <random>

#include "ecmirror/federation.hpp"
#include "ecmirror/glare.hpp"

using namespace ecmirror;

namespace {

std::vector<NodeUpdate> cohort(std::size_t nodes, std::size_t dim) {
  std::mt19937_64 rng(nodes * 31 + dim);
  std::uniform_real_distribution<double> v(-1.0, 1.0);
  std::vector<NodeUpdate> out(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    out[i].node_id = "node-" + std::to_string(i);
    out[i].params.schema = 1;
    out[i].params.values.resize(dim);
    for (auto& x : out[i].params.values) x = v(rng);
    out[i].usage_count = 1 + rng() % 20;
    out[i].staleness = rng() % 4;
    out[i].mean_error = 0.05 + 0.01 * static_cast<double>(i % 7);
  }
  return out;
}

void BM_Aggregate(benchmark::State& state) {
  const auto ups = cohort(static_cast<std::size_t>(state.range(0)), 404);
  const FederationConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(ups, cfg));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Aggregate)->RangeMultiplier(2)->Range(2, 32)->Complexity(benchmark::oN);

void BM_AggregateAndCorrect(benchmark::State& state) {
  const auto ups = cohort(static_cast<std::size_t>(state.range(0)), 404);
  const FederationConfig cfg;
  for (auto _ : state) {
    const ParamVector g = aggregate(ups, cfg);
    benchmark::DoNotOptimize(error_correct(g, ups, cfg));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AggregateAndCorrect)->RangeMultiplier(2)->Range(2, 32)->Complexity(benchmark::oN);

void BM_FederationRound(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto ups = cohort(n, 404);
  for (auto _ : state) {
    state.PauseTiming();
    Federation fed(FederationConfig{}, ups.front().params);
    for (const auto& u : ups) {
      fed.register_node(u.node_id);
      fed.submit(u);
    }
    state.ResumeTiming();
    benchmark::DoNotOptimize(fed.run_round(1));
  }
}
BENCHMARK(BM_FederationRound)->RangeMultiplier(2)->Range(2, 32);

void BM_Assess(benchmark::State& state) {
  const TopsisCalibration cal;
  double x = 0.0;
  for (auto _ : state) {
    x = x > 4.9 ? 0.0 : x + 0.01;
    benchmark::DoNotOptimize(assess({x, 0.5 * x, 0}, cal));
  }
}
BENCHMARK(BM_Assess);

}  // namespace
BENCHMARK_MAIN();
