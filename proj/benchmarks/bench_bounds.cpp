#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "twincheck/bounds.hpp"
#include "twincheck/builtin_twins.hpp"
#include "twincheck/stats.hpp"
#include "twincheck/testing.hpp"
#include "twincheck/twin.hpp"
#include "twincheck/world.hpp"

namespace {

using namespace twincheck;

HypothesisSpec whole_space_spec(const DiscreteWorld& w) {
  HypothesisSpec spec;
  spec.t = 1;
  spec.actions = {1};
  spec.region.per_step.assign(2, {});
  spec.outcome.t = 1;
  spec.outcome.feature = "x";
  spec.outcome.y_lo = 0.0;
  spec.outcome.y_up = 1.0;
  spec.id = "bench";
  return spec;
}

void BM_SummarizeObservational(benchmark::State& state) {
  const auto w = brake_pad_world();
  const auto d = sample_observational(w, state.range(0), 1);
  const auto spec = whole_space_spec(w);
  for (auto _ : state) {
    auto s = summarize_observational(d, spec);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_SummarizeObservational)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_BootstrapBound(benchmark::State& state) {
  std::vector<double> samples(static_cast<std::size_t>(state.range(0)));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (auto& v : samples) v = unif(rng);
  for (auto _ : state) {
    auto b = bootstrap_bound(samples, 0.05, BoundSide::Lower, 100, 42);
    benchmark::DoNotOptimize(b);
  }
}
BENCHMARK(BM_BootstrapBound)->Arg(500)->Arg(5000);

void BM_HoeffdingTest(benchmark::State& state) {
  const auto w = brake_pad_world();
  const auto d = sample_observational(w, 5000, 1);
  WorldTwinFactory twin(w, TwinMode::Correct);
  const auto spec = whole_space_spec(w);
  const auto twin_data = generate_twin_dataset(d, spec.actions, twin, 5000, 2);
  TestConfig cfg;
  for (auto _ : state) {
    auto o = test_hypothesis(d, twin_data, spec, cfg);
    benchmark::DoNotOptimize(o);
  }
}
BENCHMARK(BM_HoeffdingTest);

}  // namespace

BENCHMARK_MAIN();
