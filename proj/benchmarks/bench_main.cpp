#include <benchmark/benchmark.h>

#include "rdelab/analysis.hpp"
#include "rdelab/distiter.hpp"
#include "rdelab/pgf.hpp"
#include "rdelab/simulate.hpp"

using namespace rdelab;

namespace {

const auto kBinary = OffspringSpec::deterministic(2);

void BM_ThinnedEval(benchmark::State& state) {
  const Pgf h(OffspringSpec::thinned(kBinary, state.range(0) / 100.0));
  double s = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(h.eval(s));
    s = s >= 0.999 ? 0.0 : s + 0.001;
  }
}
BENCHMARK(BM_ThinnedEval)->Arg(30)->Arg(50)->Arg(60);

void BM_SolveMu1(benchmark::State& state) {
  const Pgf h(OffspringSpec::geometric(0.25));
  for (auto _ : state) benchmark::DoNotOptimize(solve_mu1(h));
}
BENCHMARK(BM_SolveMu1);

void BM_FindTwoCycles(benchmark::State& state) {
  const Pgf h(kBinary);
  for (auto _ : state) benchmark::DoNotOptimize(find_two_cycles(h));
}
BENCHMARK(BM_FindTwoCycles);

void BM_SampleTree(benchmark::State& state) {
  const FamilySampler sampler(kBinary);
  SampledTree tree;
  RngStream rng(1);
  const int depth = static_cast<int>(state.range(0));
  for (auto _ : state) {
    sample_tree_into(tree, sampler, depth, rng);
    benchmark::DoNotOptimize(tree.size());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(tree.size()));
}
BENCHMARK(BM_SampleTree)->Arg(8)->Arg(12);

void BM_McMoments(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(mc_moments(kBinary, 10, state.range(0), 7));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_McMoments)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_ApplyT(benchmark::State& state) {
  RngStream rng(3);
  const auto nu = mean_matched_uniform(0.618, static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(apply_T(nu, kBinary, rng, nu.size()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ApplyT)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
