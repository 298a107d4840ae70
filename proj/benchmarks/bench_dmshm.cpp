#include <benchmark/benchmark.h>

#include <random>

#include "dmshm/density.hpp"
#include "dmshm/memory.hpp"
#include "dmshm/model.hpp"

namespace {

using namespace dmshm;

std::vector<Vector> points(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Vector> out(n, Vector(k));
  for (auto& p : out)
    for (auto& v : p) v = normal(rng);
  return out;
}

PeriodDataset dataset(std::size_t n, std::size_t k, std::size_t m, std::uint64_t seed) {
  PeriodDataset d;
  d.index = 1;
  const auto xs = points(n, k, seed);
  const auto ys = points(n, m, seed + 1);
  for (std::size_t i = 0; i < n; ++i) d.samples.push_back({xs[i], ys[i]});
  return d;
}

void BM_DensityQuery(benchmark::State& state) {
  const auto pts = points(static_cast<std::size_t>(state.range(0)), 4, 1);
  const DensityModel kde(pts, 0.5);
  const auto queries = points(64, 4, 2);
  for (auto _ : state)
    for (const auto& q : queries) benchmark::DoNotOptimize(kde(q));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_DensityQuery)->Arg(50)->Arg(500);

void BM_FitBandwidth(benchmark::State& state) {
  const auto pts = points(static_cast<std::size_t>(state.range(0)), 4, 3);
  for (auto _ : state) benchmark::DoNotOptimize(fit_density(pts).bandwidth());
}
BENCHMARK(BM_FitBandwidth)->Arg(50)->Arg(200);

void BM_UpdateMemory(benchmark::State& state) {
  const auto first = dataset(200, 4, 1, 4);
  const auto second = dataset(200, 4, 1, 5);
  MemorySet empty;
  empty.budget = 50;
  auto repr = [](std::span<const double> x) { return Vector(x.begin(), x.end()); };
  const auto memory = update_memory(empty, first, repr, 1).memory;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(update_memory(memory, second, repr, ++seed).gamma);
}
BENCHMARK(BM_UpdateMemory);

void BM_Gradient(benchmark::State& state) {
  const Shape shape{4, 32, 1};
  const auto params = RegressorParams::initialize(shape, 1);
  const auto prev = RegressorParams::initialize(shape, 2);
  const auto batch = dataset(64, 4, 1, 6);
  std::vector<MemoryEntry> memory;
  for (const auto& s : dataset(50, 4, 1, 7).samples) memory.push_back({s.x, represent(prev, s.x), s.y});
  const LossInputs in{&prev, memory, batch.samples, LossWeights{}, {}};
  for (auto _ : state) benchmark::DoNotOptimize(gradient(params, in).values().data());
}
BENCHMARK(BM_Gradient);

}  // namespace

BENCHMARK_MAIN();
