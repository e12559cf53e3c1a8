// Serial references versus OpenMP kernels on a synthetic pool.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <limits>
#include <map>

#include "relrank/data.hpp"
#include "relrank/kernels.hpp"
#include "relrank/nn.hpp"

namespace {

using namespace relrank;

struct Fixture {
  data::Dataset dataset;
  std::vector<SampleId> ids;
  nn::NetworkParams params;

  explicit Fixture(std::size_t n) : dataset(make(n)), ids(dataset.all_ids()) {
    const std::vector<std::size_t> sizes{dataset.feature_dim(), 32, 16, 1};
    params = nn::init_network(sizes, 1);
  }

  static data::Dataset make(std::size_t n) {
    data::SynthConfig c;
    c.n = n;
    c.seed = 1;
    return data::synth_generate(c);
  }
};

const Fixture& fixture(std::size_t n) {
  static std::map<std::size_t, Fixture> cache;
  return cache.try_emplace(n, n).first->second;
}

template <auto Kernel>
void posteriors(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(f.params, f.dataset, f.ids, 30, 7));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 30);
}

template <auto Kernel>
void scores(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(f.params, f.dataset));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void nearest_center(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  std::vector<double> dist(f.ids.size());
  const auto center = f.dataset[f.ids.front()].features;
  for (auto _ : state) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    Kernel(f.dataset, f.ids, center, dist);
    benchmark::DoNotOptimize(dist.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(posteriors<kernels::posteriors_serial>)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(posteriors<kernels::posteriors_parallel>)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(scores<kernels::scores_serial>)->Arg(5000)->Unit(benchmark::kMicrosecond);
BENCHMARK(scores<kernels::scores_parallel>)->Arg(5000)->Unit(benchmark::kMicrosecond);
BENCHMARK(nearest_center<kernels::nearest_center_update_serial>)->Arg(5000)->Unit(benchmark::kMicrosecond);
BENCHMARK(nearest_center<kernels::nearest_center_update_parallel>)->Arg(5000)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
