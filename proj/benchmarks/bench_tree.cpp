#include "quadgroup/data.hpp"
#include "quadgroup/rng.hpp"
#include "quadgroup/tree.hpp"

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

namespace {

quadgroup::Dataset block_dataset(int n, int p) {
  quadgroup::CounterRng rng(5, 0, quadgroup::StreamRole::covariates);
  quadgroup::Dataset d;
  d.x.resize(n, p);
  const int block = 10;
  for (int i = 0; i < n; ++i) {
    double shared = 0.0;
    for (int j = 0; j < p; ++j) {
      if (j % block == 0) shared = rng.gaussian();
      d.x(i, j) = 0.8 * shared + 0.6 * rng.gaussian();
    }
  }
  d.y = Eigen::VectorXd::Zero(n);
  return d;
}

void bm_build_tree(benchmark::State& state, quadgroup::Linkage linkage) {
  const int n = static_cast<int>(state.range(0));
  const int p = static_cast<int>(state.range(1));
  const quadgroup::Dataset d = block_dataset(n, p);
  for (auto _ : state) {
    benchmark::DoNotOptimize(quadgroup::build_tree(d, linkage));
  }
}

void bm_tree_complete(benchmark::State& state) {
  bm_build_tree(state, quadgroup::Linkage::complete);
}

void bm_tree_average(benchmark::State& state) {
  bm_build_tree(state, quadgroup::Linkage::average);
}

}  // namespace

BENCHMARK(bm_tree_complete)
    ->Args({200, 200})
    ->Args({500, 500})
    ->Args({200, 1000})
    ->Unit(benchmark::kMillisecond);

BENCHMARK(bm_tree_average)
    ->Args({200, 200})
    ->Args({500, 500})
    ->Unit(benchmark::kMillisecond);
