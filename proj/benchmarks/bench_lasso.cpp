#include "quadgroup/data.hpp"
#include "quadgroup/lasso.hpp"
#include "quadgroup/rng.hpp"

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include <cmath>

namespace {

quadgroup::Dataset banded_dataset(int n, int p) {
  quadgroup::CounterRng x_rng(1, 0, quadgroup::StreamRole::covariates);
  quadgroup::CounterRng e_rng(1, 0, quadgroup::StreamRole::noise);
  quadgroup::Dataset d;
  d.x.resize(n, p);
  for (int i = 0; i < n; ++i) {
    double prev = 0.0;
    for (int j = 0; j < p; ++j) {
      const double fresh = x_rng.gaussian();
      d.x(i, j) = 0.6 * prev + 0.8 * fresh;
      prev = d.x(i, j);
    }
  }
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    d.y(i) = 0.5 * (d.x(i, 4) + d.x(i, 9) + d.x(i, 19)) + e_rng.gaussian();
  }
  return d;
}

void bm_lasso_fixed_penalty(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int p = static_cast<int>(state.range(1));
  const quadgroup::Dataset d = banded_dataset(n, p);
  const double lambda = 0.1 * std::sqrt(std::log(p) / n);
  quadgroup::LassoOptions opts;
  for (auto _ : state) {
    benchmark::DoNotOptimize(quadgroup::fit_lasso(d, lambda, opts));
  }
}

void bm_initial_fit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int p = static_cast<int>(state.range(1));
  const quadgroup::Dataset d = banded_dataset(n, p);
  for (auto _ : state) {
    benchmark::DoNotOptimize(quadgroup::fit_initial(d));
  }
}

}  // namespace

BENCHMARK(bm_lasso_fixed_penalty)
    ->Args({200, 200})
    ->Args({500, 500})
    ->Args({800, 500})
    ->Unit(benchmark::kMillisecond);

BENCHMARK(bm_initial_fit)
    ->Args({200, 200})
    ->Args({500, 500})
    ->Unit(benchmark::kMillisecond);
