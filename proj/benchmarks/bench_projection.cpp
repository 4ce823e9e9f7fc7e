#include "quadgroup/data.hpp"
#include "quadgroup/lasso.hpp"
#include "quadgroup/projection.hpp"
#include "quadgroup/rng.hpp"

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include <numeric>
#include <vector>

namespace {

struct ProjectionFixture {
  quadgroup::ProjectionProblem problem;
};

/// A realistic instance: AR design, lasso pilot on the first block,
/// moderate group, covariance-weighted target.
ProjectionFixture make_fixture(int n, int p, quadgroup::ProjectionMode mode) {
  quadgroup::CounterRng x_rng(3, 0, quadgroup::StreamRole::covariates);
  quadgroup::CounterRng e_rng(3, 0, quadgroup::StreamRole::noise);
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
    d.y(i) = 0.4 * (d.x(i, 10) + d.x(i, 11) + d.x(i, 12)) + e_rng.gaussian();
  }
  const quadgroup::InitialFit fit = quadgroup::fit_initial(d);

  std::vector<int> members(static_cast<std::size_t>(p / 4));
  std::iota(members.begin(), members.end(), 5);
  const quadgroup::GroupSpec g(std::move(members));

  const Eigen::MatrixXd sigma_hat = d.x.transpose() * d.x / static_cast<double>(n);
  ProjectionFixture fixture{quadgroup::build_problem_gram(sigma_hat, n, fit.beta_hat, g,
                                                          mode, std::nullopt, 0.25)};
  return fixture;
}

void bm_projection(benchmark::State& state, quadgroup::ProjectionMode mode) {
  const int n = static_cast<int>(state.range(0));
  const int p = static_cast<int>(state.range(1));
  const ProjectionFixture fixture = make_fixture(n, p, mode);
  for (auto _ : state) {
    benchmark::DoNotOptimize(quadgroup::solve_projection(fixture.problem));
  }
}

void bm_projection_sigma(benchmark::State& state) {
  bm_projection(state, quadgroup::ProjectionMode::sigma);
}

void bm_projection_identity(benchmark::State& state) {
  bm_projection(state, quadgroup::ProjectionMode::identity);
}

}  // namespace

BENCHMARK(bm_projection_sigma)
    ->Args({200, 200})
    ->Args({500, 500})
    ->Args({800, 500})
    ->Unit(benchmark::kMillisecond);

BENCHMARK(bm_projection_identity)
    ->Args({200, 200})
    ->Args({500, 500})
    ->Unit(benchmark::kMillisecond);
