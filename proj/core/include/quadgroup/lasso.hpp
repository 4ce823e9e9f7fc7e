#pragma once

#include "quadgroup/data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>

namespace quadgroup {

struct LassoOptions {
  /// Sweep converged when the largest coordinate change is below this.
  double coord_tol = 1e-7;
  /// Alternative stop: primal-dual gap below this.
  double gap_tol = 1e-8;
  long max_sweeps = 100000;
  /// Test hook, called with the penalized objective after each sweep.
  std::function<void(long sweep, double objective)> sweep_observer;
};

/// Minimizes (1/2m)·‖y − Xβ‖₂² + lambda·‖β‖₁ by cyclic coordinate
/// descent with covariance updates. Deterministic; throws SolverError
/// carrying the final duality gap if the sweep cap is reached.
Eigen::VectorXd fit_lasso(const Dataset& d, double lambda, const LassoOptions& opts = {});

/// Same solver on precomputed sufficient statistics: gram = X⊤X/m,
/// xty = X⊤y/m, yty = y⊤y/m. warm (when sized p) seeds the iterate.
Eigen::VectorXd fit_lasso_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty,
                               double yty, double lambda, const LassoOptions& opts = {},
                               Eigen::VectorXd warm = {});

/// Initial estimators for the bias-correction step.
struct InitialFit {
  Eigen::VectorXd beta_hat;
  double sigma_hat = 0.0;
  /// Lasso penalty at the final scaled-lasso iteration.
  double lambda_used = 0.0;
  double lambda0 = 0.0;
  /// Present iff fitting used the first half only; downstream
  /// correction then runs on the second half.
  std::optional<SampleSplit> split;
  int iterations = 0;
};

struct InitialFitOptions {
  bool split = false;
  std::uint64_t seed = 0;
  /// Penalty multiplier; sigma_hat·lambda0 is the lasso penalty.
  /// Defaults to 0.6·√(2.01·log p / m).
  std::optional<double> lambda0;
  LassoOptions lasso;
};

/// Scaled-lasso scheme: alternates β̂ = fit_lasso(σ̂·lambda0) and
/// σ̂² = ‖y − Xβ̂‖₂²/(m − ŝ), ŝ = min(‖β̂‖₀, m−1), to a fixed point.
/// Requires n ≥ 10; throws SolverError if 50 outer iterations do not
/// stabilize.
InitialFit fit_initial(const Dataset& d, const InitialFitOptions& opts = {});

}  // namespace quadgroup
