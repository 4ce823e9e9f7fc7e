#pragma once

#include "quadgroup/data.hpp"
#include "quadgroup/lasso.hpp"

#include <Eigen/Dense>

#include <optional>

namespace quadgroup {

enum class ProjectionMode { sigma, general, identity };

/// Constrained program defining the bias-correcting direction:
/// minimize u⊤Σ̂u subject to |⟨w, Σ̂u − target⟩| ≤ scale·lambda_n for
/// every w in the constraint set (all standard basis vectors, plus the
/// normalized loading target/scale in modes sigma and general).
struct ProjectionProblem {
  Eigen::MatrixXd sigma_hat_mat;
  Eigen::VectorXd target;
  double scale = 0.0;
  double lambda_n = 0.0;
  ProjectionMode mode = ProjectionMode::sigma;
};

struct ProjectionSolution {
  Eigen::VectorXd u;
  /// u⊤Σ̂u at the solution.
  double quad_value = 0.0;
  /// Largest constraint value max_w |⟨w, Σ̂u − target⟩| at return.
  double max_violation = 0.0;
  /// lambda_n after feasibility escalation (equal to lambda_n when no
  /// escalation was needed).
  double lambda_effective = 0.0;
  long iterations = 0;
};

/// Assembles the projection program from precomputed statistics.
/// sigma_hat is Σ̂ on the correction sample of size m; the loading is
/// sigma → Σ̂_{G,G}β̂_G, general → Aβ̂_G, identity → β̂_G, embedded into
/// a p-vector that is zero outside G; lambda_n = c_lambda·√(log p/m).
ProjectionProblem build_problem_gram(Eigen::MatrixXd sigma_hat, double m,
                                     const Eigen::VectorXd& beta_hat, const GroupSpec& g,
                                     ProjectionMode mode,
                                     const std::optional<WeightMatrix>& a, double c_lambda);

/// Convenience wrapper computing Σ̂ from the dataset (second half only
/// when fit.split is present) before delegating to build_problem_gram.
ProjectionProblem build_problem(const InitialFit& fit, const Dataset& d, const GroupSpec& g,
                                ProjectionMode mode, const std::optional<WeightMatrix>& a,
                                double c_lambda);

/// Solves the program via an active-set method on the penalized dual,
/// one dual variable per constraint. scale = 0 short-circuits to
/// u = 0. When the program is infeasible at lambda_n the penalty is
/// escalated by factor 1.5 up to 10 times; failure past the cap throws
/// SolverError carrying the final violation.
ProjectionSolution solve_projection(const ProjectionProblem& prob);

}  // namespace quadgroup
