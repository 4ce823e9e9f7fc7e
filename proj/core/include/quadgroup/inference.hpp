#pragma once

#include "quadgroup/data.hpp"
#include "quadgroup/lasso.hpp"
#include "quadgroup/projection.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>

namespace quadgroup {

const char* mode_name(ProjectionMode mode);

/// Bias-corrected estimate of the group quadratic functional.
struct QuadEstimate {
  /// Point estimate; equals plug_in + correction exactly. May be
  /// negative even though the estimand is nonnegative.
  double q_hat = 0.0;
  /// Variance estimate: var_base + var_fluctuation + tau/n_used,
  /// floored at the smallest positive normal double.
  double v_hat = 0.0;
  double plug_in = 0.0;
  double correction = 0.0;
  ProjectionMode mode = ProjectionMode::sigma;
  double tau = 0.0;
  GroupSpec group;
  /// Correction-sample size m (second half under splitting).
  int n_used = 0;
  int p = 0;
  double sigma_hat = 0.0;
  double lambda_effective = 0.0;
  /// (4σ̂²/m)·û⊤Σ̂û.
  double var_base = 0.0;
  /// Second-moment fluctuation term; zero outside mode sigma.
  double var_fluctuation = 0.0;
  /// Projection solver diagnostics.
  double proj_quad_value = 0.0;
  double proj_max_violation = 0.0;
  long proj_iterations = 0;

  /// Same estimate re-assembled with a different τ; no re-solve.
  QuadEstimate with_tau(double new_tau) const;
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
};

struct ConfInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  bool truncated_at_zero = false;
};

/// Per-dataset precomputation shared across groups and modes: the
/// correction sample (second half when fit.split is present), its
/// second-moment matrix Σ̂, and the score X⊤(y − Xβ̂)/m. One context
/// serves every node of a hierarchical run.
class EstimationContext {
 public:
  EstimationContext(const Dataset& d, const InitialFit& fit, double c_lambda = 0.03);

  QuadEstimate estimate(const GroupSpec& g, ProjectionMode mode,
                        const std::optional<WeightMatrix>& a, double tau) const;

  const Eigen::MatrixXd& sigma_hat_mat() const { return sigma_hat_mat_; }
  double m() const { return m_; }
  double c_lambda() const { return c_lambda_; }

 private:
  Eigen::MatrixXd x_corr_;
  Eigen::MatrixXd sigma_hat_mat_;
  Eigen::VectorXd score_;
  Eigen::VectorXd beta_hat_;
  double sigma_hat_ = 0.0;
  double m_ = 0.0;
  double c_lambda_ = 0.03;
};

/// Q̂_Σ for the data-dependent weighting A = Σ̂_{G,G}; variance includes
/// the second-moment fluctuation term.
QuadEstimate estimate_q_sigma(const Dataset& d, const InitialFit& fit, const GroupSpec& g,
                              double tau, double c_lambda = 0.03);

/// Q̂_A for a known weight matrix; pass std::nullopt for A = identity
/// (basis-only constraint set, the ‖β_G‖₂² functional).
QuadEstimate estimate_q_a(const Dataset& d, const InitialFit& fit, const GroupSpec& g,
                          const std::optional<WeightMatrix>& a, double tau,
                          double c_lambda = 0.03);

/// One-sided level-alpha test of H₀: Q = 0 against Q > 0.
TestResult test_group(const QuadEstimate& est, double alpha);

/// Two-sided interval q_hat ± z_{1−(1−level)/2}·√v_hat; optional
/// truncation of the lower end at 0.
ConfInterval confidence_interval(const QuadEstimate& est, double level, bool truncate = false);

/// Serialized JSON result record for CLI output.
std::string to_json_record(const QuadEstimate& est, const TestResult& test,
                           const ConfInterval& ci);

}  // namespace quadgroup
