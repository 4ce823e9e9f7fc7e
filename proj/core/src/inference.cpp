#include "quadgroup/inference.hpp"

#include "quadgroup/normal.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace quadgroup {

const char* mode_name(ProjectionMode mode) {
  switch (mode) {
    case ProjectionMode::sigma: return "sigma";
    case ProjectionMode::general: return "general";
    case ProjectionMode::identity: return "identity";
  }
  return "unknown";
}

namespace {

double floored(double v_hat) {
  return std::max(v_hat, std::numeric_limits<double>::min());
}

}  // namespace

QuadEstimate QuadEstimate::with_tau(double new_tau) const {
  if (!(new_tau >= 0.0)) throw std::invalid_argument("with_tau: tau must be nonnegative");
  QuadEstimate out = *this;
  out.tau = new_tau;
  out.v_hat = floored(var_base + var_fluctuation + new_tau / n_used);
  return out;
}

EstimationContext::EstimationContext(const Dataset& d, const InitialFit& fit, double c_lambda)
    : c_lambda_(c_lambda) {
  validate_dataset(d);
  if (fit.beta_hat.size() != d.p()) {
    throw std::invalid_argument("estimation: fit dimension mismatches dataset");
  }
  if (!(c_lambda > 0.0)) throw std::invalid_argument("estimation: c_lambda must be positive");

  Eigen::VectorXd y_corr;
  if (fit.split) {
    const auto n2 = static_cast<Eigen::Index>(fit.split->second_half.size());
    x_corr_.resize(n2, d.p());
    y_corr.resize(n2);
    for (Eigen::Index i = 0; i < n2; ++i) {
      const Eigen::Index row = fit.split->second_half[static_cast<std::size_t>(i)] - 1;
      x_corr_.row(i) = d.x.row(row);
      y_corr(i) = d.y(row);
    }
  } else {
    x_corr_ = d.x;
    y_corr = d.y;
  }
  m_ = static_cast<double>(x_corr_.rows());
  sigma_hat_mat_ = (x_corr_.transpose() * x_corr_) / m_;
  score_ = x_corr_.transpose() * (y_corr - x_corr_ * fit.beta_hat) / m_;
  beta_hat_ = fit.beta_hat;
  sigma_hat_ = fit.sigma_hat;
}

QuadEstimate EstimationContext::estimate(const GroupSpec& g, ProjectionMode mode,
                                         const std::optional<WeightMatrix>& a,
                                         double tau) const {
  if (!(tau >= 0.0)) throw std::invalid_argument("estimation: tau must be nonnegative");
  ProjectionProblem prob =
      build_problem_gram(sigma_hat_mat_, m_, beta_hat_, g, mode, a, c_lambda_);
  const double plug_in = beta_hat_.dot(prob.target);
  const ProjectionSolution sol = solve_projection(prob);
  const double correction = 2.0 * sol.u.dot(score_);

  const double var_base = 4.0 * sigma_hat_ * sigma_hat_ / m_ * sol.quad_value;
  double var_fluctuation = 0.0;
  if (mode == ProjectionMode::sigma) {
    const auto gsize = static_cast<Eigen::Index>(g.size());
    Eigen::VectorXd fitted_g = Eigen::VectorXd::Zero(x_corr_.rows());
    for (Eigen::Index k = 0; k < gsize; ++k) {
      fitted_g += x_corr_.col(g.col(static_cast<std::size_t>(k))) *
                  beta_hat_(g.col(static_cast<std::size_t>(k)));
    }
    var_fluctuation =
        (fitted_g.array().square() - plug_in).square().sum() / (m_ * m_);
  }

  return QuadEstimate{
      .q_hat = plug_in + correction,
      .v_hat = floored(var_base + var_fluctuation + tau / m_),
      .plug_in = plug_in,
      .correction = correction,
      .mode = mode,
      .tau = tau,
      .group = g,
      .n_used = static_cast<int>(m_),
      .p = static_cast<int>(sigma_hat_mat_.rows()),
      .sigma_hat = sigma_hat_,
      .lambda_effective = sol.lambda_effective,
      .var_base = var_base,
      .var_fluctuation = var_fluctuation,
      .proj_quad_value = sol.quad_value,
      .proj_max_violation = sol.max_violation,
      .proj_iterations = sol.iterations,
  };
}

QuadEstimate estimate_q_sigma(const Dataset& d, const InitialFit& fit, const GroupSpec& g,
                              double tau, double c_lambda) {
  return EstimationContext(d, fit, c_lambda).estimate(g, ProjectionMode::sigma, std::nullopt, tau);
}

QuadEstimate estimate_q_a(const Dataset& d, const InitialFit& fit, const GroupSpec& g,
                          const std::optional<WeightMatrix>& a, double tau, double c_lambda) {
  const ProjectionMode mode = a ? ProjectionMode::general : ProjectionMode::identity;
  return EstimationContext(d, fit, c_lambda).estimate(g, mode, a, tau);
}

TestResult test_group(const QuadEstimate& est, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("test_group: alpha must lie in (0, 1)");
  }
  TestResult out;
  out.alpha = alpha;
  out.statistic = est.q_hat / std::sqrt(est.v_hat);
  out.p_value = 0.5 * std::erfc(out.statistic / std::sqrt(2.0));
  out.reject = out.p_value <= alpha;
  return out;
}

ConfInterval confidence_interval(const QuadEstimate& est, double level, bool truncate) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("confidence_interval: level must lie in (0, 1)");
  }
  const double half = norm_quantile(1.0 - (1.0 - level) / 2.0) * std::sqrt(est.v_hat);
  ConfInterval out;
  out.level = level;
  out.lower = est.q_hat - half;
  out.upper = est.q_hat + half;
  if (truncate) {
    out.truncated_at_zero = out.lower < 0.0;
    out.lower = std::max(out.lower, 0.0);
    out.upper = std::max(out.upper, 0.0);
  }
  return out;
}

std::string to_json_record(const QuadEstimate& est, const TestResult& test,
                           const ConfInterval& ci) {
  nlohmann::json record{
      {"mode", mode_name(est.mode)},
      {"group", est.group.indices()},
      {"q_hat", est.q_hat},
      {"v_hat", est.v_hat},
      {"plug_in", est.plug_in},
      {"correction", est.correction},
      {"statistic", test.statistic},
      {"p_value", test.p_value},
      {"reject", test.reject},
      {"alpha", test.alpha},
      {"ci", {ci.lower, ci.upper}},
      {"level", ci.level},
      {"tau", est.tau},
      {"lambda_effective", est.lambda_effective},
      {"sigma_hat", est.sigma_hat},
      {"n", est.n_used},
      {"p", est.p},
  };
  return record.dump(2);
}

}  // namespace quadgroup
