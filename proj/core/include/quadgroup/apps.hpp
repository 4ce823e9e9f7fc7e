#pragma once

#include "quadgroup/data.hpp"
#include "quadgroup/inference.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace quadgroup {

/// Interaction design for heterogeneous-treatment testing: the model
/// y = (D∘X)γ + Xβ + ε over W = [D·X, X], so H₀: no interaction is
/// the group test of the first p coefficients.
struct InteractionDesign {
  Dataset data;
  GroupSpec gamma_group;
  /// Set when the interaction block is identically zero (treatment
  /// constant at 0); the test is degenerate but still runs.
  std::optional<std::string> warning;
};

/// Builds W = [D·X, X] (n × 2p) and the group {1..p}. The treatment
/// may be any numeric vector of length n.
InteractionDesign build_interaction(const Dataset& d, const Eigen::VectorXd& treatment);

struct HeritOptions {
  double level = 0.95;
  double tau = 1.0;
  ProjectionMode mode = ProjectionMode::sigma;
  double c_lambda = 0.03;
  /// Also report q_hat divided by the sample variance of y
  /// (denominator n−1), a variance-explained proportion.
  bool normalize = false;
  InitialFitOptions fit;
};

struct HeritRecord {
  GroupSpec group;
  QuadEstimate estimate;
  ConfInterval ci;
  std::optional<double> proportion;
};

/// Per-group explained-variance estimates with confidence intervals,
/// sharing a single initial fit across all groups.
std::vector<HeritRecord> heritability_report(const Dataset& d,
                                             const std::vector<GroupSpec>& groups,
                                             const HeritOptions& opts = {});

std::string herit_to_json(const std::vector<HeritRecord>& records);
std::string herit_to_csv(const std::vector<HeritRecord>& records);

}  // namespace quadgroup
