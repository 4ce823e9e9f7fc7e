#pragma once

#include "quadgroup/data.hpp"
#include "quadgroup/inference.hpp"
#include "quadgroup/tree.hpp"

#include <string>
#include <vector>

namespace quadgroup {

/// Weighted-Bonferroni multiplicity correction for a group of
/// group_size variables out of p_total: min(p_raw·p_total/group_size, 1).
double adjust_pvalue(double p_raw, int group_size, int p_total);

/// Group p-value engine settings for the tree descent.
struct HierEngineConfig {
  /// sigma or identity; general needs a per-group weight matrix and is
  /// not supported in the descent.
  ProjectionMode mode = ProjectionMode::sigma;
  double tau = 1.0;
  double c_lambda = 0.03;
  InitialFitOptions fit;
};

struct HierFinding {
  GroupSpec group;
  double p_raw = 1.0;
  double p_tilde = 1.0;
  double p_adjusted = 1.0;
};

/// Per-node audit entry for every node visited by the descent.
struct HierNodeRecord {
  int node_id = -1;
  double p_raw = 1.0;
  double p_tilde = 1.0;
  double p_adjusted = 1.0;
  bool significant = false;
  /// False when the engine failed on this node (treated non-significant).
  bool tested_ok = true;
};

struct HierResult {
  std::vector<HierFinding> findings;
  double alpha = 0.05;
  /// Nodes where the engine produced a p-value.
  int tested_count = 0;
  std::vector<HierNodeRecord> tested_log;
  std::vector<std::string> warnings;
};

/// Top-down descent: test the root group, adjust for multiplicity,
/// monotonize by the running maximum along the path, and recurse into
/// children of significant nodes. Findings are the significant
/// frontier: significant nodes none of whose children are significant.
/// One initial fit is computed for the dataset and shared by all nodes.
HierResult run_hierarchy(const Dataset& d, const ClusterTree& tree, double alpha,
                         const HierEngineConfig& cfg = {});

/// Findings as CSV: members (semicolon-joined), p_raw, p_tilde, p_adjusted.
std::string hier_to_csv(const HierResult& result);

/// Full result including warnings and the audit log.
std::string hier_to_json(const HierResult& result);

}  // namespace quadgroup
