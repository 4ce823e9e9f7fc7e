#pragma once

#include "quadgroup/data.hpp"

#include <optional>
#include <string>
#include <vector>

namespace quadgroup {

enum class Linkage { complete, average };

struct TreeNode {
  int id = -1;
  /// Sorted 1-based covariate indices covered by this node.
  std::vector<int> members;
  /// Child node ids; empty for leaves, two entries otherwise.
  std::vector<int> children;
  std::optional<int> parent;
  /// Merge dissimilarity; 0 for leaves.
  double height = 0.0;
};

/// Binary hierarchy over covariates. Leaves are ids 0..p−1 (covariate
/// k+1 at id k); internal nodes follow in merge order; the root covers
/// {1..p}.
struct ClusterTree {
  std::vector<TreeNode> nodes;
  int root = -1;
  int p = 0;
};

/// Checks structural invariants: ids consistent, children partition
/// the parent's members, root covers {1..p}, leaves are singletons.
/// Throws std::invalid_argument on violation.
void validate_tree(const ClusterTree& tree);

/// Agglomerative clustering with dissimilarity 1 − correlation² and
/// the requested linkage. Ties break toward the pair with the
/// smallest member indices. Requires p ≥ 2 and non-constant columns.
ClusterTree build_tree(const Dataset& d, Linkage linkage = Linkage::complete);

std::string tree_to_json(const ClusterTree& tree);
ClusterTree tree_from_json(const std::string& text);

}  // namespace quadgroup
