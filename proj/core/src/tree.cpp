#include "quadgroup/tree.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace quadgroup {

void validate_tree(const ClusterTree& tree) {
  if (tree.p < 1 || tree.nodes.empty()) throw std::invalid_argument("tree: empty");
  if (tree.root < 0 || static_cast<std::size_t>(tree.root) >= tree.nodes.size()) {
    throw std::invalid_argument("tree: root id out of range");
  }
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& node = tree.nodes[i];
    if (node.id != static_cast<int>(i)) throw std::invalid_argument("tree: ids must be positional");
    if (node.members.empty() || !std::is_sorted(node.members.begin(), node.members.end())) {
      throw std::invalid_argument("tree: node members must be nonempty and sorted");
    }
    if (node.children.empty()) {
      if (node.members.size() != 1) throw std::invalid_argument("tree: leaves must be singletons");
      continue;
    }
    // Children must partition the parent's member set.
    std::vector<int> collected;
    for (const int child : node.children) {
      if (child < 0 || static_cast<std::size_t>(child) >= tree.nodes.size()) {
        throw std::invalid_argument("tree: child id out of range");
      }
      const TreeNode& child_node = tree.nodes[static_cast<std::size_t>(child)];
      if (!child_node.parent || *child_node.parent != node.id) {
        throw std::invalid_argument("tree: parent link mismatch");
      }
      collected.insert(collected.end(), child_node.members.begin(), child_node.members.end());
    }
    std::sort(collected.begin(), collected.end());
    if (collected != node.members) {
      throw std::invalid_argument("tree: children do not partition node " +
                                  std::to_string(node.id));
    }
  }
  const TreeNode& root = tree.nodes[static_cast<std::size_t>(tree.root)];
  if (root.parent) throw std::invalid_argument("tree: root must have no parent");
  if (static_cast<int>(root.members.size()) != tree.p || root.members.front() != 1 ||
      root.members.back() != tree.p) {
    throw std::invalid_argument("tree: root must cover {1..p}");
  }
}

ClusterTree build_tree(const Dataset& d, Linkage linkage) {
  validate_dataset(d);
  const Eigen::Index p = d.p();
  if (p < 2) throw std::invalid_argument("build_tree: need p >= 2");

  // Column-standardized matrix for pairwise correlations.
  const Eigen::VectorXd mean = d.x.colwise().mean();
  Eigen::MatrixXd centered = d.x.rowwise() - mean.transpose();
  for (Eigen::Index j = 0; j < p; ++j) {
    const double norm = centered.col(j).norm();
    if (norm <= 0.0) {
      throw std::invalid_argument("build_tree: column " + std::to_string(j + 1) +
                                  " is constant");
    }
    centered.col(j) /= norm;
  }
  const Eigen::MatrixXd corr = centered.transpose() * centered;
  Eigen::MatrixXd dist = 1.0 - corr.array().square();
  dist.diagonal().setZero();

  ClusterTree tree;
  tree.p = static_cast<int>(p);
  tree.nodes.reserve(static_cast<std::size_t>(2 * p - 1));
  // Slot j holds the active cluster whose smallest member is j+1;
  // merges collapse into the lower slot, which keeps slot order equal
  // to smallest-member order and makes the tie-break a scan order.
  std::vector<int> slot_node(static_cast<std::size_t>(p));
  std::vector<double> slot_size(static_cast<std::size_t>(p), 1.0);
  std::vector<bool> active(static_cast<std::size_t>(p), true);
  for (Eigen::Index j = 0; j < p; ++j) {
    TreeNode leaf;
    leaf.id = static_cast<int>(j);
    leaf.members = {static_cast<int>(j) + 1};
    tree.nodes.push_back(std::move(leaf));
    slot_node[static_cast<std::size_t>(j)] = static_cast<int>(j);
  }

  for (Eigen::Index merge = 0; merge + 1 < p; ++merge) {
    Eigen::Index best_i = -1, best_j = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < p; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = i + 1; j < p; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        if (dist(i, j) < best) {
          best = dist(i, j);
          best_i = i;
          best_j = j;
        }
      }
    }

    TreeNode node;
    node.id = static_cast<int>(tree.nodes.size());
    node.height = best;
    node.children = {slot_node[static_cast<std::size_t>(best_i)],
                     slot_node[static_cast<std::size_t>(best_j)]};
    const TreeNode& left = tree.nodes[static_cast<std::size_t>(node.children[0])];
    const TreeNode& right = tree.nodes[static_cast<std::size_t>(node.children[1])];
    node.members.resize(left.members.size() + right.members.size());
    std::merge(left.members.begin(), left.members.end(), right.members.begin(),
               right.members.end(), node.members.begin());
    tree.nodes[static_cast<std::size_t>(node.children[0])].parent = node.id;
    tree.nodes[static_cast<std::size_t>(node.children[1])].parent = node.id;

    const double size_i = slot_size[static_cast<std::size_t>(best_i)];
    const double size_j = slot_size[static_cast<std::size_t>(best_j)];
    for (Eigen::Index k = 0; k < p; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == best_i || k == best_j) continue;
      const double dik = dist(k, best_i);
      const double djk = dist(k, best_j);
      const double merged = linkage == Linkage::complete
                                ? std::max(dik, djk)
                                : (size_i * dik + size_j * djk) / (size_i + size_j);
      dist(k, best_i) = merged;
      dist(best_i, k) = merged;
    }
    slot_node[static_cast<std::size_t>(best_i)] = node.id;
    slot_size[static_cast<std::size_t>(best_i)] = size_i + size_j;
    active[static_cast<std::size_t>(best_j)] = false;
    tree.nodes.push_back(std::move(node));
  }

  tree.root = static_cast<int>(tree.nodes.size()) - 1;
  validate_tree(tree);
  return tree;
}

std::string tree_to_json(const ClusterTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const TreeNode& node : tree.nodes) {
    nodes.push_back({{"id", node.id},
                     {"members", node.members},
                     {"children", node.children},
                     {"height", node.height}});
  }
  return nlohmann::json{{"p", tree.p}, {"root", tree.root}, {"nodes", nodes}}.dump(2);
}

ClusterTree tree_from_json(const std::string& text) {
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("tree JSON: ") + e.what());
  }
  ClusterTree tree;
  try {
    tree.p = parsed.at("p").get<int>();
    tree.root = parsed.at("root").get<int>();
    for (const auto& entry : parsed.at("nodes")) {
      TreeNode node;
      node.id = entry.at("id").get<int>();
      node.members = entry.at("members").get<std::vector<int>>();
      node.children = entry.at("children").get<std::vector<int>>();
      if (entry.contains("height")) node.height = entry.at("height").get<double>();
      tree.nodes.push_back(std::move(node));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("tree JSON: ") + e.what());
  }
  for (TreeNode& node : tree.nodes) {
    for (const int child : node.children) {
      if (child < 0 || static_cast<std::size_t>(child) >= tree.nodes.size()) {
        throw std::invalid_argument("tree JSON: child id out of range");
      }
      tree.nodes[static_cast<std::size_t>(child)].parent = node.id;
    }
  }
  validate_tree(tree);
  return tree;
}

}  // namespace quadgroup
