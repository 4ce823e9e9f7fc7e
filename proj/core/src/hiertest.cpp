#include "quadgroup/hiertest.hpp"

#include "quadgroup/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace quadgroup {

double adjust_pvalue(double p_raw, int group_size, int p_total) {
  if (group_size < 1 || group_size > p_total) {
    throw std::invalid_argument("adjust_pvalue: need 1 <= group_size <= p_total");
  }
  if (!(p_raw >= 0.0 && p_raw <= 1.0)) {
    throw std::invalid_argument("adjust_pvalue: p_raw must lie in [0, 1]");
  }
  return std::min(p_raw * static_cast<double>(p_total) / static_cast<double>(group_size), 1.0);
}

HierResult run_hierarchy(const Dataset& d, const ClusterTree& tree, double alpha,
                         const HierEngineConfig& cfg) {
  validate_tree(tree);
  if (tree.p != d.p()) {
    throw std::invalid_argument("run_hierarchy: tree covers " + std::to_string(tree.p) +
                                " covariates but dataset has " + std::to_string(d.p()));
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("run_hierarchy: alpha must lie in (0, 1)");
  }
  if (cfg.mode == ProjectionMode::general) {
    throw std::invalid_argument("run_hierarchy: general mode needs per-group weights; "
                                "use sigma or identity");
  }

  const InitialFit fit = fit_initial(d, cfg.fit);
  const EstimationContext context(d, fit, cfg.c_lambda);

  HierResult result;
  result.alpha = alpha;

  // significant[id] defaults to false for pruned/untested/failed nodes.
  std::vector<bool> significant(tree.nodes.size(), false);
  std::vector<bool> visited(tree.nodes.size(), false);
  std::deque<std::pair<int, double>> queue;  // node id, parent's adjusted p
  queue.emplace_back(tree.root, 0.0);

  while (!queue.empty()) {
    const auto [id, parent_adjusted] = queue.front();
    queue.pop_front();
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    visited[static_cast<std::size_t>(id)] = true;

    HierNodeRecord record;
    record.node_id = id;
    try {
      const GroupSpec group(node.members);
      const QuadEstimate est = context.estimate(group, cfg.mode, std::nullopt, cfg.tau);
      record.p_raw = test_group(est, alpha).p_value;
    } catch (const SolverError& e) {
      record.tested_ok = false;
      result.warnings.push_back("node " + std::to_string(id) + " untested: " + e.what());
      result.tested_log.push_back(record);
      continue;
    }
    ++result.tested_count;
    record.p_tilde = adjust_pvalue(record.p_raw, static_cast<int>(node.members.size()), tree.p);
    record.p_adjusted = std::max(parent_adjusted, record.p_tilde);
    record.significant = record.p_adjusted <= alpha;
    significant[static_cast<std::size_t>(id)] = record.significant;
    result.tested_log.push_back(record);

    if (record.significant) {
      std::vector<int> children = node.children;
      // Deterministic order: descend toward smaller member indices first.
      std::sort(children.begin(), children.end(), [&](int a, int b) {
        return tree.nodes[static_cast<std::size_t>(a)].members.front() <
               tree.nodes[static_cast<std::size_t>(b)].members.front();
      });
      for (const int child : children) queue.emplace_back(child, record.p_adjusted);
    }
  }

  // Significant frontier: significant nodes with no significant child.
  for (const HierNodeRecord& record : result.tested_log) {
    if (!record.significant) continue;
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(record.node_id)];
    const bool frontier =
        std::none_of(node.children.begin(), node.children.end(),
                     [&](int child) { return significant[static_cast<std::size_t>(child)]; });
    if (frontier) {
      result.findings.push_back(HierFinding{GroupSpec(node.members), record.p_raw,
                                            record.p_tilde, record.p_adjusted});
    }
  }
  std::sort(result.findings.begin(), result.findings.end(),
            [](const HierFinding& a, const HierFinding& b) {
              return a.group.indices() < b.group.indices();
            });
  return result;
}

std::string hier_to_csv(const HierResult& result) {
  std::ostringstream out;
  out.precision(12);
  out << "members,p_raw,p_tilde,p_adjusted\n";
  for (const HierFinding& finding : result.findings) {
    const auto& members = finding.group.indices();
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (k > 0) out << ';';
      out << members[k];
    }
    out << ',' << finding.p_raw << ',' << finding.p_tilde << ',' << finding.p_adjusted << '\n';
  }
  return out.str();
}

std::string hier_to_json(const HierResult& result) {
  nlohmann::json findings = nlohmann::json::array();
  for (const HierFinding& finding : result.findings) {
    findings.push_back({{"members", finding.group.indices()},
                        {"p_raw", finding.p_raw},
                        {"p_tilde", finding.p_tilde},
                        {"p_adjusted", finding.p_adjusted}});
  }
  nlohmann::json log = nlohmann::json::array();
  for (const HierNodeRecord& record : result.tested_log) {
    log.push_back({{"node_id", record.node_id},
                   {"p_raw", record.p_raw},
                   {"p_tilde", record.p_tilde},
                   {"p_adjusted", record.p_adjusted},
                   {"significant", record.significant},
                   {"tested_ok", record.tested_ok}});
  }
  return nlohmann::json{{"alpha", result.alpha},
                        {"tested_count", result.tested_count},
                        {"findings", findings},
                        {"tested_log", log},
                        {"warnings", result.warnings}}
      .dump(2);
}

}  // namespace quadgroup
