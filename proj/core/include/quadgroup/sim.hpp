#pragma once

#include "quadgroup/data.hpp"
#include "quadgroup/inference.hpp"
#include "quadgroup/tree.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace quadgroup {

enum class ScenarioKind { dense, highcorr, hier1, hier2 };

const char* scenario_name(ScenarioKind kind);
ScenarioKind scenario_kind_from_name(const std::string& name);

/// Monte Carlo design. dense: AR-style Toeplitz covariance with a band
/// of small coefficients; highcorr: five highly correlated leading
/// covariates with two active; hier1/hier2: block covariances driving
/// the hierarchical procedure, with coefficient hier_beta on the
/// active set.
struct Scenario {
  ScenarioKind kind = ScenarioKind::dense;
  int n = 500;
  int p = 500;
  double delta = 0.0;
  double hier_beta = 1.0;
  int replicates = 500;
  std::uint64_t seed = 1;
};

void validate_scenario(const Scenario& sc);

Eigen::MatrixXd scenario_sigma(const Scenario& sc);
Eigen::VectorXd scenario_beta(const Scenario& sc);

/// The tested group: dense → {30..200}, highcorr → {1..5}, hier → the
/// full {1..p} (hier scenarios are evaluated through the tree descent,
/// not a fixed group).
GroupSpec scenario_group(const Scenario& sc);

/// Active covariates S₀ for hier scenarios; nullopt otherwise.
std::optional<GroupSpec> scenario_s0(const Scenario& sc);

struct ScenarioTruth {
  double q_sigma = 0.0;
  double q_identity = 0.0;
};

/// Exact β_G⊤Σ_{G,G}β_G and ‖β_G‖₂², recomputed from the scenario's
/// analytic β and Σ.
ScenarioTruth true_values(const Scenario& sc);

/// Draws replicate rep_index: X rows are N(0, Σ) via the Cholesky
/// factor, y = Xβ + ε with standard normal noise. Deterministic per
/// (seed, rep_index) through counter-based substreams, independent of
/// the total replicate count.
Dataset generate(const Scenario& sc, int rep_index);

/// Resolution-weighted power (1/|S₀|)·Σ_{C ∈ findings, C∩S₀ ≠ ∅} 1/|C|.
double adaptive_power(const std::vector<GroupSpec>& findings, const GroupSpec& s0);

struct MethodsConfig {
  double c_lambda = 0.03;
  std::optional<double> lambda0;
  bool split = false;
  double alpha = 0.05;
  double level = 0.95;
  Linkage linkage = Linkage::complete;
  /// 0 = all hardware threads.
  int threads = 0;
};

struct RateReport {
  double value = 0.0;
  /// √(r(1−r)/R) for proportions, sd/√R for averaged scores.
  double mc_stderr = 0.0;
};

struct SimReport {
  Scenario scenario;
  ScenarioTruth truth;
  int completed = 0;
  int failed = 0;
  std::vector<std::string> failure_messages;
  double runtime_seconds = 0.0;
  /// Rejection rates, coverages, FWER, adaptive power.
  std::map<std::string, RateReport> rates;
  /// Biases, standardized moments, finding-size summaries.
  std::map<std::string, double> values;
  /// Metrics recorded as NA (external competitor columns).
  std::vector<std::string> placeholders;
};

/// Runs the full Monte Carlo: per replicate generate → fit → estimate
/// (modes sigma and identity, τ ∈ {0,1}) → test/CI → accumulate; hier
/// scenarios instead run build_tree → run_hierarchy and accumulate
/// FWER/adaptive power. Failed replicates are excluded and counted;
/// more than 2% failures aborts with SolverError. The reduction is
/// performed in replicate order, so reports are bit-identical across
/// thread counts.
SimReport run_scenario(const Scenario& sc, const MethodsConfig& cfg = {});

/// Table rows "delta,n,method,value"; placeholder methods emit NA.
std::string report_to_csv(const SimReport& report);

/// Manifest with the resolved configuration, truth values, metric
/// standard errors, and failure detail; sufficient to re-run the
/// scenario bit-identically.
std::string report_to_json(const SimReport& report, const MethodsConfig& cfg);

}  // namespace quadgroup
