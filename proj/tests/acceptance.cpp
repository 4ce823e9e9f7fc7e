// Statistical acceptance gates. Each test case prints exactly one
// PASS/FAIL line; the Monte Carlo cells are deterministic (seed 1) and
// cached on disk so criteria sharing a cell do not recompute it.

#include "quadgroup/data.hpp"
#include "quadgroup/errors.hpp"
#include "quadgroup/hiertest.hpp"
#include "quadgroup/inference.hpp"
#include "quadgroup/lasso.hpp"
#include "quadgroup/projection.hpp"
#include "quadgroup/rng.hpp"
#include "quadgroup/sim.hpp"
#include "quadgroup/tree.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace quadgroup;

namespace {

struct CellMetrics {
  std::map<std::string, double> rates;
  std::map<std::string, double> values;
  int completed = 0;
  int failed = 0;
  double runtime_seconds = 0.0;
  bool from_cache = false;
};

std::string cell_key(const Scenario& sc, const MethodsConfig& cfg) {
  std::ostringstream key;
  key.precision(12);
  key << scenario_name(sc.kind) << "_n" << sc.n << "_p" << sc.p << "_d" << sc.delta << "_hb"
      << sc.hier_beta << "_R" << sc.replicates << "_s" << sc.seed << "_cl" << cfg.c_lambda
      << "_l0" << (cfg.lambda0 ? *cfg.lambda0 : -1.0) << (cfg.split ? "_split" : "") << "_a"
      << cfg.alpha << "_lv" << cfg.level
      << (cfg.linkage == Linkage::complete ? "_lc" : "_la");
  return key.str();
}

/// Runs a Monte Carlo cell, or replays it from the cache written by an
/// earlier criterion in the same ctest session.
CellMetrics run_cell(const Scenario& sc, const MethodsConfig& cfg) {
  const std::filesystem::path dir("acceptance_cache");
  std::filesystem::create_directories(dir);
  const std::filesystem::path path = dir / (cell_key(sc, cfg) + ".json");

  CellMetrics metrics;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const nlohmann::json doc = nlohmann::json::parse(buffer.str());
    for (const auto& [name, entry] : doc.at("rates").items()) {
      metrics.rates[name] = entry.at("value").get<double>();
    }
    for (const auto& [name, value] : doc.at("values").items()) {
      metrics.values[name] = value.get<double>();
    }
    metrics.completed = doc.at("completed").get<int>();
    metrics.failed = doc.at("failed").get<int>();
    metrics.runtime_seconds = doc.at("runtime_seconds").get<double>();
    metrics.from_cache = true;
    return metrics;
  }

  const SimReport report = run_scenario(sc, cfg);
  std::ofstream out(path);
  out << report_to_json(report, cfg) << '\n';
  for (const auto& [name, rate] : report.rates) metrics.rates[name] = rate.value;
  metrics.values = report.values;
  metrics.completed = report.completed;
  metrics.failed = report.failed;
  metrics.runtime_seconds = report.runtime_seconds;
  return metrics;
}

Scenario make_cell(ScenarioKind kind, int n, int p, double delta, int reps) {
  Scenario sc;
  sc.kind = kind;
  sc.n = n;
  sc.p = p;
  sc.delta = delta;
  sc.replicates = reps;
  sc.seed = 1;
  return sc;
}

void report_line(const char* label, bool pass, const std::string& detail) {
  std::printf("%s: %s (%s)\n", label, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.4g", value);
  return buffer;
}

// ---- helpers for the deterministic property suites ----

Dataset random_regression(std::uint64_t rep, int n, int p) {
  CounterRng x_rng(1313, rep, StreamRole::covariates);
  CounterRng e_rng(1313, rep, StreamRole::noise);
  Dataset d;
  d.x.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.x(i, j) = x_rng.gaussian();
  }
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    d.y(i) = 0.9 * d.x(i, 0) - 0.6 * d.x(i, std::min(3, p - 1)) + e_rng.gaussian();
  }
  return d;
}

/// KKT stationarity of (1/2m)‖y − Xβ‖² + λ‖β‖₁ at beta.
bool lasso_kkt_holds(const Dataset& d, double lambda, const Eigen::VectorXd& beta,
                     double tol) {
  const double m = static_cast<double>(d.n());
  const Eigen::VectorXd grad = d.x.transpose() * (d.x * beta - d.y) / m;
  for (int j = 0; j < beta.size(); ++j) {
    if (beta(j) == 0.0) {
      if (std::abs(grad(j)) > lambda * (1.0 + tol)) return false;
    } else {
      if (std::abs(grad(j) + lambda * (beta(j) > 0 ? 1.0 : -1.0)) > lambda * tol) {
        return false;
      }
    }
  }
  return true;
}

std::vector<Eigen::VectorXd> constraint_rows(const ProjectionProblem& prob) {
  const Eigen::Index p = prob.sigma_hat_mat.rows();
  std::vector<Eigen::VectorXd> rows;
  for (Eigen::Index k = 0; k < p; ++k) {
    rows.push_back(Eigen::VectorXd::Unit(p, k));
  }
  if (prob.mode != ProjectionMode::identity && prob.scale > 0.0) {
    rows.push_back(prob.target / prob.scale);
  }
  return rows;
}

double worst_violation(const ProjectionProblem& prob, const Eigen::VectorXd& u) {
  const Eigen::VectorXd slack = prob.sigma_hat_mat * u - prob.target;
  double worst = 0.0;
  for (const Eigen::VectorXd& w : constraint_rows(prob)) {
    worst = std::max(worst, std::abs(w.dot(slack)));
  }
  return worst;
}

/// Brute-force reference: enumerate all 3^K active sign patterns over
/// the constraint rows and keep the best feasible stationary candidate.
std::optional<Eigen::VectorXd> enumerate_oracle(const ProjectionProblem& prob, double rho) {
  const std::vector<Eigen::VectorXd> rows = constraint_rows(prob);
  const auto k = static_cast<int>(rows.size());
  const Eigen::Index p = prob.sigma_hat_mat.rows();
  std::optional<Eigen::VectorXd> best;
  double best_quad = std::numeric_limits<double>::infinity();

  long patterns = 1;
  for (int i = 0; i < k; ++i) patterns *= 3;
  for (long t = 0; t < patterns; ++t) {
    long code = t;
    std::vector<int> face(static_cast<std::size_t>(k), 0);
    std::vector<std::size_t> active;
    for (int i = 0; i < k; ++i) {
      const int digit = static_cast<int>(code % 3);
      code /= 3;
      face[static_cast<std::size_t>(i)] = digit == 0 ? 0 : (digit == 1 ? 1 : -1);
      if (digit != 0) active.push_back(static_cast<std::size_t>(i));
    }
    const auto s = static_cast<Eigen::Index>(active.size());
    if (s > p) continue;

    Eigen::VectorXd u = Eigen::VectorXd::Zero(p);
    if (s > 0) {
      Eigen::MatrixXd mss(s, s);
      Eigen::VectorXd c(s);
      for (Eigen::Index a = 0; a < s; ++a) {
        c(a) = rows[active[static_cast<std::size_t>(a)]].dot(prob.target) +
               rho * face[active[static_cast<std::size_t>(a)]];
        for (Eigen::Index b = 0; b < s; ++b) {
          mss(a, b) = rows[active[static_cast<std::size_t>(a)]]
                          .dot(prob.sigma_hat_mat * rows[active[static_cast<std::size_t>(b)]]);
        }
      }
      const Eigen::VectorXd coef = mss.fullPivLu().solve(c);
      if (!coef.allFinite()) continue;
      for (Eigen::Index a = 0; a < s; ++a) {
        u += coef(a) * rows[active[static_cast<std::size_t>(a)]];
      }
    }
    if (worst_violation(prob, u) > rho * (1.0 + 1e-9)) continue;
    const double quad = u.dot(prob.sigma_hat_mat * u);
    if (quad < best_quad) {
      best_quad = quad;
      best = u;
    }
  }
  return best;
}

ProjectionProblem random_small_problem(std::uint64_t rep) {
  CounterRng rng(929, rep, StreamRole::generic);
  const int p = 2 + static_cast<int>(rng.uniform_below(4));
  const int m = p + 3 + static_cast<int>(rng.uniform_below(8));
  Eigen::MatrixXd x(m, p);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = rng.gaussian();
  }
  const Eigen::MatrixXd sigma_hat = x.transpose() * x / static_cast<double>(m);
  Eigen::VectorXd beta_hat = Eigen::VectorXd::Zero(p);
  for (int j = 0; j < p; ++j) {
    if (rng.uniform() < 0.6) beta_hat(j) = rng.gaussian();
  }
  std::vector<int> members;
  for (int j = 1; j <= p; ++j) {
    if (rng.uniform() < 0.7 || members.empty()) members.push_back(j);
  }
  const GroupSpec g(members);

  const double mode_pick = rng.uniform();
  const ProjectionMode mode = mode_pick < 0.34   ? ProjectionMode::sigma
                              : mode_pick < 0.67 ? ProjectionMode::identity
                                                 : ProjectionMode::general;
  std::optional<WeightMatrix> weights;
  if (mode == ProjectionMode::general) {
    const auto gs = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd b(gs, gs);
    for (Eigen::Index i = 0; i < gs; ++i) {
      for (Eigen::Index j = 0; j < gs; ++j) b(i, j) = rng.gaussian();
    }
    weights = WeightMatrix(b.transpose() * b / static_cast<double>(gs) +
                           0.1 * Eigen::MatrixXd::Identity(gs, gs));
  }
  const double c_lambda = 0.05 + 0.4 * rng.uniform();
  return build_problem_gram(sigma_hat, m, beta_hat, g, mode, weights, c_lambda);
}

}  // namespace

TEST_CASE("criterion 1: dense null calibration") {
  const MethodsConfig cfg;
  const CellMetrics fast = run_cell(make_cell(ScenarioKind::dense, 500, 200, 0.0, 200), cfg);
  const bool fast_ok = fast.rates.at("err_phi_sigma_tau1") <= 0.05 &&
                       fast.rates.at("err_phi_identity_tau1") <= 0.05;

  const CellMetrics full = run_cell(make_cell(ScenarioKind::dense, 500, 500, 0.0, 500), cfg);
  const double err_sigma = full.rates.at("err_phi_sigma_tau1");
  const double err_identity = full.rates.at("err_phi_identity_tau1");
  const bool level_ok = err_sigma <= 0.03 && err_identity <= 0.03;
  const bool runtime_ok = full.runtime_seconds <= 45.0 * 60.0;

  report_line("criterion 1", fast_ok && level_ok && runtime_ok,
              "fast gate err " + fmt(fast.rates.at("err_phi_sigma_tau1")) + "/" +
                  fmt(fast.rates.at("err_phi_identity_tau1")) + " <= 0.05; full err sigma " +
                  fmt(err_sigma) + " identity " + fmt(err_identity) + " <= 0.03; runtime " +
                  fmt(full.runtime_seconds) + "s <= 2700s");
  CHECK(fast_ok);
  CHECK(level_ok);
  CHECK(runtime_ok);
}

TEST_CASE("criterion 2: dense power") {
  const MethodsConfig cfg;
  const CellMetrics cell =
      run_cell(make_cell(ScenarioKind::dense, 800, 500, 0.06, 500), cfg);
  const double power_sigma = cell.rates.at("err_phi_sigma_tau1");
  const double power_identity = cell.rates.at("err_phi_identity_tau1");
  const bool ok = power_sigma >= 0.95 && power_identity >= 0.90;
  report_line("criterion 2", ok,
              "power sigma " + fmt(power_sigma) + " >= 0.95, identity " +
                  fmt(power_identity) + " >= 0.90");
  CHECK(power_sigma >= 0.95);
  CHECK(power_identity >= 0.90);
}

TEST_CASE("criterion 3: dense coverage") {
  const MethodsConfig cfg;
  const CellMetrics cell =
      run_cell(make_cell(ScenarioKind::dense, 500, 500, 0.06, 500), cfg);
  const double cover_sigma = cell.rates.at("coverage_ci_sigma_tau1");
  const double cover_identity = cell.rates.at("coverage_ci_identity_tau1");
  const bool ok = cover_sigma >= 0.93 && cover_identity >= 0.93;
  report_line("criterion 3", ok,
              "coverage sigma " + fmt(cover_sigma) + ", identity " + fmt(cover_identity) +
                  " >= 0.93");
  CHECK(cover_sigma >= 0.93);
  CHECK(cover_identity >= 0.93);
}

TEST_CASE("criterion 4: highly correlated calibration and power") {
  const MethodsConfig cfg;
  const CellMetrics null_cell =
      run_cell(make_cell(ScenarioKind::highcorr, 500, 500, 0.0, 500), cfg);
  const CellMetrics alt_cell =
      run_cell(make_cell(ScenarioKind::highcorr, 500, 500, 0.3, 500), cfg);
  const double err_null = null_cell.rates.at("err_phi_sigma_tau1");
  const double power = alt_cell.rates.at("err_phi_sigma_tau1");
  const bool ok = err_null <= 0.03 && power >= 0.95;
  report_line("criterion 4", ok,
              "null err " + fmt(err_null) + " <= 0.03, power " + fmt(power) + " >= 0.95");
  CHECK(err_null <= 0.03);
  CHECK(power >= 0.95);
}

TEST_CASE("criterion 5: bias reduction under high correlation") {
  const MethodsConfig cfg;
  const CellMetrics cell =
      run_cell(make_cell(ScenarioKind::highcorr, 500, 500, 0.5, 500), cfg);
  const double bias_corrected = cell.values.at("bias_qhat_sigma");
  const double bias_plugin = cell.values.at("bias_plugin_sigma");
  const bool ok = bias_corrected < bias_plugin && bias_corrected <= 0.04;
  report_line("criterion 5", ok,
              "corrected bias " + fmt(bias_corrected) + " < plug-in " + fmt(bias_plugin) +
                  " and <= 0.04");
  CHECK(bias_corrected < bias_plugin);
  CHECK(bias_corrected <= 0.04);
}

TEST_CASE("criterion 6: hierarchical error control and power") {
  const MethodsConfig cfg;
  Scenario setting1 = make_cell(ScenarioKind::hier1, 500, 500, 0.0, 200);
  setting1.hier_beta = 1.0;
  const CellMetrics cell1 = run_cell(setting1, cfg);
  const double fwer = cell1.rates.at("fwer");
  const double power1 = cell1.rates.at("adaptive_power");

  Scenario setting2 = make_cell(ScenarioKind::hier2, 800, 500, 0.0, 100);
  setting2.hier_beta = 1.0;
  const CellMetrics cell2 = run_cell(setting2, cfg);
  const double power2 = cell2.rates.at("adaptive_power");

  const bool ok = fwer <= 0.05 && power1 >= 0.90 && power2 >= 0.70;
  report_line("criterion 6", ok,
              "setting1 fwer " + fmt(fwer) + " <= 0.05 adaptive power " + fmt(power1) +
                  " >= 0.90; setting2 adaptive power " + fmt(power2) + " >= 0.70");
  CHECK(fwer <= 0.05);
  CHECK(power1 >= 0.90);
  CHECK(power2 >= 0.70);
}

TEST_CASE("criterion 7: deterministic property suites") {
  bool kkt_ok = true;
  for (std::uint64_t rep = 0; rep < 100 && kkt_ok; ++rep) {
    CounterRng rng(606, rep, StreamRole::generic);
    const int n = 30 + static_cast<int>(rng.uniform_below(40));
    const int p = 5 + static_cast<int>(rng.uniform_below(25));
    const Dataset d = random_regression(rep, n, p);
    const double lambda = 0.02 + 0.3 * rng.uniform();
    kkt_ok = lasso_kkt_holds(d, lambda, fit_lasso(d, lambda), 1e-4);
  }

  bool feasible_ok = true;
  for (std::uint64_t rep = 0; rep < 100 && feasible_ok; ++rep) {
    const ProjectionProblem prob = random_small_problem(rep + 2000);
    if (prob.scale <= 0.0) continue;
    const ProjectionSolution sol = solve_projection(prob);
    const double budget = prob.scale * sol.lambda_effective * (1.0 + 1e-6);
    feasible_ok = worst_violation(prob, sol.u) <= budget;
  }

  bool oracle_ok = true;
  for (std::uint64_t rep = 0; rep < 100 && oracle_ok; ++rep) {
    const ProjectionProblem prob = random_small_problem(rep);
    if (prob.scale <= 0.0) continue;
    const ProjectionSolution sol = solve_projection(prob);
    if (sol.lambda_effective > prob.lambda_n) continue;
    const auto oracle = enumerate_oracle(prob, prob.scale * prob.lambda_n);
    if (!oracle) {
      oracle_ok = false;
      break;
    }
    const double oracle_quad = oracle->dot(prob.sigma_hat_mat * *oracle);
    const double scale_ref = std::max(1.0, std::abs(oracle_quad));
    oracle_ok = std::abs(sol.quad_value - oracle_quad) <= 1e-4 * scale_ref;
  }

  bool monotone_ok = true;
  CounterRng prng(717, 0, StreamRole::generic);
  for (int trial = 0; trial < 200 && monotone_ok; ++trial) {
    const double p_raw = prng.uniform();
    const int p_total = 1 + static_cast<int>(prng.uniform_below(500));
    const int small = 1 + static_cast<int>(prng.uniform_below(p_total));
    const int large = small + static_cast<int>(prng.uniform_below(p_total - small + 1));
    const double adj_small = adjust_pvalue(p_raw, small, p_total);
    const double adj_large = adjust_pvalue(p_raw, large, p_total);
    monotone_ok = adj_small >= adj_large && adj_small >= p_raw && adj_small <= 1.0;
  }

  Scenario tiny = make_cell(ScenarioKind::dense, 120, 200, 0.4, 3);
  tiny.seed = 7;
  MethodsConfig cfg;
  cfg.threads = 1;
  const std::string csv_a = report_to_csv(run_scenario(tiny, cfg));
  const std::string csv_b = report_to_csv(run_scenario(tiny, cfg));
  const bool deterministic_ok = csv_a == csv_b;

  bool additive_ok = true;
  for (std::uint64_t rep = 0; rep < 20 && additive_ok; ++rep) {
    const Dataset d = random_regression(rep + 500, 60, 12);
    const InitialFit fit = fit_initial(d);
    const EstimationContext context(d, fit);
    const GroupSpec g({1, 2, 3, 4});
    const QuadEstimate sigma = context.estimate(g, ProjectionMode::sigma, std::nullopt, 1.0);
    const QuadEstimate ident =
        context.estimate(g, ProjectionMode::identity, std::nullopt, 1.0);
    additive_ok = sigma.q_hat == sigma.plug_in + sigma.correction &&
                  ident.q_hat == ident.plug_in + ident.correction;
  }

  const bool ok =
      kkt_ok && feasible_ok && oracle_ok && monotone_ok && deterministic_ok && additive_ok;
  report_line("criterion 7", ok,
              std::string("lasso KKT ") + (kkt_ok ? "ok" : "FAIL") + ", feasibility " +
                  (feasible_ok ? "ok" : "FAIL") + ", oracle " + (oracle_ok ? "ok" : "FAIL") +
                  ", monotonicity " + (monotone_ok ? "ok" : "FAIL") + ", determinism " +
                  (deterministic_ok ? "ok" : "FAIL") + ", additivity " +
                  (additive_ok ? "ok" : "FAIL"));
  CHECK(kkt_ok);
  CHECK(feasible_ok);
  CHECK(oracle_ok);
  CHECK(monotone_ok);
  CHECK(deterministic_ok);
  CHECK(additive_ok);
}

TEST_CASE("criterion 8: standardized error normality band") {
  const MethodsConfig cfg;
  const CellMetrics cell =
      run_cell(make_cell(ScenarioKind::dense, 800, 500, 0.06, 500), cfg);
  const double mean = cell.values.at("std_mean_sigma_tau0");
  const double sd = cell.values.at("std_sd_sigma_tau0");
  const bool ok = mean >= -0.3 && mean <= 0.3 && sd >= 0.6 && sd <= 1.3;
  report_line("criterion 8", ok,
              "standardized mean " + fmt(mean) + " in [-0.3, 0.3], sd " + fmt(sd) +
                  " in [0.6, 1.3]");
  CHECK(mean >= -0.3);
  CHECK(mean <= 0.3);
  CHECK(sd >= 0.6);
  CHECK(sd <= 1.3);
}
