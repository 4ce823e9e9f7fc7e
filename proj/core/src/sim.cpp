#include "quadgroup/sim.hpp"

#include "quadgroup/errors.hpp"
#include "quadgroup/hiertest.hpp"
#include "quadgroup/lasso.hpp"
#include "quadgroup/rng.hpp"
#include "quadgroup/version.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace quadgroup {

const char* scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::dense: return "dense";
    case ScenarioKind::highcorr: return "highcorr";
    case ScenarioKind::hier1: return "hier1";
    case ScenarioKind::hier2: return "hier2";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_name(const std::string& name) {
  if (name == "dense") return ScenarioKind::dense;
  if (name == "highcorr") return ScenarioKind::highcorr;
  if (name == "hier1") return ScenarioKind::hier1;
  if (name == "hier2") return ScenarioKind::hier2;
  throw std::invalid_argument("unknown scenario '" + name +
                              "' (expected dense, highcorr, hier1, or hier2)");
}

void validate_scenario(const Scenario& sc) {
  if (sc.n < 10) throw std::invalid_argument("scenario: need n >= 10");
  if (sc.replicates < 1) throw std::invalid_argument("scenario: need replicates >= 1");
  if (!(sc.delta >= 0.0)) throw std::invalid_argument("scenario: delta must be nonnegative");
  switch (sc.kind) {
    case ScenarioKind::dense:
      if (sc.p < 200) throw std::invalid_argument("scenario dense: need p >= 200");
      break;
    case ScenarioKind::highcorr:
      if (sc.p < 5) throw std::invalid_argument("scenario highcorr: need p >= 5");
      break;
    case ScenarioKind::hier1:
      if (sc.p < 20) throw std::invalid_argument("scenario hier1: need p >= 20");
      break;
    case ScenarioKind::hier2:
      if (sc.p < 500) throw std::invalid_argument("scenario hier2: need p >= 500");
      break;
  }
}

Eigen::MatrixXd scenario_sigma(const Scenario& sc) {
  validate_scenario(sc);
  const Eigen::Index p = sc.p;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(p, p);
  switch (sc.kind) {
    case ScenarioKind::dense:
      for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
          sigma(i, j) = std::pow(0.6, std::abs(static_cast<double>(i - j)));
        }
      }
      break;
    case ScenarioKind::highcorr:
      for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
          if (i == j) continue;
          sigma(i, j) = (i < 5 && j < 5) ? 0.8
                                         : std::pow(0.6, std::abs(static_cast<double>(i - j)));
        }
      }
      break;
    case ScenarioKind::hier1:
      for (Eigen::Index i = 0; i < 20; i += 2) {
        sigma(i, i + 1) = 0.7;
        sigma(i + 1, i) = 0.7;
      }
      break;
    case ScenarioKind::hier2:
      for (Eigen::Index block = 0; block < 10; ++block) {
        const Eigen::Index start = 50 * block;
        for (Eigen::Index i = start; i < start + 50; ++i) {
          for (Eigen::Index j = start; j < start + 50; ++j) {
            if (i != j) sigma(i, j) = 0.7;
          }
        }
      }
      break;
  }
  return sigma;
}

Eigen::VectorXd scenario_beta(const Scenario& sc) {
  validate_scenario(sc);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(sc.p);
  switch (sc.kind) {
    case ScenarioKind::dense:
      for (int j = 25; j <= 50; ++j) beta(j - 1) = sc.delta;
      break;
    case ScenarioKind::highcorr:
      beta(0) = sc.delta;
      beta(2) = sc.delta;
      break;
    case ScenarioKind::hier1:
    case ScenarioKind::hier2: {
      const std::optional<GroupSpec> s0 = scenario_s0(sc);
      for (const int j : s0->indices()) beta(j - 1) = sc.hier_beta;
      break;
    }
  }
  return beta;
}

GroupSpec scenario_group(const Scenario& sc) {
  validate_scenario(sc);
  std::vector<int> indices;
  switch (sc.kind) {
    case ScenarioKind::dense:
      indices.resize(171);
      std::iota(indices.begin(), indices.end(), 30);
      break;
    case ScenarioKind::highcorr:
      indices = {1, 2, 3, 4, 5};
      break;
    case ScenarioKind::hier1:
    case ScenarioKind::hier2:
      indices.resize(static_cast<std::size_t>(sc.p));
      std::iota(indices.begin(), indices.end(), 1);
      break;
  }
  return GroupSpec(std::move(indices));
}

std::optional<GroupSpec> scenario_s0(const Scenario& sc) {
  switch (sc.kind) {
    case ScenarioKind::hier1:
      return GroupSpec({1, 3, 5, 7, 9, 11, 13, 15, 17, 19});
    case ScenarioKind::hier2:
      return GroupSpec({1, 51, 101, 151, 201, 251, 301, 351, 401, 451});
    default:
      return std::nullopt;
  }
}

ScenarioTruth true_values(const Scenario& sc) {
  const Eigen::MatrixXd sigma = scenario_sigma(sc);
  const Eigen::VectorXd beta = scenario_beta(sc);
  const GroupSpec g = scenario_group(sc);
  const auto gsize = static_cast<Eigen::Index>(g.size());
  Eigen::VectorXd beta_g(gsize);
  Eigen::MatrixXd sigma_gg(gsize, gsize);
  for (Eigen::Index r = 0; r < gsize; ++r) {
    beta_g(r) = beta(g.col(static_cast<std::size_t>(r)));
    for (Eigen::Index c = 0; c < gsize; ++c) {
      sigma_gg(r, c) =
          sigma(g.col(static_cast<std::size_t>(r)), g.col(static_cast<std::size_t>(c)));
    }
  }
  return ScenarioTruth{beta_g.dot(sigma_gg * beta_g), beta_g.squaredNorm()};
}

namespace {

Dataset generate_from_chol(const Scenario& sc, const Eigen::MatrixXd& chol_l,
                           const Eigen::VectorXd& beta, int rep_index) {
  const Eigen::Index n = sc.n;
  const Eigen::Index p = sc.p;
  CounterRng x_rng(sc.seed, static_cast<std::uint64_t>(rep_index), StreamRole::covariates);
  Eigen::MatrixXd z(n, p);
  // Draws fill observation by observation so the stream layout is a
  // stable part of the determinism contract.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) z(i, j) = x_rng.gaussian();
  }
  Dataset d;
  d.x.noalias() = z * chol_l.transpose();
  CounterRng eps_rng(sc.seed, static_cast<std::uint64_t>(rep_index), StreamRole::noise);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) d.y(i) = eps_rng.gaussian();
  d.y += d.x * beta;
  return d;
}

Eigen::MatrixXd scenario_chol(const Scenario& sc) {
  const Eigen::MatrixXd sigma = scenario_sigma(sc);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw SolverError("scenario covariance is not positive definite");
  }
  return llt.matrixL();
}

/// Per-replicate split-stream seed; the X/ε streams key off the raw
/// seed directly, so only the splitting path needs mixing.
std::uint64_t split_seed(std::uint64_t seed, int rep_index) {
  return seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(rep_index) + 1));
}

struct RepOutcome {
  bool ok = false;
  std::string error;
  double q_sigma = 0.0, plug_sigma = 0.0;
  double q_identity = 0.0, plug_identity = 0.0;
  bool reject_sigma_tau1 = false, reject_sigma_tau0 = false;
  bool reject_identity_tau1 = false, reject_identity_tau0 = false;
  bool cover_sigma_tau1 = false, cover_sigma_tau0 = false;
  bool cover_identity_tau1 = false, cover_identity_tau0 = false;
  double standardized_sigma_tau0 = 0.0;
  bool hier_false_finding = false;
  double hier_adaptive = 0.0;
  int finding_count = 0;
  std::vector<int> finding_sizes;
};

bool covers(const ConfInterval& ci, double truth) {
  return ci.lower <= truth && truth <= ci.upper;
}

RepOutcome run_quad_rep(const Scenario& sc, const MethodsConfig& cfg,
                        const Eigen::MatrixXd& chol_l, const Eigen::VectorXd& beta,
                        const GroupSpec& g, const ScenarioTruth& truth, int rep) {
  RepOutcome out;
  const Dataset d = generate_from_chol(sc, chol_l, beta, rep);
  InitialFitOptions fit_opts;
  fit_opts.split = cfg.split;
  fit_opts.seed = split_seed(sc.seed, rep);
  fit_opts.lambda0 = cfg.lambda0;
  const InitialFit fit = fit_initial(d, fit_opts);
  const EstimationContext context(d, fit, cfg.c_lambda);

  const QuadEstimate sigma_tau1 = context.estimate(g, ProjectionMode::sigma, std::nullopt, 1.0);
  const QuadEstimate sigma_tau0 = sigma_tau1.with_tau(0.0);
  const QuadEstimate id_tau1 = context.estimate(g, ProjectionMode::identity, std::nullopt, 1.0);
  const QuadEstimate id_tau0 = id_tau1.with_tau(0.0);

  out.q_sigma = sigma_tau1.q_hat;
  out.plug_sigma = sigma_tau1.plug_in;
  out.q_identity = id_tau1.q_hat;
  out.plug_identity = id_tau1.plug_in;
  out.reject_sigma_tau1 = test_group(sigma_tau1, cfg.alpha).reject;
  out.reject_sigma_tau0 = test_group(sigma_tau0, cfg.alpha).reject;
  out.reject_identity_tau1 = test_group(id_tau1, cfg.alpha).reject;
  out.reject_identity_tau0 = test_group(id_tau0, cfg.alpha).reject;
  out.cover_sigma_tau1 = covers(confidence_interval(sigma_tau1, cfg.level), truth.q_sigma);
  out.cover_sigma_tau0 = covers(confidence_interval(sigma_tau0, cfg.level), truth.q_sigma);
  out.cover_identity_tau1 = covers(confidence_interval(id_tau1, cfg.level), truth.q_identity);
  out.cover_identity_tau0 = covers(confidence_interval(id_tau0, cfg.level), truth.q_identity);
  out.standardized_sigma_tau0 =
      (sigma_tau0.q_hat - truth.q_sigma) / std::sqrt(sigma_tau0.v_hat);
  out.ok = true;
  return out;
}

RepOutcome run_hier_rep(const Scenario& sc, const MethodsConfig& cfg,
                        const Eigen::MatrixXd& chol_l, const Eigen::VectorXd& beta,
                        const GroupSpec& s0, int rep) {
  RepOutcome out;
  const Dataset d = generate_from_chol(sc, chol_l, beta, rep);
  const ClusterTree tree = build_tree(d, cfg.linkage);
  HierEngineConfig engine;
  engine.c_lambda = cfg.c_lambda;
  engine.fit.split = cfg.split;
  engine.fit.seed = split_seed(sc.seed, rep);
  engine.fit.lambda0 = cfg.lambda0;
  const HierResult hier = run_hierarchy(d, tree, cfg.alpha, engine);

  std::vector<GroupSpec> findings;
  findings.reserve(hier.findings.size());
  for (const HierFinding& finding : hier.findings) {
    findings.push_back(finding.group);
    out.finding_sizes.push_back(static_cast<int>(finding.group.size()));
    const bool any_active = std::any_of(finding.group.indices().begin(),
                                        finding.group.indices().end(),
                                        [&](int j) { return s0.contains(j); });
    if (!any_active) out.hier_false_finding = true;
  }
  out.finding_count = static_cast<int>(findings.size());
  out.hier_adaptive = adaptive_power(findings, s0);
  out.ok = true;
  return out;
}

RateReport proportion(double hits, double total) {
  const double rate = total > 0.0 ? hits / total : 0.0;
  return RateReport{rate, total > 0.0 ? std::sqrt(rate * (1.0 - rate) / total) : 0.0};
}

}  // namespace

Dataset generate(const Scenario& sc, int rep_index) {
  validate_scenario(sc);
  if (rep_index < 0) throw std::invalid_argument("generate: rep_index must be nonnegative");
  return generate_from_chol(sc, scenario_chol(sc), scenario_beta(sc), rep_index);
}

double adaptive_power(const std::vector<GroupSpec>& findings, const GroupSpec& s0) {
  double total = 0.0;
  for (const GroupSpec& finding : findings) {
    const bool any_active = std::any_of(finding.indices().begin(), finding.indices().end(),
                                        [&](int j) { return s0.contains(j); });
    if (any_active) total += 1.0 / static_cast<double>(finding.size());
  }
  return total / static_cast<double>(s0.size());
}

SimReport run_scenario(const Scenario& sc, const MethodsConfig& cfg) {
  validate_scenario(sc);
  const auto started = std::chrono::steady_clock::now();

  const Eigen::MatrixXd chol_l = scenario_chol(sc);
  const Eigen::VectorXd beta = scenario_beta(sc);
  const bool hier = sc.kind == ScenarioKind::hier1 || sc.kind == ScenarioKind::hier2;
  const GroupSpec group = scenario_group(sc);
  const std::optional<GroupSpec> s0 = scenario_s0(sc);
  const ScenarioTruth truth = true_values(sc);

  const int reps = sc.replicates;
  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(reps));
  const auto run_one = [&](int rep) {
    RepOutcome& out = outcomes[static_cast<std::size_t>(rep)];
    try {
      out = hier ? run_hier_rep(sc, cfg, chol_l, beta, *s0, rep)
                 : run_quad_rep(sc, cfg, chol_l, beta, group, truth, rep);
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
  };

  int threads = cfg.threads > 0
                    ? cfg.threads
                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, reps);
  if (threads <= 1) {
    for (int rep = 0; rep < reps; ++rep) run_one(rep);
  } else {
    std::atomic<int> next{0};
    const auto worker = [&] {
      for (int rep = next.fetch_add(1); rep < reps; rep = next.fetch_add(1)) run_one(rep);
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads - 1));
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
  }

  SimReport report;
  report.scenario = sc;
  report.truth = truth;

  // Reduce strictly in replicate order; every accumulation below is a
  // sequential sum, so reports are identical across thread counts.
  double rej_s1 = 0, rej_s0 = 0, rej_i1 = 0, rej_i0 = 0;
  double cov_s1 = 0, cov_s0 = 0, cov_i1 = 0, cov_i0 = 0;
  double sum_q_sigma = 0, sum_plug_sigma = 0, sum_q_id = 0, sum_plug_id = 0;
  double sum_std = 0, sum_std_sq = 0;
  double fwer_hits = 0, adaptive_sum = 0, adaptive_sum_sq = 0, count_sum = 0;
  std::vector<int> all_sizes;
  for (int rep = 0; rep < reps; ++rep) {
    const RepOutcome& out = outcomes[static_cast<std::size_t>(rep)];
    if (!out.ok) {
      ++report.failed;
      if (report.failure_messages.size() < 5) {
        report.failure_messages.push_back("replicate " + std::to_string(rep) + ": " + out.error);
      }
      continue;
    }
    ++report.completed;
    if (hier) {
      fwer_hits += out.hier_false_finding ? 1.0 : 0.0;
      adaptive_sum += out.hier_adaptive;
      adaptive_sum_sq += out.hier_adaptive * out.hier_adaptive;
      count_sum += out.finding_count;
      all_sizes.insert(all_sizes.end(), out.finding_sizes.begin(), out.finding_sizes.end());
    } else {
      rej_s1 += out.reject_sigma_tau1;
      rej_s0 += out.reject_sigma_tau0;
      rej_i1 += out.reject_identity_tau1;
      rej_i0 += out.reject_identity_tau0;
      cov_s1 += out.cover_sigma_tau1;
      cov_s0 += out.cover_sigma_tau0;
      cov_i1 += out.cover_identity_tau1;
      cov_i0 += out.cover_identity_tau0;
      sum_q_sigma += out.q_sigma;
      sum_plug_sigma += out.plug_sigma;
      sum_q_id += out.q_identity;
      sum_plug_id += out.plug_identity;
      sum_std += out.standardized_sigma_tau0;
      sum_std_sq += out.standardized_sigma_tau0 * out.standardized_sigma_tau0;
    }
  }

  if (report.failed > 0.02 * reps) {
    throw SolverError("run_scenario: " + std::to_string(report.failed) + " of " +
                      std::to_string(reps) + " replicates failed (first: " +
                      (report.failure_messages.empty() ? "?" : report.failure_messages.front()) +
                      ")");
  }

  const double done = report.completed;
  if (hier) {
    report.rates["fwer"] = proportion(fwer_hits, done);
    const double adaptive_mean = done > 0 ? adaptive_sum / done : 0.0;
    const double adaptive_var =
        done > 1 ? std::max(0.0, (adaptive_sum_sq - done * adaptive_mean * adaptive_mean) /
                                     (done - 1.0))
                 : 0.0;
    report.rates["adaptive_power"] =
        RateReport{adaptive_mean, done > 0 ? std::sqrt(adaptive_var / done) : 0.0};
    report.values["avg_finding_count"] = done > 0 ? count_sum / done : 0.0;
    if (!all_sizes.empty()) {
      report.values["avg_finding_size"] =
          std::accumulate(all_sizes.begin(), all_sizes.end(), 0.0) /
          static_cast<double>(all_sizes.size());
      std::sort(all_sizes.begin(), all_sizes.end());
      const std::size_t mid = all_sizes.size() / 2;
      report.values["median_finding_size"] =
          all_sizes.size() % 2 == 1
              ? all_sizes[mid]
              : 0.5 * (all_sizes[mid - 1] + all_sizes[mid]);
    } else {
      report.values["avg_finding_size"] = 0.0;
      report.values["median_finding_size"] = 0.0;
    }
  } else {
    report.rates["err_phi_sigma_tau1"] = proportion(rej_s1, done);
    report.rates["err_phi_sigma_tau0"] = proportion(rej_s0, done);
    report.rates["err_phi_identity_tau1"] = proportion(rej_i1, done);
    report.rates["err_phi_identity_tau0"] = proportion(rej_i0, done);
    report.rates["coverage_ci_sigma_tau1"] = proportion(cov_s1, done);
    report.rates["coverage_ci_sigma_tau0"] = proportion(cov_s0, done);
    report.rates["coverage_ci_identity_tau1"] = proportion(cov_i1, done);
    report.rates["coverage_ci_identity_tau0"] = proportion(cov_i0, done);
    if (done > 0) {
      report.values["bias_qhat_sigma"] = std::abs(sum_q_sigma / done - truth.q_sigma);
      report.values["bias_plugin_sigma"] = std::abs(sum_plug_sigma / done - truth.q_sigma);
      report.values["bias_qhat_identity"] = std::abs(sum_q_id / done - truth.q_identity);
      report.values["bias_plugin_identity"] =
          std::abs(sum_plug_id / done - truth.q_identity);
      const double std_mean = sum_std / done;
      report.values["std_mean_sigma_tau0"] = std_mean;
      report.values["std_sd_sigma_tau0"] =
          done > 1 ? std::sqrt(std::max(0.0, (sum_std_sq - done * std_mean * std_mean) /
                                                 (done - 1.0)))
                   : 0.0;
    }
    report.placeholders = {"err_phi_fd", "err_phi_hdi"};
  }

  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::string report_to_csv(const SimReport& report) {
  std::ostringstream out;
  out.precision(12);
  out << "delta,n,method,value\n";
  const auto prefix = [&]() -> std::ostringstream& {
    out << report.scenario.delta << ',' << report.scenario.n << ',';
    return out;
  };
  for (const auto& [method, rate] : report.rates) {
    prefix() << method << ',' << rate.value << '\n';
  }
  for (const auto& [method, value] : report.values) {
    prefix() << method << ',' << value << '\n';
  }
  for (const std::string& method : report.placeholders) {
    prefix() << method << ",NA\n";
  }
  return out.str();
}

std::string report_to_json(const SimReport& report, const MethodsConfig& cfg) {
  nlohmann::json rates;
  for (const auto& [method, rate] : report.rates) {
    rates[method] = {{"value", rate.value}, {"mc_stderr", rate.mc_stderr}};
  }
  nlohmann::json values;
  for (const auto& [method, value] : report.values) values[method] = value;
  nlohmann::json config{{"c_lambda", cfg.c_lambda},
                        {"split", cfg.split},
                        {"alpha", cfg.alpha},
                        {"level", cfg.level},
                        {"taus", {0.0, 1.0}},
                        {"linkage", cfg.linkage == Linkage::complete ? "complete" : "average"}};
  if (cfg.lambda0) config["lambda0"] = *cfg.lambda0;
  else config["lambda0"] = nullptr;
  const Scenario& sc = report.scenario;
  nlohmann::json scenario{{"kind", scenario_name(sc.kind)}, {"n", sc.n},
                          {"p", sc.p},                      {"delta", sc.delta},
                          {"hier_beta", sc.hier_beta},      {"replicates", sc.replicates},
                          {"seed", sc.seed}};
  return nlohmann::json{{"version", kVersion},
                        {"scenario", scenario},
                        {"config", config},
                        {"truth", {{"q_sigma", report.truth.q_sigma},
                                   {"q_identity", report.truth.q_identity}}},
                        {"completed", report.completed},
                        {"failed", report.failed},
                        {"failure_messages", report.failure_messages},
                        {"runtime_seconds", report.runtime_seconds},
                        {"rates", rates},
                        {"values", values},
                        {"placeholders", report.placeholders}}
      .dump(2);
}

}  // namespace quadgroup
