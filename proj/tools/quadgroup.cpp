#include "quadgroup/apps.hpp"
#include "quadgroup/data.hpp"
#include "quadgroup/errors.hpp"
#include "quadgroup/hiertest.hpp"
#include "quadgroup/inference.hpp"
#include "quadgroup/lasso.hpp"
#include "quadgroup/sim.hpp"
#include "quadgroup/tree.hpp"
#include "quadgroup/version.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
namespace qg = quadgroup;

constexpr int kExitOk = 0;
constexpr int kExitUser = 2;
constexpr int kExitSolver = 3;

struct CommonOpts {
  std::string data_path;
  bool no_header = false;
  std::optional<int> response_col;
  bool drop_incomplete = false;
  std::string group_file;
  std::string group_indices;
  double alpha = 0.05;
  double level = 0.95;
  double tau = 1.0;
  double c_lambda = 0.03;
  std::optional<double> lambda0;
  bool split = false;
  std::uint64_t seed = 1;
  std::string mode = "sigma";
  std::string weights_file;
  bool truncate = false;
  bool debug = false;
  std::string out_dir;
};

std::uint64_t resolve_seed(std::uint64_t cli_seed) {
  const char* env = std::getenv("QUADGROUP_SEED");
  if (env == nullptr || *env == '\0') return cli_seed;
  try {
    std::size_t used = 0;
    const auto value = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("QUADGROUP_SEED is not a valid integer: ") + env);
  }
}

qg::Dataset load_data(const CommonOpts& opts) {
  if (opts.data_path.empty()) throw std::invalid_argument("--data is required");
  qg::CsvOptions csv;
  csv.has_header = !opts.no_header;
  csv.response_col = opts.response_col;
  csv.drop_incomplete = opts.drop_incomplete;
  return qg::load_dataset(opts.data_path, csv);
}

qg::GroupSpec load_group_arg(const CommonOpts& opts, Eigen::Index p) {
  std::vector<int> indices;
  if (!opts.group_file.empty()) {
    qg::GroupSpec g = qg::load_group(opts.group_file);
    qg::validate_group(g, p);
    return g;
  }
  if (!opts.group_indices.empty()) {
    std::stringstream ss(opts.group_indices);
    std::string token;
    while (std::getline(ss, token, ',')) {
      if (token.empty()) continue;
      try {
        indices.push_back(std::stoi(token));
      } catch (const std::exception&) {
        throw std::invalid_argument("bad group index '" + token + "'");
      }
    }
  }
  if (indices.empty()) {
    throw std::invalid_argument("a group is required (--group FILE or --group-indices LIST)");
  }
  qg::GroupSpec g(std::move(indices));
  qg::validate_group(g, p);
  return g;
}

qg::ProjectionMode parse_mode(const std::string& mode) {
  if (mode == "sigma") return qg::ProjectionMode::sigma;
  if (mode == "general") return qg::ProjectionMode::general;
  if (mode == "identity") return qg::ProjectionMode::identity;
  throw std::invalid_argument("unknown mode '" + mode + "' (sigma, general, or identity)");
}

qg::Linkage parse_linkage(const std::string& linkage) {
  if (linkage == "complete") return qg::Linkage::complete;
  if (linkage == "average") return qg::Linkage::average;
  throw std::invalid_argument("unknown linkage '" + linkage + "' (complete or average)");
}

std::optional<qg::WeightMatrix> load_weights(const CommonOpts& opts, std::size_t group_size) {
  if (opts.mode != "general") return std::nullopt;
  if (opts.weights_file.empty()) {
    throw std::invalid_argument("mode general requires --weights FILE");
  }
  std::ifstream in(opts.weights_file);
  if (!in) throw std::invalid_argument("cannot open weights file: " + opts.weights_file);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) {
      try {
        row.push_back(std::stod(token));
      } catch (const std::exception&) {
        throw std::invalid_argument("weights file: bad value '" + token + "' at line " +
                                    std::to_string(line_no));
      }
    }
    rows.push_back(std::move(row));
  }
  const auto dim = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd a(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (rows[static_cast<std::size_t>(i)].size() != static_cast<std::size_t>(dim)) {
      throw std::invalid_argument("weights file: not square at line " + std::to_string(i + 1));
    }
    for (Eigen::Index j = 0; j < dim; ++j) {
      a(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  if (static_cast<std::size_t>(dim) != group_size) {
    throw std::invalid_argument("weights dimension " + std::to_string(dim) +
                                " mismatches group size " + std::to_string(group_size));
  }
  return qg::WeightMatrix(std::move(a));
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  out << content;
  if (!out) throw std::invalid_argument("write failed: " + path.string());
}

json config_json(const CommonOpts& opts, const std::string& subcommand) {
  json cfg{{"subcommand", subcommand},
           {"version", qg::kVersion},
           {"data", opts.data_path},
           {"has_header", !opts.no_header},
           {"drop_incomplete", opts.drop_incomplete},
           {"alpha", opts.alpha},
           {"level", opts.level},
           {"tau", opts.tau},
           {"c_lambda", opts.c_lambda},
           {"split", opts.split},
           {"seed", opts.seed},
           {"mode", opts.mode},
           {"truncate", opts.truncate}};
  cfg["lambda0"] = opts.lambda0 ? json(*opts.lambda0) : json(nullptr);
  cfg["response_col"] = opts.response_col ? json(*opts.response_col) : json(nullptr);
  if (!opts.group_file.empty()) cfg["group_file"] = opts.group_file;
  if (!opts.group_indices.empty()) cfg["group_indices"] = opts.group_indices;
  if (!opts.weights_file.empty()) cfg["weights"] = opts.weights_file;
  return cfg;
}

void emit(const CommonOpts& opts, const json& config, const json& result,
          const std::string& result_name) {
  if (opts.out_dir.empty()) {
    json combined = result;
    combined["config"] = config;
    std::cout << combined.dump(2) << '\n';
    return;
  }
  const std::filesystem::path dir(opts.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "manifest.json", config.dump(2) + "\n");
  write_file(dir / result_name, result.dump(2) + "\n");
  std::cout << (dir / result_name).string() << '\n';
}

json estimate_record(const CommonOpts& opts, const qg::QuadEstimate& est,
                     const qg::TestResult& test, const qg::ConfInterval& ci) {
  json record = json::parse(qg::to_json_record(est, test, ci));
  if (opts.debug) {
    record["debug"] = {{"lambda_effective", est.lambda_effective},
                       {"max_violation", est.proj_max_violation},
                       {"quad_value", est.proj_quad_value},
                       {"iterations", est.proj_iterations},
                       {"var_base", est.var_base},
                       {"var_fluctuation", est.var_fluctuation}};
  }
  return record;
}

void validate_common(const CommonOpts& opts) {
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) {
    throw std::invalid_argument("--alpha must lie in (0, 1)");
  }
  if (!(opts.level > 0.0 && opts.level < 1.0)) {
    throw std::invalid_argument("--level must lie in (0, 1)");
  }
  if (!(opts.tau >= 0.0)) throw std::invalid_argument("--tau must be nonnegative");
  if (!(opts.c_lambda > 0.0)) throw std::invalid_argument("--c-lambda must be positive");
  if (opts.lambda0 && !(*opts.lambda0 > 0.0)) {
    throw std::invalid_argument("--lambda0 must be positive");
  }
}

/// estimate, test, and ci share one pipeline and differ in the
/// reported slice of the result.
int run_estimate_family(const CommonOpts& opts, const std::string& subcommand) {
  validate_common(opts);
  const qg::Dataset d = load_data(opts);
  const qg::GroupSpec g = load_group_arg(opts, d.p());
  const auto weights = load_weights(opts, g.size());
  const qg::ProjectionMode mode = parse_mode(opts.mode);

  qg::InitialFitOptions fit_opts;
  fit_opts.split = opts.split;
  fit_opts.seed = opts.seed;
  fit_opts.lambda0 = opts.lambda0;
  const qg::InitialFit fit = qg::fit_initial(d, fit_opts);
  const qg::EstimationContext context(d, fit, opts.c_lambda);
  const qg::QuadEstimate est = context.estimate(g, mode, weights, opts.tau);
  const qg::TestResult test = qg::test_group(est, opts.alpha);
  const qg::ConfInterval ci = qg::confidence_interval(est, opts.level, opts.truncate);

  const json full = estimate_record(opts, est, test, ci);
  json result;
  if (subcommand == "test") {
    result = {{"statistic", test.statistic}, {"p_value", test.p_value},
              {"reject", test.reject},       {"alpha", test.alpha},
              {"q_hat", est.q_hat},          {"mode", qg::mode_name(est.mode)},
              {"tau", est.tau}};
  } else if (subcommand == "ci") {
    result = {{"lower", ci.lower},   {"upper", ci.upper},
              {"level", ci.level},   {"truncated_at_zero", ci.truncated_at_zero},
              {"q_hat", est.q_hat},  {"mode", qg::mode_name(est.mode)},
              {"tau", est.tau}};
  } else {
    result = full;
  }
  emit(opts, config_json(opts, subcommand), result, "result.json");
  return kExitOk;
}

int run_hiertest(const CommonOpts& opts, const std::string& linkage_name,
                 const std::string& tree_file) {
  validate_common(opts);
  const qg::Dataset d = load_data(opts);
  qg::ClusterTree tree;
  if (!tree_file.empty()) {
    std::ifstream in(tree_file);
    if (!in) throw std::invalid_argument("cannot open tree file: " + tree_file);
    std::stringstream buffer;
    buffer << in.rdbuf();
    tree = qg::tree_from_json(buffer.str());
  } else {
    tree = qg::build_tree(d, parse_linkage(linkage_name));
  }

  qg::HierEngineConfig engine;
  engine.mode = parse_mode(opts.mode);
  engine.tau = opts.tau;
  engine.c_lambda = opts.c_lambda;
  engine.fit.split = opts.split;
  engine.fit.seed = opts.seed;
  engine.fit.lambda0 = opts.lambda0;
  const qg::HierResult result = qg::run_hierarchy(d, tree, opts.alpha, engine);

  for (const std::string& warning : result.warnings) {
    std::cerr << "warning: " << warning << '\n';
  }
  json config = config_json(opts, "hiertest");
  config["linkage"] = linkage_name;
  if (!tree_file.empty()) config["tree_file"] = tree_file;
  if (opts.out_dir.empty()) {
    json combined = json::parse(qg::hier_to_json(result));
    combined["config"] = config;
    std::cout << combined.dump(2) << '\n';
    return kExitOk;
  }
  const std::filesystem::path dir(opts.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "manifest.json", config.dump(2) + "\n");
  write_file(dir / "findings.csv", qg::hier_to_csv(result));
  write_file(dir / "findings.json", qg::hier_to_json(result) + "\n");
  write_file(dir / "tree.json", qg::tree_to_json(tree) + "\n");
  std::cout << (dir / "findings.csv").string() << '\n';
  return kExitOk;
}

int run_interact(CommonOpts& opts, const std::string& treatment_col, int treatment_index) {
  validate_common(opts);
  if (opts.data_path.empty()) throw std::invalid_argument("--data is required");

  int file_col = treatment_index;
  if (!treatment_col.empty()) {
    if (opts.no_header) {
      throw std::invalid_argument("--treatment-col needs a header row; "
                                  "use --treatment-index with --no-header");
    }
    std::ifstream in(opts.data_path);
    if (!in) throw std::invalid_argument("cannot open file: " + opts.data_path);
    std::string header;
    std::getline(in, header);
    std::stringstream ss(header);
    std::string cell;
    int col = 0;
    file_col = -1;
    while (std::getline(ss, cell, ',')) {
      ++col;
      if (cell == treatment_col) {
        file_col = col;
        break;
      }
    }
    if (file_col < 0) {
      throw std::invalid_argument("no column named '" + treatment_col + "' in header");
    }
  }
  if (file_col < 1) {
    throw std::invalid_argument("a treatment column is required "
                                "(--treatment-col NAME or --treatment-index K)");
  }

  const qg::Dataset raw = load_data(opts);
  // file_col counts CSV columns; translate to the covariate position
  // by removing the response column from the count.
  qg::CsvOptions csv;
  csv.has_header = !opts.no_header;
  csv.response_col = opts.response_col;
  int y_col = 0;
  if (opts.response_col) {
    y_col = *opts.response_col;
  } else if (!opts.no_header) {
    std::ifstream in(opts.data_path);
    std::string header;
    std::getline(in, header);
    std::stringstream ss(header);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      if (cell == "y") {
        y_col = col;
        break;
      }
    }
  } else {
    y_col = static_cast<int>(raw.p()) + 1;
  }
  if (file_col == y_col) {
    throw std::invalid_argument("treatment column equals the response column");
  }
  const int treat_cov = file_col - (file_col > y_col ? 2 : 1);
  if (treat_cov < 0 || treat_cov >= raw.p()) {
    throw std::invalid_argument("treatment column out of range");
  }

  const Eigen::VectorXd treatment = raw.x.col(treat_cov);
  qg::Dataset d;
  d.x.resize(raw.n(), raw.p() - 1);
  d.x.leftCols(treat_cov) = raw.x.leftCols(treat_cov);
  d.x.rightCols(raw.p() - 1 - treat_cov) = raw.x.rightCols(raw.p() - 1 - treat_cov);
  d.y = raw.y;

  const qg::InteractionDesign design = qg::build_interaction(d, treatment);
  if (design.warning) std::cerr << "warning: " << *design.warning << '\n';

  qg::InitialFitOptions fit_opts;
  fit_opts.split = opts.split;
  fit_opts.seed = opts.seed;
  fit_opts.lambda0 = opts.lambda0;
  const qg::InitialFit fit = qg::fit_initial(design.data, fit_opts);
  const qg::EstimationContext context(design.data, fit, opts.c_lambda);
  const qg::QuadEstimate est =
      context.estimate(design.gamma_group, parse_mode(opts.mode), std::nullopt, opts.tau);
  const qg::TestResult test = qg::test_group(est, opts.alpha);
  const qg::ConfInterval ci = qg::confidence_interval(est, opts.level, opts.truncate);

  json result = estimate_record(opts, est, test, ci);
  if (design.warning) result["warning"] = *design.warning;
  json config = config_json(opts, "interact");
  if (!treatment_col.empty()) config["treatment_col"] = treatment_col;
  config["treatment_file_column"] = file_col;
  emit(opts, config, result, "result.json");
  return kExitOk;
}

int run_herit(const CommonOpts& opts, const std::string& groups_file, bool normalize) {
  validate_common(opts);
  if (groups_file.empty()) throw std::invalid_argument("--groups FILE is required");
  const qg::Dataset d = load_data(opts);
  const std::vector<qg::GroupSpec> groups = qg::load_groups(groups_file);

  qg::HeritOptions herit;
  herit.level = opts.level;
  herit.tau = opts.tau;
  herit.mode = parse_mode(opts.mode);
  herit.c_lambda = opts.c_lambda;
  herit.normalize = normalize;
  herit.fit.split = opts.split;
  herit.fit.seed = opts.seed;
  herit.fit.lambda0 = opts.lambda0;
  const auto records = qg::heritability_report(d, groups, herit);

  json config = config_json(opts, "herit");
  config["groups_file"] = groups_file;
  config["normalize"] = normalize;
  if (opts.out_dir.empty()) {
    json combined{{"records", json::parse(qg::herit_to_json(records))}, {"config", config}};
    std::cout << combined.dump(2) << '\n';
    return kExitOk;
  }
  const std::filesystem::path dir(opts.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "manifest.json", config.dump(2) + "\n");
  write_file(dir / "heritability.csv", qg::herit_to_csv(records));
  write_file(dir / "heritability.json", qg::herit_to_json(records) + "\n");
  std::cout << (dir / "heritability.csv").string() << '\n';
  return kExitOk;
}

struct SimulateOpts {
  std::string scenario = "dense";
  int n = 500;
  int p = 500;
  double delta = 0.0;
  double hier_beta = 1.0;
  int reps = 500;
  std::uint64_t seed = 1;
  double c_lambda = 0.03;
  std::optional<double> lambda0;
  bool split = false;
  double alpha = 0.05;
  double level = 0.95;
  std::string linkage = "complete";
  int threads = 0;
  std::string out_dir;
};

int run_simulate(const SimulateOpts& opts) {
  qg::Scenario sc;
  sc.kind = qg::scenario_kind_from_name(opts.scenario);
  sc.n = opts.n;
  sc.p = opts.p;
  sc.delta = opts.delta;
  sc.hier_beta = opts.hier_beta;
  sc.replicates = opts.reps;
  sc.seed = resolve_seed(opts.seed);

  qg::MethodsConfig cfg;
  cfg.c_lambda = opts.c_lambda;
  cfg.lambda0 = opts.lambda0;
  cfg.split = opts.split;
  cfg.alpha = opts.alpha;
  cfg.level = opts.level;
  cfg.linkage = parse_linkage(opts.linkage);
  cfg.threads = opts.threads;
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw std::invalid_argument("--alpha must lie in (0, 1)");
  }
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) {
    throw std::invalid_argument("--level must lie in (0, 1)");
  }
  if (!(cfg.c_lambda > 0.0)) throw std::invalid_argument("--c-lambda must be positive");
  if (cfg.lambda0 && !(*cfg.lambda0 > 0.0)) {
    throw std::invalid_argument("--lambda0 must be positive");
  }

  const qg::SimReport report = qg::run_scenario(sc, cfg);
  const std::string csv = qg::report_to_csv(report);
  const std::string manifest = qg::report_to_json(report, cfg);
  if (opts.out_dir.empty()) {
    std::cout << csv;
    std::cerr << manifest << '\n';
    return kExitOk;
  }
  const std::filesystem::path dir(opts.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "table.csv", csv);
  write_file(dir / "manifest.json", manifest + "\n");
  std::cout << (dir / "table.csv").string() << '\n';
  return kExitOk;
}

void add_common_options(CLI::App* cmd, CommonOpts& opts, bool with_group = true) {
  cmd->add_option("--data", opts.data_path, "Input CSV (response column named 'y' by default)");
  cmd->add_flag("--no-header", opts.no_header, "Treat the first row as data");
  cmd->add_option("--response-col", opts.response_col, "1-based response column");
  cmd->add_flag("--drop-incomplete", opts.drop_incomplete,
                "Drop rows with empty/NA cells instead of failing");
  if (with_group) {
    cmd->add_option("--group", opts.group_file, "Group file, one 1-based index per line");
    cmd->add_option("--group-indices", opts.group_indices, "Inline group, e.g. 1,2,5");
  }
  cmd->add_option("--alpha", opts.alpha, "Test level (default 0.05)");
  cmd->add_option("--level", opts.level, "Confidence level (default 0.95)");
  cmd->add_option("--tau", opts.tau, "Variance enlargement constant (default 1)");
  cmd->add_option("--c-lambda", opts.c_lambda, "Projection penalty multiplier (default 0.03)");
  cmd->add_option("--lambda0", opts.lambda0, "Initial-fit penalty multiplier");
  cmd->add_flag("--split", opts.split, "Fit on one half, correct on the other");
  cmd->add_option("--seed", opts.seed, "RNG seed (QUADGROUP_SEED overrides)");
  cmd->add_option("--mode", opts.mode, "sigma | general | identity (default sigma)");
  cmd->add_option("--weights", opts.weights_file, "Weight matrix CSV for mode general");
  cmd->add_flag("--truncate", opts.truncate, "Truncate the CI lower end at 0");
  cmd->add_flag("--debug", opts.debug, "Include projection diagnostics in output");
  cmd->add_option("--out", opts.out_dir, "Output directory (default: print to stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group inference for high-dimensional regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(qg::kVersion));

  CommonOpts est_opts, test_opts, ci_opts, hier_opts, interact_opts, herit_opts;
  std::string hier_linkage = "complete", hier_tree_file;
  std::string interact_col;
  int interact_index = 0;
  std::string herit_groups;
  bool herit_normalize = false;
  SimulateOpts sim_opts;

  CLI::App* cmd_estimate = app.add_subcommand("estimate", "Bias-corrected group estimate");
  add_common_options(cmd_estimate, est_opts);
  CLI::App* cmd_test = app.add_subcommand("test", "One-sided group significance test");
  add_common_options(cmd_test, test_opts);
  CLI::App* cmd_ci = app.add_subcommand("ci", "Two-sided confidence interval");
  add_common_options(cmd_ci, ci_opts);

  CLI::App* cmd_hier = app.add_subcommand("hiertest", "Top-down hierarchical testing");
  add_common_options(cmd_hier, hier_opts, false);
  cmd_hier->add_option("--linkage", hier_linkage, "complete | average (default complete)");
  cmd_hier->add_option("--tree", hier_tree_file, "Tree JSON (skips clustering)");

  CLI::App* cmd_interact = app.add_subcommand("interact", "Interaction / heterogeneity test");
  add_common_options(cmd_interact, interact_opts, false);
  cmd_interact->add_option("--treatment-col", interact_col, "Treatment column name");
  cmd_interact->add_option("--treatment-index", interact_index,
                           "1-based treatment column position");

  CLI::App* cmd_herit = app.add_subcommand("herit", "Per-group explained-variance report");
  add_common_options(cmd_herit, herit_opts, false);
  cmd_herit->add_option("--groups", herit_groups,
                        "Groups file, one comma-separated group per line");
  cmd_herit->add_flag("--normalize", herit_normalize,
                      "Also report q_hat / sample variance of y");

  CLI::App* cmd_sim = app.add_subcommand("simulate", "Monte Carlo scenario runner");
  cmd_sim->add_option("--scenario", sim_opts.scenario, "dense | highcorr | hier1 | hier2");
  cmd_sim->add_option("--n", sim_opts.n, "Observations per replicate (default 500)");
  cmd_sim->add_option("--p", sim_opts.p, "Covariates (default 500)");
  cmd_sim->add_option("--delta", sim_opts.delta, "Signal magnitude (default 0)");
  cmd_sim->add_option("--hier-beta", sim_opts.hier_beta,
                      "Active coefficient for hier scenarios (default 1)");
  cmd_sim->add_option("--reps", sim_opts.reps, "Replicates (default 500)");
  cmd_sim->add_option("--seed", sim_opts.seed, "RNG seed (QUADGROUP_SEED overrides)");
  cmd_sim->add_option("--c-lambda", sim_opts.c_lambda, "Projection penalty multiplier");
  cmd_sim->add_option("--lambda0", sim_opts.lambda0, "Initial-fit penalty multiplier");
  cmd_sim->add_flag("--split", sim_opts.split, "Enable sample splitting");
  cmd_sim->add_option("--alpha", sim_opts.alpha, "Test level (default 0.05)");
  cmd_sim->add_option("--level", sim_opts.level, "CI level (default 0.95)");
  cmd_sim->add_option("--linkage", sim_opts.linkage, "Tree linkage for hier scenarios");
  cmd_sim->add_option("--threads", sim_opts.threads, "Worker threads (default: all cores)");
  cmd_sim->add_option("--out", sim_opts.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUser;
  }

  try {
    for (CommonOpts* opts : {&est_opts, &test_opts, &ci_opts, &hier_opts, &interact_opts,
                             &herit_opts}) {
      opts->seed = resolve_seed(opts->seed);
    }
    if (cmd_estimate->parsed()) return run_estimate_family(est_opts, "estimate");
    if (cmd_test->parsed()) return run_estimate_family(test_opts, "test");
    if (cmd_ci->parsed()) return run_estimate_family(ci_opts, "ci");
    if (cmd_hier->parsed()) return run_hiertest(hier_opts, hier_linkage, hier_tree_file);
    if (cmd_interact->parsed()) return run_interact(interact_opts, interact_col, interact_index);
    if (cmd_herit->parsed()) return run_herit(herit_opts, herit_groups, herit_normalize);
    if (cmd_sim->parsed()) return run_simulate(sim_opts);
    std::cerr << "error: no subcommand\n";
    return kExitUser;
  } catch (const quadgroup::SolverError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  }
  return kExitOk;
}
