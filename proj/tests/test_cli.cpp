#include "quadgroup/rng.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#ifndef QUADGROUP_CLI_PATH
#error "QUADGROUP_CLI_PATH must point at the built binary"
#endif

using nlohmann::json;
using quadgroup::CounterRng;
using quadgroup::StreamRole;

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Runs the binary through the shell, capturing both streams. The
/// optional env prefix lets tests inject QUADGROUP_SEED and friends.
RunResult run_cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / "quadgroup_cli_test";
  fs::create_directories(dir);
  const fs::path out_file = dir / ("out" + std::to_string(counter) + ".txt");
  const fs::path err_file = dir / ("err" + std::to_string(counter) + ".txt");
  ++counter;

  std::string command = env;
  if (!command.empty()) command += ' ';
  command += std::string(QUADGROUP_CLI_PATH) + ' ' + args + " > " + out_file.string() +
             " 2> " + err_file.string();
  const int raw = std::system(command.c_str());

  RunResult result;
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

/// A small dense-signal regression written as CSV; deterministic so
/// repeat invocations must agree bit for bit.
fs::path fixture_csv(bool header = true, int n = 80, int p = 6) {
  const fs::path dir = fs::temp_directory_path() / "quadgroup_cli_test";
  fs::create_directories(dir);
  const fs::path path =
      dir / ("data_" + std::to_string(n) + "x" + std::to_string(p) +
             (header ? "_h" : "_plain") + ".csv");

  CounterRng x_rng(2024, 0, StreamRole::covariates);
  CounterRng e_rng(2024, 0, StreamRole::noise);
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = x_rng.gaussian();
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta(0) = 1.2;
  beta(2) = -0.7;
  Eigen::VectorXd y = x * beta;
  for (int i = 0; i < n; ++i) y(i) += e_rng.gaussian();

  std::ofstream out(path);
  out << std::setprecision(17);
  if (header) {
    for (int j = 1; j <= p; ++j) out << 'x' << j << ',';
    out << "y\n";
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) out << x(i, j) << ',';
    out << y(i) << '\n';
  }
  return path;
}

/// Wide design (n < p) whose identity-mode projection is infeasible
/// at a vanishing penalty, forcing the solver failure path.
fs::path wide_csv() {
  const fs::path dir = fs::temp_directory_path() / "quadgroup_cli_test";
  fs::create_directories(dir);
  const fs::path path = dir / "wide.csv";

  const int n = 30;
  const int p = 50;
  CounterRng x_rng(2025, 0, StreamRole::covariates);
  CounterRng e_rng(2025, 0, StreamRole::noise);
  std::ofstream out(path);
  out << std::setprecision(17);
  for (int j = 1; j <= p; ++j) out << 'x' << j << ',';
  out << "y\n";
  for (int i = 0; i < n; ++i) {
    double y = e_rng.gaussian();
    for (int j = 0; j < p; ++j) {
      const double v = x_rng.gaussian();
      out << v << ',';
      if (j < 3) y += 1.5 * v;
    }
    out << y << '\n';
  }
  return path;
}

fs::path interact_csv() {
  const fs::path dir = fs::temp_directory_path() / "quadgroup_cli_test";
  fs::create_directories(dir);
  const fs::path path = dir / "interact.csv";

  const int n = 120;
  CounterRng x_rng(2026, 0, StreamRole::covariates);
  CounterRng t_rng(2026, 0, StreamRole::split);
  CounterRng e_rng(2026, 0, StreamRole::noise);
  std::ofstream out(path);
  out << std::setprecision(17);
  out << "x1,x2,x3,d,y\n";
  for (int i = 0; i < n; ++i) {
    const double x1 = x_rng.gaussian();
    const double x2 = x_rng.gaussian();
    const double x3 = x_rng.gaussian();
    const double d = t_rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double y = x1 - 0.5 * x2 + 1.4 * d * x1 + e_rng.gaussian();
    out << x1 << ',' << x2 << ',' << x3 << ',' << d << ',' << y << '\n';
  }
  return path;
}

fs::path groups_file() {
  const fs::path dir = fs::temp_directory_path() / "quadgroup_cli_test";
  fs::create_directories(dir);
  const fs::path path = dir / "groups.txt";
  std::ofstream out(path);
  out << "1,2,3\n5,6\n";
  return path;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "quadgroup_cli_test" / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("help and version exit cleanly") {
  const RunResult help = run_cli("--help");
  CHECK(help.exit_code == 0);
  for (const char* name : {"estimate", "test", "ci", "hiertest", "interact", "herit",
                           "simulate"}) {
    CHECK(help.out.find(name) != std::string::npos);
  }

  const RunResult version = run_cli("--version");
  CHECK(version.exit_code == 0);
  CHECK_FALSE(version.out.empty());

  const RunResult bare = run_cli("");
  CHECK(bare.exit_code == 2);
}

TEST_CASE("estimate emits a self-describing record") {
  const std::string args =
      "estimate --data " + fixture_csv().string() + " --group-indices 1,2,3";
  const RunResult r = run_cli(args);
  REQUIRE(r.exit_code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc.at("q_hat").get<double>() > 0.0);
  CHECK(doc.at("mode") == "sigma");
  CHECK(doc.contains("p_value"));
  CHECK(doc.at("ci").size() == 2);
  CHECK(doc.at("config").at("subcommand") == "estimate");
  CHECK(doc.at("config").at("tau") == 1.0);
  CHECK_FALSE(doc.contains("debug"));

  const RunResult again = run_cli(args);
  CHECK(again.out == r.out);

  const RunResult debug = run_cli(args + " --debug");
  REQUIRE(debug.exit_code == 0);
  const json ddoc = json::parse(debug.out);
  CHECK(ddoc.at("debug").contains("lambda_effective"));
  CHECK(ddoc.at("debug").contains("max_violation"));
}

TEST_CASE("test and ci report their focused slices") {
  const std::string base = " --data " + fixture_csv().string() + " --group-indices 1,2";
  const RunResult t = run_cli("test" + base + " --alpha 0.01");
  REQUIRE(t.exit_code == 0);
  const json tdoc = json::parse(t.out);
  CHECK(tdoc.contains("statistic"));
  CHECK(tdoc.contains("p_value"));
  CHECK(tdoc.contains("reject"));
  CHECK(tdoc.at("alpha") == 0.01);
  CHECK_FALSE(tdoc.contains("ci"));

  const RunResult c = run_cli("ci" + base + " --level 0.9 --truncate");
  REQUIRE(c.exit_code == 0);
  const json cdoc = json::parse(c.out);
  CHECK(cdoc.at("level") == 0.9);
  CHECK(cdoc.at("lower").get<double>() >= 0.0);
  CHECK(cdoc.at("lower").get<double>() <= cdoc.at("upper").get<double>());
  CHECK(cdoc.contains("truncated_at_zero"));
}

TEST_CASE("output directories receive manifest and result files") {
  const fs::path dir = scratch_dir("est_out");
  const RunResult r = run_cli("estimate --data " + fixture_csv().string() +
                              " --group-indices 1,2,3 --out " + dir.string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("result.json") != std::string::npos);
  const json result = json::parse(slurp(dir / "result.json"));
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(result.contains("q_hat"));
  CHECK_FALSE(result.contains("config"));
  CHECK(manifest.at("subcommand") == "estimate");
  CHECK(manifest.at("data").get<std::string>().find("data_80x6") != std::string::npos);
}

TEST_CASE("header handling matches across equivalent encodings") {
  const std::string with_header =
      "estimate --data " + fixture_csv(true).string() + " --group-indices 1,2,3";
  const std::string without_header = "estimate --data " + fixture_csv(false).string() +
                                     " --no-header --group-indices 1,2,3";
  const RunResult a = run_cli(with_header);
  const RunResult b = run_cli(without_header);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  const json da = json::parse(a.out);
  const json db = json::parse(b.out);
  CHECK(da.at("q_hat") == db.at("q_hat"));
  CHECK(da.at("p_value") == db.at("p_value"));
}

TEST_CASE("general mode requires and consumes a weight matrix") {
  const fs::path dir = fs::temp_directory_path() / "quadgroup_cli_test";
  fs::create_directories(dir);
  const fs::path weights = dir / "weights.csv";
  {
    std::ofstream out(weights);
    out << "2,0.5\n0.5,1\n";
  }
  const std::string base = " --data " + fixture_csv().string() + " --group-indices 1,3";

  const RunResult missing = run_cli("estimate" + base + " --mode general");
  CHECK(missing.exit_code == 2);
  CHECK(missing.err.find("--weights") != std::string::npos);

  const RunResult ok =
      run_cli("estimate" + base + " --mode general --weights " + weights.string());
  REQUIRE(ok.exit_code == 0);
  CHECK(json::parse(ok.out).at("mode") == "general");

  const fs::path bad = dir / "weights_bad.csv";
  {
    std::ofstream out(bad);
    out << "1,0\n0\n";
  }
  const RunResult ragged =
      run_cli("estimate" + base + " --mode general --weights " + bad.string());
  CHECK(ragged.exit_code == 2);
}

TEST_CASE("user errors exit with status 2 and a message") {
  const std::string data = fixture_csv().string();
  const std::vector<std::string> bad_invocations = {
      "estimate --group-indices 1,2",
      "estimate --data " + data,
      "estimate --data " + data + " --group-indices 1,2 --alpha 1.5",
      "estimate --data " + data + " --group-indices 1,2 --mode banana",
      "estimate --data " + data + " --group-indices 0",
      "estimate --data " + data + " --group-indices 99",
      "estimate --data " + data + " --group-indices 1 --c-lambda -2",
      "estimate --data /no/such/file.csv --group-indices 1",
      "estimate --data " + data + " --group-indices 1 --unknown-flag",
      "simulate --scenario banana",
  };
  for (const std::string& args : bad_invocations) {
    CAPTURE(args);
    const RunResult r = run_cli(args);
    CHECK(r.exit_code == 2);
    CHECK_FALSE(r.err.empty());
  }
}

TEST_CASE("numerical failures exit with status 3") {
  const RunResult r = run_cli("estimate --data " + wide_csv().string() +
                              " --group-indices 1,2,3 --mode identity --c-lambda 1e-12");
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("numerical failure") != std::string::npos);
}

TEST_CASE("the environment seed overrides the flag") {
  const std::string args = "estimate --data " + fixture_csv().string() +
                           " --group-indices 1,2,3 --split --seed 1";
  const RunResult env_seed = run_cli(args, "QUADGROUP_SEED=99");
  const RunResult flag_seed = run_cli("estimate --data " + fixture_csv().string() +
                                      " --group-indices 1,2,3 --split --seed 99");
  const RunResult plain = run_cli(args);
  REQUIRE(env_seed.exit_code == 0);
  REQUIRE(flag_seed.exit_code == 0);
  REQUIRE(plain.exit_code == 0);
  CHECK(env_seed.out == flag_seed.out);
  CHECK(json::parse(env_seed.out).at("config").at("seed") == 99);
  CHECK(json::parse(plain.out).at("config").at("seed") == 1);
  CHECK(env_seed.out != plain.out);

  const RunResult bad = run_cli(args, "QUADGROUP_SEED=banana");
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("QUADGROUP_SEED") != std::string::npos);
}

TEST_CASE("hiertest descends, persists, and replays a tree") {
  const fs::path dir = scratch_dir("hier_out");
  const std::string base = "hiertest --data " + fixture_csv().string();
  const RunResult r = run_cli(base + " --out " + dir.string());
  REQUIRE(r.exit_code == 0);

  const json findings = json::parse(slurp(dir / "findings.json"));
  CHECK(findings.contains("findings"));
  CHECK(findings.at("tested_count").get<int>() >= 1);
  CHECK(json::parse(slurp(dir / "manifest.json")).at("subcommand") == "hiertest");
  const std::string csv = slurp(dir / "findings.csv");
  CHECK(csv.rfind("members,", 0) == 0);

  // Replaying the persisted tree must reproduce the findings.
  const RunResult replay = run_cli(base + " --tree " + (dir / "tree.json").string());
  REQUIRE(replay.exit_code == 0);
  const json replay_doc = json::parse(replay.out);
  CHECK(replay_doc.at("findings") == findings.at("findings"));
  CHECK(replay_doc.at("config").at("tree_file").get<std::string>().find("tree.json") !=
        std::string::npos);

  const RunResult missing_tree = run_cli(base + " --tree /no/such/tree.json");
  CHECK(missing_tree.exit_code == 2);
}

TEST_CASE("interact resolves the treatment column by name or index") {
  const std::string data = interact_csv().string();
  const RunResult by_name = run_cli("interact --data " + data + " --treatment-col d");
  REQUIRE(by_name.exit_code == 0);
  const json doc = json::parse(by_name.out);
  CHECK(doc.at("reject") == true);
  CHECK(doc.at("group").size() == 3);
  CHECK(doc.at("config").at("treatment_file_column") == 4);

  const RunResult by_index = run_cli("interact --data " + data + " --treatment-index 4");
  REQUIRE(by_index.exit_code == 0);
  CHECK(json::parse(by_index.out).at("q_hat") == doc.at("q_hat"));

  CHECK(run_cli("interact --data " + data).exit_code == 2);
  CHECK(run_cli("interact --data " + data + " --treatment-col nope").exit_code == 2);
  CHECK(run_cli("interact --data " + data + " --treatment-index 5").exit_code == 2);
  CHECK(run_cli("interact --data " + data + " --treatment-col d --no-header").exit_code == 2);
}

TEST_CASE("herit reports each requested group") {
  const fs::path dir = scratch_dir("herit_out");
  const std::string args = "herit --data " + fixture_csv().string() + " --groups " +
                           groups_file().string() + " --normalize";
  const RunResult r = run_cli(args);
  REQUIRE(r.exit_code == 0);
  const json doc = json::parse(r.out);
  REQUIRE(doc.at("records").size() == 2);
  CHECK(doc.at("records")[0].at("group") == json({1, 2, 3}));
  CHECK(doc.at("records")[0].contains("proportion"));
  CHECK(doc.at("config").at("normalize") == true);

  const RunResult filed = run_cli(args + " --out " + dir.string());
  REQUIRE(filed.exit_code == 0);
  const std::string csv = slurp(dir / "heritability.csv");
  CHECK(csv.rfind("group,q_hat,lower,upper,proportion", 0) == 0);
  CHECK(csv.find("1;2;3,") != std::string::npos);

  CHECK(run_cli("herit --data " + fixture_csv().string()).exit_code == 2);
}

TEST_CASE("simulate writes the table and manifest") {
  const fs::path dir = scratch_dir("sim_out");
  const std::string args =
      "simulate --scenario dense --n 60 --p 200 --delta 0 --reps 2 --threads 2 --seed 4";
  const RunResult r = run_cli(args);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.rfind("delta,n,method,value", 0) == 0);
  const json manifest = json::parse(r.err);
  CHECK(manifest.at("scenario").at("kind") == "dense");
  CHECK(manifest.at("completed") == 2);

  const RunResult filed = run_cli(args + " --out " + dir.string());
  REQUIRE(filed.exit_code == 0);
  CHECK(slurp(dir / "table.csv") == r.out);
  CHECK(json::parse(slurp(dir / "manifest.json")).at("scenario").at("seed") == 4);

  const RunResult reseeded = run_cli(args, "QUADGROUP_SEED=4");
  CHECK(reseeded.out == r.out);
}
