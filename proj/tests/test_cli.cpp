#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvcov/config.hpp"
#include "mvcov/io.hpp"

// End-to-end checks of the command-line tool, spawning the built binary.

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code;
  std::string output;
};

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "mvcov_cli_tests";
  fs::create_directories(dir);
  return dir;
}

RunResult run_cli(const std::string& args) {
  const fs::path out = work_dir() / "cli_output.txt";
  const std::string cmd =
      std::string(MVCOV_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream f(out);
  std::stringstream ss;
  ss << f.rdbuf();
  r.output = ss.str();
  return r;
}

std::string write_parsimonious_config(double beta12) {
  mvcov::json j;
  j["family"] = "multimatern";
  j["variant"] = "parsimonious";
  j["dim"] = 2;
  j["sigma"] = {1.61, 0.19};
  j["nu"] = {1.33, 0.54};
  j["a"] = 1.0 / 367.1;
  j["beta"] = {{1.0, beta12}, {beta12, 1.0}};
  j["variables"] = {"T", "P"};
  const fs::path path = work_dir() / ("model_" + std::to_string(beta12) + ".json");
  std::ofstream f(path);
  f << j.dump(2);
  return path.string();
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("simulate writes a reproducible dataset of the documented shape") {
  const std::string config = write_parsimonious_config(-0.49);
  const std::string out1 = (work_dir() / "sim1.csv").string();
  const std::string out2 = (work_dir() / "sim2.csv").string();
  const std::string args = "--config " + config +
                           " --grid 3x3 --spacing 50 --reps 2 --seed 7 --out ";
  const RunResult r1 = run_cli("simulate " + args + out1);
  CAPTURE(r1.output);
  REQUIRE(r1.exit_code == 0);
  CHECK(r1.output.find("validity: PASS") != std::string::npos);
  const RunResult r2 = run_cli("simulate " + args + out2);
  REQUIRE(r2.exit_code == 0);
  CHECK(read_file(out1) == read_file(out2));  // byte-for-byte reproducible

  const mvcov::Dataset data = mvcov::read_dataset_file(out1);
  CHECK(data.sample.n() == 9);
  CHECK(data.sample.t_count() == 2);
  CHECK(data.var_names == std::vector<std::string>{"T", "P"});
  // 9 sites x 2 reps = 18 rows per variable column
  std::istringstream lines(read_file(out1));
  std::string line;
  int rows = -1;
  while (std::getline(lines, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 18);
}

TEST_CASE("simulate rejects an invalid model with exit code 2") {
  const std::string config = write_parsimonious_config(-0.999);
  const RunResult r = run_cli("simulate --config " + config +
                              " --grid 3x3 --reps 1 --seed 1 --out " +
                              (work_dir() / "nope.csv").string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("nonnegative-definiteness") != std::string::npos);
  CHECK_FALSE(fs::exists(work_dir() / "nope.csv"));
}

TEST_CASE("simulate flags usage errors with exit code 1") {
  const std::string config = write_parsimonious_config(-0.49);
  const RunResult r = run_cli("simulate --config " + config +
                              " --grid 3x3 --reps 0 --seed 1 --out " +
                              (work_dir() / "usage.csv").string());
  CHECK(r.exit_code == 1);
}

TEST_CASE("missing input files exit with code 1") {
  const RunResult r = run_cli("simulate --config /nonexistent.json --grid 2x2 "
                              "--reps 1 --seed 1 --out " +
                              (work_dir() / "x.csv").string());
  CHECK(r.exit_code == 1);
}

TEST_CASE("fit with an all-pinned plan echoes the config and its loglik") {
  const std::string config = write_parsimonious_config(-0.49);
  const std::string data = (work_dir() / "fitdata.csv").string();
  REQUIRE(run_cli("simulate --config " + config +
                  " --grid 4x4 --spacing 50 --reps 3 --seed 11 --out " + data)
              .exit_code == 0);
  const fs::path plan = work_dir() / "noop_plan.json";
  {
    std::ofstream f(plan);
    f << R"({"stages":[{"free":[]}]})";
  }
  const std::string fitted = (work_dir() / "fitted_noop.json").string();
  const RunResult r = run_cli("fit --config " + config + " --data " + data +
                              " --plan " + plan.string() + " --out " + fitted);
  CAPTURE(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("loglik:") != std::string::npos);
  const mvcov::json before = mvcov::json::parse(read_file(config));
  mvcov::json after = mvcov::json::parse(read_file(fitted));
  CHECK(before == after);
}

TEST_CASE("cv runs end to end on simulated data and is seed-stable") {
  const std::string config = write_parsimonious_config(-0.49);
  const std::string data = (work_dir() / "cvdata.csv").string();
  REQUIRE(run_cli("simulate --config " + config +
                  " --grid 4x4 --spacing 50 --reps 3 --seed 3 --out " + data)
              .exit_code == 0);
  const std::string scores1 = (work_dir() / "scores1.csv").string();
  const std::string scores2 = (work_dir() / "scores2.csv").string();
  const std::string args = "cv --model " + config + " --data " + data +
                           " --fraction 0.25 --repeats 3 --seed 5 --out ";
  REQUIRE(run_cli(args + scores1).exit_code == 0);
  REQUIRE(run_cli(args + scores2).exit_code == 0);
  CHECK(read_file(scores1) == read_file(scores2));
  CHECK(read_file(scores1).rfind("model,variable,rmse,crps,repeats,seed\n", 0) == 0);
}

TEST_CASE("predict reproduces observations at observed sites") {
  const std::string config = write_parsimonious_config(-0.49);
  const std::string data = (work_dir() / "preddata.csv").string();
  REQUIRE(run_cli("simulate --config " + config +
                  " --grid 3x3 --spacing 80 --reps 1 --seed 21 --out " + data)
              .exit_code == 0);
  const fs::path targets = work_dir() / "targets.csv";
  {
    std::ofstream f(targets);
    f << "site,x,y\n0,0,0\n1,80,0\n";
  }
  const std::string pred = (work_dir() / "pred.csv").string();
  const RunResult r = run_cli("predict --model " + config + " --data " + data +
                              " --targets " + targets.string() + " --out " + pred);
  CAPTURE(r.output);
  REQUIRE(r.exit_code == 0);
  const std::string table = read_file(pred);
  CHECK(table.rfind("site,x,y,rep,variable,mean,variance", 0) == 0);
  // variance column for an observed site is (numerically) zero
  std::istringstream lines(table);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    const auto pos = line.rfind(',');
    REQUIRE(pos != std::string::npos);
    CHECK(std::abs(std::stod(line.substr(pos + 1))) <= 1e-9);
  }
}

TEST_CASE("empirical emits an all-zero table for constant data") {
  const fs::path data = work_dir() / "const.csv";
  {
    std::ofstream f(data);
    f << "site,x,y,rep,T,P\n";
    for (int rep = 0; rep < 2; ++rep)
      for (int k = 0; k < 4; ++k)
        f << k << ',' << (k % 2) << ',' << (k / 2) << ',' << rep << ",3.5,-1.25\n";
  }
  const std::string out = (work_dir() / "emp.csv").string();
  const RunResult r = run_cli("empirical --data " + data.string() +
                              " --estimator cov --bins 3 --out " + out);
  CAPTURE(r.output);
  REQUIRE(r.exit_code == 0);
  std::istringstream lines(read_file(out));
  std::string line;
  std::getline(lines, line);
  CHECK(line == "dist,pairs,var_i,var_j,estimate,terms");
  int data_rows = 0;
  while (std::getline(lines, line)) {
    ++data_rows;
    const auto fields_start = line.find(",");
    (void)fields_start;
    std::istringstream fs2(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(fs2, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 6);
    if (!fields[4].empty()) CHECK(std::stod(fields[4]) == 0.0);
  }
  CHECK(data_rows == 3 * 4);
}

TEST_CASE("validate reports and dumps the joint covariance") {
  const std::string config = write_parsimonious_config(-0.49);
  const std::string dump = (work_dir() / "sigma.bin").string();
  const RunResult r = run_cli("validate --config " + config +
                              " --sizes 20 --trials 2 --seed 3 --dump-sigma " +
                              dump + " --grid 3x3 --spacing 100");
  CAPTURE(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("validity: PASS") != std::string::npos);
  const mvcov::JointCovariance jc = mvcov::read_sigma_dump(dump);
  CHECK(jc.sigma.rows() == 18);
  CHECK(jc.factorized);
}
