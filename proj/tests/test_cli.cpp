#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path scratch{HEATPEN_SCRATCH};

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + HEATPEN_CLI + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh(const std::string& name) {
  const fs::path dir = scratch / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("simulate is deterministic and validates its design") {
  const auto a = fresh("sim_a"), b = fresh("sim_b");
  REQUIRE(run("simulate --n 60 --seed 4 --n-test 30 --out " + q(a)) == 0);
  REQUIRE(run("simulate --n 60 --seed 4 --n-test 30 --out " + q(b)) == 0);
  CHECK(slurp(a / "data.csv") == slurp(b / "data.csv"));
  CHECK(slurp(a / "test.csv") == slurp(b / "test.csv"));
  CHECK(fs::exists(a / "data.json"));

  const auto g = fresh("sim_gff");
  REQUIRE(run("simulate --design gff --n 50 --seed 2 --out " + q(g)) == 0);
  std::ifstream in(g / "data.csv");
  std::string header;
  std::getline(in, header);
  CHECK(std::count(header.begin(), header.end(), ',') + 1 == 101);
  CHECK(fs::exists(g / "graph.txt"));

  CHECK(run("simulate --n 40 --rhos 0.6,0.9,0.7,0.2 --sizes 16,24,40,20 --out " + q(fresh("sim_rhos"))) == 0);
  CHECK(run("simulate --rhos 0.6,1.2,0.7,0.4 --out " + q(fresh("sim_bad"))) == 2);
  CHECK(run("simulate --design torus --out " + q(fresh("sim_bad"))) == 2);
}

TEST_CASE("fit writes reproducible outputs") {
  const auto data = fresh("fit_data");
  REQUIRE(run("simulate --n 80 --seed 5 --n-test 40 --out " + q(data)) == 0);
  const std::string common = "--data " + q(data / "data.csv") + " --meta " + q(data / "data.json") +
                             " --test " + q(data / "test.csv");

  CHECK(run("fit " + common + " --out " + q(fresh("fit_nolambda"))) == 2);

  const auto a = fresh("fit_a"), b = fresh("fit_b");
  REQUIRE(run("fit " + common + " --lambda 0.05 --max-iter 200 --out " + q(a)) == 0);
  REQUIRE(run("fit " + common + " --lambda 0.05 --max-iter 200 --out " + q(b)) == 0);
  CHECK(slurp(a / "beta.csv") == slurp(b / "beta.csv"));
  CHECK(slurp(a / "trace.csv") == slurp(b / "trace.csv"));
  CHECK(slurp(a / "metrics.json").find("prediction_error") != std::string::npos);

  const auto cd = fresh("fit_cd");
  CHECK(run("fit " + common + " --method heatflow_cd --lambda 0.05 --max-iter 200 --out " + q(cd)) == 0);
  CHECK(run("fit " + common + " --method heatflow_cd --exact --lambda 0.05 --out " + q(fresh("fit_bad"))) == 2);

  const auto gl = fresh("fit_gl");
  CHECK(run("fit " + common + " --method group_lasso --k 4 --lambda 0.05 --out " + q(gl)) == 0);
  CHECK(fs::exists(gl / "beta.csv"));

  const auto lasso = fresh("fit_lasso");
  CHECK(run("fit " + common + " --t 0 --exact --lambda 0.05 --max-iter 200 --out " + q(lasso)) == 0);
  CHECK(fs::exists(lasso / "metrics.json"));
}

TEST_CASE("graph estimation and cross-validation commands") {
  const auto data = fresh("cv_data");
  REQUIRE(run("simulate --n 80 --seed 6 --out " + q(data)) == 0);
  const auto g = fresh("cv_graph");
  REQUIRE(run("estimate-graph --data " + q(data / "data.csv") + " --out " + q(g)) == 0);
  CHECK(fs::exists(g / "graph.txt"));
  CHECK(fs::exists(g / "graph.json"));

  const auto cv = fresh("cv_run");
  REQUIRE(run("cv --data " + q(data / "data.csv") + " --meta " + q(data / "data.json") +
              " --lambda-count 3 --cv-folds 3 --max-iter 80 --t-grid 0,0.25 --out " + q(cv)) == 0);
  CHECK(fs::exists(cv / "cv.csv"));
  CHECK(fs::exists(cv / "best.json"));
}

TEST_CASE("experiment command is reproducible") {
  const auto a = fresh("exp_a"), b = fresh("exp_b");
  const std::string args = "experiment --n 60 --mc-runs 1 --cv-folds 3 --n-test 30 --max-iter 60 --B 30 "
                           "--methods heatflow_sd,group_lasso --seed 9 --out ";
  REQUIRE(run(args + q(a)) == 0);
  REQUIRE(run(args + q(b)) == 0);
  CHECK(slurp(a / "runs.csv") == slurp(b / "runs.csv"));
  CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
  CHECK(run("experiment --mc-runs 0 --out " + q(fresh("exp_bad"))) == 2);
}

TEST_CASE("unknown subcommands fail") {
  CHECK(run("frobnicate") != 0);
  CHECK(run("") != 0);
}
