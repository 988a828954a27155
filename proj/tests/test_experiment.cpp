#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "heatpen/errors.hpp"
#include "heatpen/experiment.hpp"

using namespace heatpen;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.design = standard_block_design(80);
  cfg.mc_runs = 2;
  cfg.cv_folds = 3;
  cfg.n_test = 40;
  cfg.heat_lambda_count = 3;
  cfg.gl_lambda_count = 8;
  cfg.fit.max_iter = 60;
  cfg.fit.walks = 40;
  cfg.master_seed = 11;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_metric(const std::optional<double>& a, const std::optional<double>& b) {
  return a.has_value() == b.has_value() && (!a || *a == *b);
}

}  // namespace

TEST_CASE("run seeds are distinct and reproducible") {
  std::set<std::uint64_t> seen;
  for (std::size_t r = 0; r < 100; ++r) seen.insert(run_seed(1, r));
  CHECK(seen.size() == 100);
  CHECK(run_seed(1, 3) == run_seed(1, 3));
  CHECK(run_seed(1, 3) != run_seed(2, 3));
}

TEST_CASE("names round trip") {
  for (Method m : {Method::heatflow_sd, Method::heatflow_cd, Method::group_lasso}) CHECK(parse_method(to_string(m)) == m);
  for (TMode m : {TMode::fixed_heuristic, TMode::full_cv, TMode::both}) CHECK(parse_t_mode(to_string(m)) == m);
  CHECK(parse_method("gl") == Method::group_lasso);
  CHECK_THROWS_AS(parse_method("lasso"), ValidationError);
  CHECK_THROWS_AS(parse_t_mode("sometimes"), ValidationError);
}

TEST_CASE("experiment config validation") {
  CHECK_NOTHROW(small_config().validate());
  auto bad = small_config();
  bad.mc_runs = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = small_config();
  bad.k_oracle = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = small_config();
  bad.graph_quantile = 1.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = small_config();
  bad.heat_lambda_ratio = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = small_config();
  bad.methods.clear();
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("small experiment is deterministic across thread counts") {
  const auto cfg = small_config();
  const auto a = run_experiment(cfg);
  auto threaded = cfg;
  threaded.threads = 3;
  const auto b = run_experiment(threaded);

  // group_lasso, heatflow_sd_tflow, heatflow_cd_tflow per run.
  REQUIRE(a.records.size() == 6);
  REQUIRE(b.records.size() == a.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].arm == b.records[i].arm);
    CHECK(a.records[i].run == i / 3);
    CHECK(a.records[i].ok == b.records[i].ok);
    CHECK(a.records[i].lambda == b.records[i].lambda);
    CHECK(a.records[i].t == b.records[i].t);
    CHECK(same_metric(a.records[i].metrics.prediction_error, b.records[i].metrics.prediction_error));
    CHECK(same_metric(a.records[i].metrics.specificity, b.records[i].metrics.specificity));
  }
  for (const auto& r : a.records) {
    CHECK(r.ok);
    REQUIRE(r.metrics.prediction_error);
    CHECK(std::isfinite(*r.metrics.prediction_error));
    CHECK(*r.metrics.sensitivity >= 0.0);
    CHECK(*r.metrics.sensitivity <= 1.0);
  }
  REQUIRE(a.diagnostics.size() == 2);
  for (const auto& d : a.diagnostics) {
    CHECK(d.error.empty());
    CHECK(d.t_flow > 0.0);
    CHECK(d.t_flow <= 0.5);
    CHECK(d.k_used == 4);
  }
  CHECK(a.diagnostics[0].seed != a.diagnostics[1].seed);
}

TEST_CASE("summary agrees with the records") {
  auto cfg = small_config();
  cfg.methods = {Method::heatflow_sd};
  cfg.t_mode = TMode::both;
  const auto res = run_experiment(cfg);
  REQUIRE(res.records.size() == 4);
  const auto summary = summarize(res.records);
  REQUIRE(summary.size() == 2);
  for (const auto& s : summary) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& r : res.records) {
      if (r.arm == s.arm && r.ok) {
        sum += *r.metrics.prediction_error;
        ++count;
      }
    }
    CHECK(s.successes == count);
    CHECK(s.prediction_error.count == count);
    CHECK(s.prediction_error.mean == doctest::Approx(sum / static_cast<double>(count)));
  }
  const std::set<std::string> arms{summary[0].arm, summary[1].arm};
  CHECK(arms == std::set<std::string>{"heatflow_sd_tflow", "heatflow_sd_fullcv"});
}

TEST_CASE("summary statistics") {
  std::vector<ArmRecord> recs(3);
  const double pe[3] = {1.0, 2.0, 4.0};
  for (int i = 0; i < 3; ++i) {
    recs[i].arm = "x";
    recs[i].ok = i < 2;
    recs[i].metrics.prediction_error = pe[i];
  }
  const auto s = summarize(recs);
  REQUIRE(s.size() == 1);
  CHECK(s[0].successes == 2);
  CHECK(s[0].failures == 1);
  CHECK(s[0].prediction_error.mean == doctest::Approx(1.5));
  CHECK(s[0].prediction_error.std_error == doctest::Approx(0.5));
  CHECK(s[0].specificity.count == 0);
}

TEST_CASE("experiment output files") {
  auto cfg = small_config();
  cfg.mc_runs = 1;
  cfg.methods = {Method::group_lasso};
  const auto res = run_experiment(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "heatpen_test_experiment";
  std::filesystem::remove_all(dir);
  write_experiment(res, dir);
  for (const char* name : {"runs.csv", "diagnostics.csv", "summary.csv", "summary_long.csv"}) {
    CHECK(std::filesystem::exists(dir / name));
    CHECK_FALSE(slurp(dir / name).empty());
  }
  CHECK(slurp(dir / "runs.csv").find("group_lasso") != std::string::npos);
  std::filesystem::remove_all(dir);
}
