#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "heatpen/baselines.hpp"
#include "heatpen/design.hpp"
#include "heatpen/optimize.hpp"

namespace heatpen {

enum class Method { heatflow_sd, heatflow_cd, group_lasso };
enum class TMode { fixed_heuristic, full_cv, both };

std::string to_string(Method m);
std::string to_string(TMode m);
Method parse_method(const std::string& name);
TMode parse_t_mode(const std::string& name);

struct ExperimentConfig {
  DesignSpec design;
  std::vector<Method> methods = {Method::group_lasso, Method::heatflow_sd, Method::heatflow_cd};
  std::size_t mc_runs = 10;
  std::size_t cv_folds = 5;
  TMode t_mode = TMode::fixed_heuristic;
  std::size_t n_test = 200;              // holdout rows drawn with each replication
  std::optional<std::size_t> k_oracle = 4;  // unset: count eigenvalues below k_auto_tol
  double k_auto_tol = 0.01;
  double graph_quantile = 0.75;
  std::size_t heat_lambda_count = 12;    // heat-flow lambda grid size
  double heat_lambda_ratio = 0.001;      // smallest / largest lambda in that grid
  std::size_t gl_lambda_count = 50;
  FitConfig fit;                         // lambda and t are set per cell
  std::uint64_t master_seed = 1;
  unsigned threads = 1;

  void validate() const;
};

/// One scored estimate from one replication.
struct ArmRecord {
  std::size_t run = 0;
  std::string arm;  // e.g. "heatflow_sd_tflow", "group_lasso"
  bool ok = false;
  std::string error;
  double lambda = 0.0;
  double t = 0.0;
  MetricsReport metrics;
  std::size_t iterations = 0;
};

struct RunDiagnostics {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double t_flow = 0.0;
  std::optional<double> lambda_g_hat;
  std::size_t graph_edges = 0;
  std::size_t graph_components = 0;
  double mean_walk_steps = 0.0;
  std::optional<double> clustering_accuracy;
  std::size_t k_used = 0;
  std::string error;  // set when the shared pipeline failed
};

struct MetricSummary {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

struct ArmSummary {
  std::string arm;
  std::size_t successes = 0;
  std::size_t failures = 0;
  MetricSummary prediction_error, estimation_error, sensitivity, specificity, clustering_accuracy;
};

struct ExperimentResult {
  std::vector<ArmRecord> records;  // ordered by run, then arm
  std::vector<RunDiagnostics> diagnostics;
  std::vector<ArmSummary> summary;
};

/// Per-run seed from the master seed and run index.
std::uint64_t run_seed(std::uint64_t master_seed, std::size_t run);

/// Generate, estimate the graph, simulate walks, fit every arm, score.
std::vector<ArmRecord> run_replication(const ExperimentConfig& cfg, std::size_t run,
                                       RunDiagnostics& diagnostics);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Mean and standard error per arm over the successful records.
std::vector<ArmSummary> summarize(const std::vector<ArmRecord>& records);

/// Writes runs.csv, diagnostics.csv, summary.csv (metrics x arms, "mean (se)")
/// and summary_long.csv.
void write_experiment(const ExperimentResult& result, const std::filesystem::path& out_dir);

}  // namespace heatpen
