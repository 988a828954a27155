#include "heatpen/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

#include "heatpen/errors.hpp"
#include "heatpen/heatflow.hpp"
#include "heatpen/parallel.hpp"

namespace heatpen {

std::string to_string(Method m) {
  switch (m) {
    case Method::heatflow_sd: return "heatflow_sd";
    case Method::heatflow_cd: return "heatflow_cd";
    case Method::group_lasso: return "group_lasso";
  }
  return "unknown";
}

std::string to_string(TMode m) {
  switch (m) {
    case TMode::fixed_heuristic: return "fixed_heuristic";
    case TMode::full_cv: return "full_cv";
    case TMode::both: return "both";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "heatflow_sd" || name == "sd") return Method::heatflow_sd;
  if (name == "heatflow_cd" || name == "cd") return Method::heatflow_cd;
  if (name == "group_lasso" || name == "gl") return Method::group_lasso;
  throw ValidationError("unknown method '" + name + "'");
}

TMode parse_t_mode(const std::string& name) {
  if (name == "fixed_heuristic" || name == "fixed") return TMode::fixed_heuristic;
  if (name == "full_cv") return TMode::full_cv;
  if (name == "both") return TMode::both;
  throw ValidationError("unknown t mode '" + name + "'");
}

void ExperimentConfig::validate() const {
  design.validate();
  if (mc_runs == 0) throw ValidationError("experiment: mc_runs must be >= 1");
  if (methods.empty()) throw ValidationError("experiment: no methods selected");
  if (cv_folds < 2) throw ValidationError("experiment: need at least two CV folds");
  if (heat_lambda_count == 0 || gl_lambda_count == 0) throw ValidationError("experiment: empty lambda grid");
  if (!(heat_lambda_ratio > 0.0 && heat_lambda_ratio <= 1.0)) {
    throw ValidationError("experiment: heat lambda ratio must lie in (0, 1]");
  }
  if (k_oracle && (*k_oracle == 0 || *k_oracle > design.features())) {
    throw ValidationError("experiment: k must lie in [1, p]");
  }
  if (!(graph_quantile >= 0.0 && graph_quantile <= 1.0)) {
    throw ValidationError("experiment: graph quantile must lie in [0, 1]");
  }
  fit.validate();
}

std::uint64_t run_seed(std::uint64_t master_seed, std::size_t run) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(run));
}

namespace {

// Walk tables keyed by flow time, built on first use.
class HeatFlowCache {
 public:
  HeatFlowCache(const Graph& g, std::size_t walks, std::uint64_t seed) : g_(g), walks_(walks), seed_(seed) {}

  std::shared_ptr<const HeatFlowMatrix> get(double t) {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(t);
    if (it != cache_.end()) return it->second;
    auto h = std::make_shared<const HeatFlowMatrix>(
        simulate_heat_flow(g_, t, walks_, derive_seed(seed_, cache_.size())));
    cache_.emplace(t, h);
    return h;
  }

 private:
  const Graph& g_;
  std::size_t walks_;
  std::uint64_t seed_;
  std::mutex mutex_;
  std::map<double, std::shared_ptr<const HeatFlowMatrix>> cache_;
};

ArmRecord run_heat_arm(const std::string& arm, std::size_t run, const Dataset& train, const Dataset& test,
                       HeatFlowCache& cache, std::span<const GridPoint> grid, const ExperimentConfig& cfg,
                       Optimizer optimizer, std::uint64_t seed) {
  ArmRecord rec;
  rec.run = run;
  rec.arm = arm;
  try {
    FitConfig fit = cfg.fit;
    fit.seed = seed;
    const std::size_t p = train.features();
    fit.block_size = std::min(fit.block_size, p);
    if (optimizer == Optimizer::block_cd) {
      // Same number of coordinate updates as the full-gradient budget.
      fit.max_iter = fit.max_iter * ((p + fit.block_size - 1) / fit.block_size);
    }
    auto factory = [&](double t) { return PenaltyEvaluator::monte_carlo(cache.get(t)); };
    const CvResult cv = cross_validate(train, factory, grid, cfg.cv_folds, fit, optimizer);
    fit.lambda = cv.best.lambda;
    fit.t = cv.best.t;
    const FitResult result = fit_heat_flow(train, factory(cv.best.t), fit, optimizer);
    rec.lambda = fit.lambda;
    rec.t = fit.t;
    rec.iterations = result.iterations;
    rec.metrics = score(result.beta, test);
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

}  // namespace

std::vector<ArmRecord> run_replication(const ExperimentConfig& cfg, std::size_t run,
                                       RunDiagnostics& diag) {
  const std::uint64_t seed = run_seed(cfg.master_seed, run);
  diag = RunDiagnostics{};
  diag.run = run;
  diag.seed = seed;

  DesignSpec spec = cfg.design;
  spec.n = cfg.design.n + cfg.n_test;
  spec.seed = seed;
  Rng design_rng = make_rng(derive_seed(seed, "design"));
  const Dataset full = sample_design(spec, design_rng);
  auto [train, test] = split_rows(full, cfg.design.n);

  const Eigen::MatrixXd corr = correlation_from_covariance(rblw_shrinkage(train.X).covariance);
  const Graph graph = estimate_graph(corr, cfg.graph_quantile);
  const LaplacianSpectrum spec_hat = spectrum(laplacian(graph));
  const SpectralGap gap = spectral_gap(spec_hat, default_zero_tol(spec_hat));
  diag.graph_edges = graph.edge_count();
  diag.graph_components = gap.components;
  diag.lambda_g_hat = gap.lambda_g;
  diag.t_flow = t_flow_heuristic(gap.lambda_g);

  std::vector<ArmRecord> records;
  const bool want_sd = std::find(cfg.methods.begin(), cfg.methods.end(), Method::heatflow_sd) != cfg.methods.end();
  const bool want_cd = std::find(cfg.methods.begin(), cfg.methods.end(), Method::heatflow_cd) != cfg.methods.end();
  const bool want_gl = std::find(cfg.methods.begin(), cfg.methods.end(), Method::group_lasso) != cfg.methods.end();

  if (want_gl) {
    ArmRecord rec;
    rec.run = run;
    rec.arm = "group_lasso";
    try {
      const std::size_t k = cfg.k_oracle ? *cfg.k_oracle : count_small_eigenvalues(spec_hat, cfg.k_auto_tol);
      diag.k_used = k;
      Rng cluster_rng = make_rng(derive_seed(seed, "clustering"));
      const GroupStructure groups = spectral_clustering(spec_hat, k, cluster_rng);
      if (train.groups_true) {
        diag.clustering_accuracy = clustering_accuracy(train.groups_true->labels(), groups.labels());
      }
      const GroupLassoCv cv = group_lasso_cv(train, groups, cfg.cv_folds, derive_seed(seed, "gl-cv"),
                                             cfg.gl_lambda_count);
      rec.lambda = cv.best_lambda;
      rec.metrics = score(cv.beta, test);
      rec.metrics.clustering_accuracy = diag.clustering_accuracy;
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    records.push_back(std::move(rec));
  }

  if (want_sd || want_cd) {
    HeatFlowCache cache(graph, cfg.fit.walks, derive_seed(seed, "walks"));
    diag.mean_walk_steps = cache.get(diag.t_flow)->mean_steps();
    const double lambda_max = heat_lambda_max(train);
    const auto lambdas = log_grid(lambda_max, lambda_max * cfg.heat_lambda_ratio, cfg.heat_lambda_count);

    std::vector<GridPoint> fixed_grid, full_grid;
    for (double l : lambdas) fixed_grid.push_back({l, diag.t_flow});
    for (double t : {0.0, diag.t_flow, 2.0 * diag.t_flow})
      for (double l : lambdas) full_grid.push_back({l, t});

    const bool fixed = cfg.t_mode != TMode::full_cv;
    const bool full = cfg.t_mode != TMode::fixed_heuristic;
    for (const auto& [wanted, name, optimizer] :
         {std::tuple{want_sd, std::string("heatflow_sd"), Optimizer::subgradient},
          std::tuple{want_cd, std::string("heatflow_cd"), Optimizer::block_cd}}) {
      if (!wanted) continue;
      if (fixed) {
        records.push_back(run_heat_arm(name + "_tflow", run, train, test, cache, fixed_grid, cfg, optimizer,
                                       derive_seed(seed, name + "_tflow")));
      }
      if (full) {
        records.push_back(run_heat_arm(name + "_fullcv", run, train, test, cache, full_grid, cfg, optimizer,
                                       derive_seed(seed, name + "_fullcv")));
      }
    }
  }
  return records;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<ArmRecord>> per_run(cfg.mc_runs);
  std::vector<RunDiagnostics> diags(cfg.mc_runs);
  parallel_for(cfg.mc_runs, cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      try {
        per_run[r] = run_replication(cfg, r, diags[r]);
      } catch (const std::exception& e) {
        diags[r].run = r;
        diags[r].seed = run_seed(cfg.master_seed, r);
        diags[r].error = e.what();
        for (Method m : cfg.methods) {
          ArmRecord rec;
          rec.run = r;
          rec.arm = to_string(m);
          rec.error = e.what();
          per_run[r].push_back(std::move(rec));
        }
      }
    }
  });
  ExperimentResult result;
  for (auto& recs : per_run) {
    for (auto& rec : recs) result.records.push_back(std::move(rec));
  }
  result.diagnostics = std::move(diags);
  result.summary = summarize(result.records);
  return result;
}

std::vector<ArmSummary> summarize(const std::vector<ArmRecord>& records) {
  std::vector<ArmSummary> out;
  auto find_arm = [&](const std::string& arm) -> ArmSummary& {
    for (auto& s : out) {
      if (s.arm == arm) return s;
    }
    out.push_back(ArmSummary{});
    out.back().arm = arm;
    return out.back();
  };
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  for (const auto& rec : records) {
    ArmSummary& s = find_arm(rec.arm);
    if (!rec.ok) {
      ++s.failures;
      continue;
    }
    ++s.successes;
    auto push = [&](const char* key, const std::optional<double>& v) {
      if (v) values[rec.arm][key].push_back(*v);
    };
    push("prediction_error", rec.metrics.prediction_error);
    push("estimation_error", rec.metrics.estimation_error);
    push("sensitivity", rec.metrics.sensitivity);
    push("specificity", rec.metrics.specificity);
    push("clustering_accuracy", rec.metrics.clustering_accuracy);
  }
  auto stats = [](const std::vector<double>& v) {
    MetricSummary m;
    m.count = v.size();
    if (v.empty()) return m;
    double sum = 0.0;
    for (double x : v) sum += x;
    m.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - m.mean) * (x - m.mean);
      m.std_error = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
    }
    return m;
  };
  for (auto& s : out) {
    auto& v = values[s.arm];
    s.prediction_error = stats(v["prediction_error"]);
    s.estimation_error = stats(v["estimation_error"]);
    s.sensitivity = stats(v["sensitivity"]);
    s.specificity = stats(v["specificity"]);
    s.clustering_accuracy = stats(v["clustering_accuracy"]);
  }
  return out;
}

namespace {

std::string opt_str(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::setprecision(17) << *v;
  return os.str();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

}  // namespace

void write_experiment(const ExperimentResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    auto out = open_out(out_dir / "runs.csv");
    out << "run,arm,ok,lambda,t,iterations,prediction_error,estimation_error,sensitivity,specificity,"
           "clustering_accuracy,test_mse,error\n";
    for (const auto& r : result.records) {
      out << r.run << ',' << r.arm << ',' << (r.ok ? 1 : 0) << ',' << r.lambda << ',' << r.t << ','
          << r.iterations << ',' << opt_str(r.metrics.prediction_error) << ','
          << opt_str(r.metrics.estimation_error) << ',' << opt_str(r.metrics.sensitivity) << ','
          << opt_str(r.metrics.specificity) << ',' << opt_str(r.metrics.clustering_accuracy) << ','
          << opt_str(r.metrics.test_mse) << ',' << csv_escape(r.error) << '\n';
    }
  }
  {
    auto out = open_out(out_dir / "diagnostics.csv");
    out << "run,seed,t_flow,lambda_g_hat,graph_edges,graph_components,mean_walk_steps,clustering_accuracy,"
           "k_used,error\n";
    for (const auto& d : result.diagnostics) {
      out << d.run << ',' << d.seed << ',' << d.t_flow << ',' << opt_str(d.lambda_g_hat) << ','
          << d.graph_edges << ',' << d.graph_components << ',' << d.mean_walk_steps << ','
          << opt_str(d.clustering_accuracy) << ',' << d.k_used << ',' << csv_escape(d.error) << '\n';
    }
  }
  {
    auto out = open_out(out_dir / "summary.csv");
    out << "metric";
    for (const auto& s : result.summary) out << ',' << s.arm;
    out << '\n';
    auto row = [&](const char* name, MetricSummary ArmSummary::*field) {
      out << name;
      for (const auto& s : result.summary) {
        const MetricSummary& m = s.*field;
        out << ',';
        if (m.count > 0) out << std::fixed << std::setprecision(4) << m.mean << " (" << m.std_error << ')';
      }
      out << std::defaultfloat << std::setprecision(17) << '\n';
    };
    row("prediction_error", &ArmSummary::prediction_error);
    row("estimation_error", &ArmSummary::estimation_error);
    row("sensitivity", &ArmSummary::sensitivity);
    row("specificity", &ArmSummary::specificity);
    out << "failures";
    for (const auto& s : result.summary) out << ',' << s.failures;
    out << '\n';
  }
  {
    auto out = open_out(out_dir / "summary_long.csv");
    out << "arm,metric,mean,std_error,count,failures\n";
    for (const auto& s : result.summary) {
      for (const auto& [name, m] :
           {std::pair{"prediction_error", s.prediction_error}, std::pair{"estimation_error", s.estimation_error},
            std::pair{"sensitivity", s.sensitivity}, std::pair{"specificity", s.specificity},
            std::pair{"clustering_accuracy", s.clustering_accuracy}}) {
        if (m.count == 0) continue;
        out << s.arm << ',' << name << ',' << m.mean << ',' << m.std_error << ',' << m.count << ','
            << s.failures << '\n';
      }
    }
  }
}

}  // namespace heatpen
