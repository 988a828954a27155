#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "heatpen/baselines.hpp"
#include "heatpen/design.hpp"
#include "heatpen/errors.hpp"
#include "heatpen/experiment.hpp"
#include "heatpen/graph.hpp"
#include "heatpen/heatflow.hpp"
#include "heatpen/optimize.hpp"
#include "heatpen/penalty.hpp"
#include "heatpen/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace heatpen;

namespace {

constexpr int kExitValidation = 2;

struct DesignOptions {
  std::string design = "block";
  std::size_t n = 200;
  double sigma = 0.35;
  std::vector<std::size_t> sizes;
  std::vector<double> rhos;
  std::optional<double> within;
  std::optional<double> between;

  void add_to(CLI::App& app) {
    app.add_option("--design", design, "Covariate design")->check(CLI::IsMember({"block", "gff"}));
    app.add_option("--n", n, "Training rows");
    app.add_option("--sigma", sigma, "Noise standard deviation");
    app.add_option("--sizes", sizes, "Group sizes, comma separated (default 16,24,40,20)")->delimiter(',');
    app.add_option("--rhos", rhos, "Block equicorrelations, comma separated")->delimiter(',');
    app.add_option("--within", within, "Within-block edge probability (gff design)");
    app.add_option("--between", between, "Between-block edge probability (gff design)");
  }

  DesignSpec build() const {
    DesignSpec spec = design == "block" ? standard_block_design(n, sigma) : standard_gff_design(n, sigma);
    if (auto* b = std::get_if<BlockGaussian>(&spec.kind)) {
      if (!sizes.empty()) b->sizes = sizes;
      if (!rhos.empty()) b->rhos = rhos;
    } else {
      auto& g = std::get<GaussianFreeField>(spec.kind);
      if (!sizes.empty()) g.sizes = sizes;
      if (within) g.within = *within;
      if (between) g.between = *between;
    }
    if (!sizes.empty() && sizes.size() != spec.beta_rule.size()) {
      throw ValidationError("--sizes must list one size per coefficient group (" +
                            std::to_string(spec.beta_rule.size()) + ")");
    }
    spec.validate();
    return spec;
  }
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json metrics_json(const MetricsReport& m) {
  return json{{"prediction_error", opt_json(m.prediction_error)},
              {"test_mse", opt_json(m.test_mse)},
              {"estimation_error", opt_json(m.estimation_error)},
              {"sensitivity", opt_json(m.sensitivity)},
              {"specificity", opt_json(m.specificity)},
              {"clustering_accuracy", opt_json(m.clustering_accuracy)}};
}

Dataset load_data(const fs::path& csv, const std::optional<fs::path>& meta) {
  std::optional<fs::path> json_path = meta;
  if (!json_path) {
    fs::path guess = csv;
    guess.replace_extension(".json");
    if (fs::exists(guess)) json_path = guess;
  }
  return read_dataset(csv, json_path);
}

Graph load_or_estimate_graph(const std::optional<fs::path>& graph_path, const Dataset& data, double level) {
  if (graph_path) {
    std::ifstream in(*graph_path);
    if (!in) throw std::runtime_error("cannot read " + graph_path->string());
    Graph g = read_edge_list(in);
    if (g.size() != data.features()) {
      throw ValidationError("graph has " + std::to_string(g.size()) + " vertices but data has " +
                            std::to_string(data.features()) + " features");
    }
    return g;
  }
  return estimate_graph(correlation_from_covariance(rblw_shrinkage(data.X).covariance), level);
}

// Options shared by fit and cv.
struct FitOptions {
  fs::path data;
  std::optional<fs::path> meta;
  std::optional<fs::path> test;
  std::optional<fs::path> graph;
  fs::path out = "fit_out";
  std::string method = "heatflow_sd";
  std::optional<double> lambda;
  std::optional<double> t;
  bool t_heuristic = false;
  std::size_t walks = 500;
  bool exact = false;
  std::size_t max_iter = 3000;
  double eps = 1e-5;
  std::size_t block_size = 10;
  double ridge_lambda = 0.1;
  double lr_scale = 1.0;
  std::optional<std::size_t> k;
  double k_auto_tol = 0.01;
  double quantile = 0.75;
  bool cv = false;
  std::size_t cv_folds = 5;
  std::size_t lambda_count = 12;
  double lambda_ratio = 0.001;
  std::vector<double> t_grid;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void add_to(CLI::App& app, bool cv_command) {
    app.add_option("--data", data, "Dataset CSV")->required()->check(CLI::ExistingFile);
    app.add_option("--meta", meta, "Sidecar JSON (default: CSV path with .json)");
    app.add_option("--test", test, "Holdout dataset CSV for prediction metrics");
    app.add_option("--graph", graph, "Edge list; estimated from the data when omitted");
    app.add_option("--out", out, "Output directory");
    app.add_option("--method", method, "Estimator")
        ->check(CLI::IsMember({"heatflow_sd", "heatflow_cd", "group_lasso"}));
    app.add_option("--lambda", lambda, "Penalty weight");
    app.add_option("--t", t, "Heat-flow time");
    app.add_flag("--t-heuristic", t_heuristic, "Use t = 0.5 min(1, 1/lambda_g)");
    app.add_option("--B", walks, "Walks per vertex");
    app.add_flag("--exact", exact, "Exact heat kernel instead of random walks");
    app.add_option("--max-iter", max_iter, "Iteration cap");
    app.add_option("--eps", eps, "Relative-change stopping tolerance");
    app.add_option("--block-size", block_size, "Coordinates per block-CD step");
    app.add_option("--ridge-lambda", ridge_lambda, "Ridge weight of the starting point");
    app.add_option("--lr-scale", lr_scale, "Step size times the gram operator norm");
    app.add_option("--k", k, "Cluster count for group lasso (default: small-eigenvalue count)");
    app.add_option("--k-auto-tol", k_auto_tol, "Eigenvalue cutoff when --k is absent");
    app.add_option("--quantile", quantile, "Graph estimation quantile level");
    if (!cv_command) app.add_flag("--cv", cv, "Choose lambda by cross-validation");
    app.add_option("--cv-folds", cv_folds, "Cross-validation folds");
    app.add_option("--lambda-count", lambda_count, "Lambda grid size");
    app.add_option("--lambda-ratio", lambda_ratio, "Smallest over largest lambda");
    if (cv_command) app.add_option("--t-grid", t_grid, "Heat-flow times to cross-validate, comma separated")->delimiter(',');
    app.add_option("--seed", seed, "Seed");
    app.add_option("--threads", threads, "Worker threads");
  }
};

struct FitContext {
  Dataset data;
  std::optional<Dataset> test;
  Graph graph;
  std::shared_ptr<const LaplacianSpectrum> spec;
  double t_flow = 0.5;
  FitConfig cfg;
};

FitContext prepare(const FitOptions& o) {
  FitContext ctx;
  ctx.data = load_data(o.data, o.meta);
  if (o.test) {
    ctx.test = load_data(*o.test, std::nullopt);
    if (ctx.test->features() != ctx.data.features()) {
      throw ValidationError("test data has " + std::to_string(ctx.test->features()) + " features, expected " +
                            std::to_string(ctx.data.features()));
    }
    if (!ctx.test->beta_true) ctx.test->beta_true = ctx.data.beta_true;
  }
  ctx.graph = load_or_estimate_graph(o.graph, ctx.data, o.quantile);
  ctx.spec = std::make_shared<const LaplacianSpectrum>(spectrum(laplacian(ctx.graph)));
  ctx.t_flow = t_flow_heuristic(*ctx.spec);

  FitConfig& cfg = ctx.cfg;
  cfg.walks = o.walks;
  cfg.max_iter = o.max_iter;
  cfg.eps = o.eps;
  cfg.block_size = std::min(o.block_size, ctx.data.features());
  cfg.ridge_lambda = o.ridge_lambda;
  cfg.lr.auto_scale = o.lr_scale;
  cfg.seed = derive_seed(o.seed, "optimizer");
  if (o.t && o.t_heuristic) throw ValidationError("--t and --t-heuristic are mutually exclusive");
  cfg.t = o.t ? *o.t : ctx.t_flow;
  if (o.exact && o.method == "heatflow_cd") throw ValidationError("--exact supports heatflow_sd only");
  return ctx;
}

EvaluatorFactory make_factory(const FitOptions& o, const FitContext& ctx) {
  if (o.exact) {
    return [spec = ctx.spec](double t) { return PenaltyEvaluator::exact(spec, t); };
  }
  auto cache = std::make_shared<std::map<double, std::shared_ptr<const HeatFlowMatrix>>>();
  const Graph* g = &ctx.graph;
  const std::uint64_t walk_seed = derive_seed(o.seed, "walks");
  const std::size_t walks = o.walks;
  const unsigned threads = o.threads;
  return [cache, g, walk_seed, walks, threads](double t) {
    auto it = cache->find(t);
    if (it == cache->end()) {
      auto h = std::make_shared<const HeatFlowMatrix>(
          simulate_heat_flow(*g, t, walks, derive_seed(walk_seed, cache->size()), threads));
      it = cache->emplace(t, std::move(h)).first;
    }
    return PenaltyEvaluator::monte_carlo(it->second);
  };
}

Optimizer optimizer_for(const std::string& method) {
  return method == "heatflow_cd" ? Optimizer::block_cd : Optimizer::subgradient;
}

void write_cv_table(const fs::path& path, const CvResult& cv) {
  auto out = open_out(path);
  out << "lambda,t,mean_mse,std_error\n";
  for (const auto& cell : cv.table) {
    out << cell.point.lambda << ',' << cell.point.t << ',' << cell.mean_mse << ',' << cell.std_error << '\n';
  }
}

MetricsReport evaluate(const Eigen::VectorXd& beta, const FitContext& ctx) {
  return score(beta, ctx.test ? *ctx.test : ctx.data);
}

int run_simulate(const DesignOptions& d, std::size_t n_test, std::uint64_t seed, const fs::path& out_dir) {
  DesignSpec spec = d.build();
  spec.seed = seed;
  spec.n += n_test;
  Rng rng = make_rng(derive_seed(seed, "design"));
  json meta{{"design", d.design}, {"seed", seed}, {"n", spec.n}, {"sizes", spec.sizes()}};
  Dataset data;
  if (std::holds_alternative<GaussianFreeField>(spec.kind)) {
    GffSample s = gff_sample(spec, rng);
    data = std::move(s.data);
    meta["mass"] = s.mass;
    auto g = open_out(out_dir / "graph.txt");
    write_edge_list(g, s.graph);
  } else {
    data = sample_design(spec, rng);
    meta["rhos"] = std::get<BlockGaussian>(spec.kind).rhos;
  }
  fs::create_directories(out_dir);
  auto [train, test] = split_rows(data, d.n);
  meta["n"] = d.n;
  write_dataset(train, out_dir / "data.csv", out_dir / "data.json", meta.dump());
  std::cout << "wrote " << (out_dir / "data.csv").string() << " (" << train.samples() << " x "
            << train.features() << ")\n";
  if (n_test > 0) {
    meta["n"] = n_test;
    write_dataset(test, out_dir / "test.csv", out_dir / "test.json", meta.dump());
    std::cout << "wrote " << (out_dir / "test.csv").string() << " (" << test.samples() << " x "
              << test.features() << ")\n";
  }
  return 0;
}

int run_estimate_graph(const fs::path& data_path, const std::optional<fs::path>& meta, double level,
                       std::optional<std::size_t> k_index, const fs::path& out_dir) {
  const Dataset data = load_data(data_path, meta);
  const ShrinkageEstimate shrink = rblw_shrinkage(data.X);
  const Graph g = estimate_graph(correlation_from_covariance(shrink.covariance), level);
  const LaplacianSpectrum spec = spectrum(laplacian(g));
  const SpectralGap gap = spectral_gap(spec, default_zero_tol(spec));
  {
    auto out = open_out(out_dir / "graph.txt");
    write_edge_list(out, g);
  }
  std::vector<double> eig(spec.eigenvalues.data(), spec.eigenvalues.data() + spec.eigenvalues.size());
  write_json(out_dir / "graph.json", json{{"vertices", g.size()},
                                          {"edges", g.edge_count()},
                                          {"quantile", level},
                                          {"shrinkage_weight", shrink.weight},
                                          {"components", gap.components},
                                          {"lambda_g", opt_json(gap.lambda_g)},
                                          {"t_flow", t_flow_heuristic(spec, k_index)},
                                          {"eigenvalues", eig}});
  std::cout << "graph: " << g.size() << " vertices, " << g.edge_count() << " edges, " << gap.components
            << " components\n";
  return 0;
}

int run_fit(FitOptions o) {
  FitContext ctx = prepare(o);
  const fs::path out_dir = o.out;
  fs::create_directories(out_dir);
  json info{{"method", o.method}, {"seed", o.seed}, {"t_flow", ctx.t_flow}};

  if (o.method == "group_lasso") {
    const std::size_t k = o.k ? *o.k : count_small_eigenvalues(*ctx.spec, o.k_auto_tol);
    Rng rng = make_rng(derive_seed(o.seed, "clustering"));
    const GroupStructure groups = spectral_clustering(*ctx.spec, k, rng);
    Eigen::VectorXd beta;
    double lambda = 0.0;
    std::vector<double> trace;
    if (o.cv) {
      const GroupLassoCv cv = group_lasso_cv(ctx.data, groups, o.cv_folds, derive_seed(o.seed, "gl-cv"));
      beta = cv.beta;
      lambda = cv.best_lambda;
      auto out = open_out(out_dir / "cv.csv");
      out << "lambda,mean_mse\n";
      for (std::size_t i = 0; i < cv.lambdas.size(); ++i) out << cv.lambdas[i] << ',' << cv.mean_mse[i] << '\n';
    } else {
      if (!o.lambda) throw ValidationError("--lambda is required unless --cv is given");
      lambda = *o.lambda;
      const GroupLassoFit fit = group_lasso_fit(ctx.data, groups, lambda);
      beta = fit.beta;
      trace = fit.trace;
    }
    MetricsReport m = evaluate(beta, ctx);
    if (ctx.data.groups_true) m.clustering_accuracy = clustering_accuracy(ctx.data.groups_true->labels(), groups.labels());
    {
      auto out = open_out(out_dir / "beta.csv");
      out << "index,beta_raw,beta\n";
      for (Eigen::Index j = 0; j < beta.size(); ++j) out << j << ',' << beta(j) << ',' << beta(j) << '\n';
    }
    {
      auto out = open_out(out_dir / "trace.csv");
      out << "iteration,objective\n";
      for (std::size_t i = 0; i < trace.size(); ++i) out << i + 1 << ',' << trace[i] << '\n';
    }
    info["lambda"] = lambda;
    info["k"] = k;
    info["group_labels"] = groups.labels();
    info["metrics"] = metrics_json(m);
    write_json(out_dir / "metrics.json", info);
    std::cout << "group lasso: lambda " << lambda << ", " << (beta.array() != 0.0).count() << " nonzero\n";
    return 0;
  }

  const Optimizer optimizer = optimizer_for(o.method);
  const EvaluatorFactory factory = make_factory(o, ctx);
  FitConfig cfg = ctx.cfg;
  if (o.cv) {
    const double lmax = heat_lambda_max(ctx.data);
    std::vector<GridPoint> grid;
    for (double l : log_grid(lmax, lmax * o.lambda_ratio, o.lambda_count)) grid.push_back({l, cfg.t});
    const CvResult cv = cross_validate(ctx.data, factory, grid, o.cv_folds, cfg, optimizer, o.threads);
    write_cv_table(out_dir / "cv.csv", cv);
    cfg.lambda = cv.best.lambda;
  } else {
    if (!o.lambda) throw ValidationError("--lambda is required unless --cv is given");
    cfg.lambda = *o.lambda;
  }
  cfg.validate();
  const PenaltyEvaluator ev = factory(cfg.t);
  const FitResult fit = fit_heat_flow(ctx.data, ev, cfg, optimizer);
  {
    auto out = open_out(out_dir / "beta.csv");
    out << "index,beta_raw,beta\n";
    for (Eigen::Index j = 0; j < fit.beta.size(); ++j) out << j << ',' << fit.beta_raw(j) << ',' << fit.beta(j) << '\n';
  }
  {
    auto out = open_out(out_dir / "trace.csv");
    out << "iteration,objective\n";
    for (std::size_t i = 0; i < fit.trace.size(); ++i) out << i + 1 << ',' << fit.trace[i] << '\n';
  }
  info["lambda"] = cfg.lambda;
  info["t"] = cfg.t;
  info["walks"] = o.exact ? json(nullptr) : json(cfg.walks);
  info["exact"] = o.exact;
  info["iterations"] = fit.iterations;
  info["converged"] = fit.converged;
  info["initial_objective"] = fit.initial_objective;
  info["best_objective"] = fit.best_objective;
  info["step_base"] = fit.step_base;
  if (ev.heat_flow()) info["mean_walk_steps"] = ev.heat_flow()->mean_steps();
  info["metrics"] = metrics_json(evaluate(fit.beta, ctx));
  info["metrics_raw"] = metrics_json(evaluate(fit.beta_raw, ctx));
  write_json(out_dir / "metrics.json", info);
  std::cout << o.method << ": lambda " << cfg.lambda << ", t " << cfg.t << ", " << fit.iterations
            << " iterations, " << (fit.beta.array() != 0.0).count() << " nonzero\n";
  return 0;
}

int run_cv(FitOptions o) {
  if (o.method == "group_lasso") {
    o.cv = true;
    return run_fit(o);
  }
  FitContext ctx = prepare(o);
  fs::create_directories(o.out);
  std::vector<double> ts = o.t_grid;
  if (ts.empty()) ts = {ctx.cfg.t};
  const double lmax = heat_lambda_max(ctx.data);
  std::vector<GridPoint> grid;
  for (double t : ts)
    for (double l : log_grid(lmax, lmax * o.lambda_ratio, o.lambda_count)) grid.push_back({l, t});
  const CvResult cv = cross_validate(ctx.data, make_factory(o, ctx), grid, o.cv_folds, ctx.cfg,
                                     optimizer_for(o.method), o.threads);
  write_cv_table(o.out / "cv.csv", cv);
  write_json(o.out / "best.json", json{{"method", o.method},
                                       {"lambda", cv.best.lambda},
                                       {"t", cv.best.t},
                                       {"t_flow", ctx.t_flow},
                                       {"folds", o.cv_folds},
                                       {"seed", o.seed}});
  std::cout << "best lambda " << cv.best.lambda << ", t " << cv.best.t << '\n';
  return 0;
}

struct ExperimentOptions {
  std::size_t mc_runs = 10;
  std::size_t cv_folds = 5;
  std::optional<std::size_t> k = 4;
  bool k_auto = false;
  double k_auto_tol = 0.01;
  std::string t_mode = "fixed_heuristic";
  std::vector<std::string> methods = {"group_lasso", "heatflow_sd", "heatflow_cd"};
  std::size_t walks = 500;
  std::size_t n_test = 200;
  std::size_t max_iter = 3000;
  double eps = 1e-5;
  std::size_t block_size = 10;
  double lr_scale = 1.0;
};

int run_experiment_cmd(const DesignOptions& d, const ExperimentOptions& e, std::uint64_t seed, unsigned threads,
                       const fs::path& out_dir) {
  ExperimentConfig cfg;
  cfg.design = d.build();
  cfg.mc_runs = e.mc_runs;
  cfg.cv_folds = e.cv_folds;
  cfg.k_oracle = e.k_auto ? std::nullopt : e.k;
  cfg.k_auto_tol = e.k_auto_tol;
  cfg.t_mode = parse_t_mode(e.t_mode);
  cfg.methods.clear();
  for (const auto& m : e.methods) cfg.methods.push_back(parse_method(m));
  cfg.n_test = e.n_test;
  cfg.fit.walks = e.walks;
  cfg.fit.max_iter = e.max_iter;
  cfg.fit.eps = e.eps;
  cfg.fit.block_size = e.block_size;
  cfg.fit.lr.auto_scale = e.lr_scale;
  cfg.master_seed = seed;
  cfg.threads = threads;
  const ExperimentResult res = run_experiment(cfg);
  write_experiment(res, out_dir);
  for (const auto& s : res.summary) {
    std::cout << std::left << std::setw(22) << s.arm << std::fixed << std::setprecision(3)
              << " pred " << s.prediction_error.mean << "  est " << s.estimation_error.mean << "  sens "
              << s.sensitivity.mean << "  spec " << s.specificity.mean << "  ok " << s.successes << '/'
              << s.successes + s.failures << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat-flow penalized regression under latent group structure"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  unsigned threads = 1;
  fs::path out = "out";

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  DesignOptions sim_design;
  sim_design.add_to(*sim);
  std::size_t sim_n_test = 0;
  sim->add_option("--n-test", sim_n_test, "Holdout rows written to test.csv with the same coefficients");
  sim->add_option("--seed", seed, "Seed");
  sim->add_option("--out", out, "Output directory");

  auto* eg = app.add_subcommand("estimate-graph", "Estimate the covariate graph from data");
  fs::path eg_data;
  std::optional<fs::path> eg_meta;
  double eg_level = 0.75;
  std::optional<std::size_t> eg_index;
  eg->add_option("--data", eg_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  eg->add_option("--meta", eg_meta, "Sidecar JSON");
  eg->add_option("--quantile", eg_level, "Quantile level of |R| above which pairs are joined");
  eg->add_option("--gap-index", eg_index, "0-based eigenvalue index used as the spectral gap");
  eg->add_option("--out", out, "Output directory");
  eg->add_option("--seed", seed, "Unused; accepted for uniformity");
  eg->add_option("--threads", threads, "Unused; accepted for uniformity");

  auto* fit = app.add_subcommand("fit", "Fit one estimator");
  FitOptions fit_opts;
  fit_opts.add_to(*fit, false);

  auto* cv = app.add_subcommand("cv", "Cross-validate lambda (and t) for one estimator");
  FitOptions cv_opts;
  cv_opts.add_to(*cv, true);
  cv_opts.out = "cv_out";

  auto* exp = app.add_subcommand("experiment", "Monte Carlo replication of the simulation study");
  DesignOptions exp_design;
  ExperimentOptions exp_opts;
  exp_design.add_to(*exp);
  exp->add_option("--mc-runs", exp_opts.mc_runs, "Replications");
  exp->add_option("--cv-folds", exp_opts.cv_folds, "Cross-validation folds");
  exp->add_option("--k", exp_opts.k, "Oracle cluster count for the group lasso arm");
  exp->add_flag("--k-auto", exp_opts.k_auto, "Count eigenvalues below --k-auto-tol instead of --k");
  exp->add_option("--k-auto-tol", exp_opts.k_auto_tol, "Eigenvalue cutoff for --k-auto");
  exp->add_option("--t-mode", exp_opts.t_mode, "Heat-flow time selection")
      ->check(CLI::IsMember({"fixed_heuristic", "full_cv", "both"}));
  exp->add_option("--methods", exp_opts.methods, "Arms to run")
      ->delimiter(',')
      ->check(CLI::IsMember({"heatflow_sd", "heatflow_cd", "group_lasso"}));
  exp->add_option("--B", exp_opts.walks, "Walks per vertex");
  exp->add_option("--n-test", exp_opts.n_test, "Holdout rows per replication");
  exp->add_option("--max-iter", exp_opts.max_iter, "Iteration cap");
  exp->add_option("--eps", exp_opts.eps, "Relative-change stopping tolerance");
  exp->add_option("--block-size", exp_opts.block_size, "Coordinates per block-CD step");
  exp->add_option("--lr-scale", exp_opts.lr_scale, "Step size times the gram operator norm");
  exp->add_option("--seed", seed, "Master seed");
  exp->add_option("--threads", threads, "Worker threads");
  exp->add_option("--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*sim) return run_simulate(sim_design, sim_n_test, seed, out);
    if (*eg) return run_estimate_graph(eg_data, eg_meta, eg_level, eg_index, out);
    if (*fit) return run_fit(fit_opts);
    if (*cv) return run_cv(cv_opts);
    if (*exp) return run_experiment_cmd(exp_design, exp_opts, seed, threads, out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
