#include "heatpen/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "heatpen/errors.hpp"
#include "heatpen/parallel.hpp"
#include "heatpen/rng.hpp"

namespace heatpen {

double LearningRate::at(std::size_t iteration, double resolved_base) const noexcept {
  if (schedule == Schedule::constant) return resolved_base;
  return resolved_base / std::sqrt(static_cast<double>(std::max<std::size_t>(iteration, 1)));
}

void FitConfig::validate() const {
  if (!(lambda >= 0.0)) throw ValidationError("fit config: lambda must be >= 0");
  if (!(t >= 0.0)) throw ValidationError("fit config: t must be >= 0");
  if (walks == 0) throw ValidationError("fit config: B must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("fit config: eps must lie in (0, 1)");
  if (max_iter == 0) throw ValidationError("fit config: max_iter must be positive");
  if (block_size == 0) throw ValidationError("fit config: block size must be positive");
  if (!(ridge_lambda > 0.0)) throw ValidationError("fit config: ridge lambda must be positive");
  if (!(lr.auto_scale > 0.0)) throw ValidationError("fit config: learning-rate scale must be positive");
}

LeastSquares::LeastSquares(const Dataset& data) {
  data.validate();
  const double n = static_cast<double>(data.samples());
  if (n == 0) throw ValidationError("least squares: empty dataset");
  gram_ = data.X.transpose() * data.X / n;
  xty_ = data.X.transpose() * data.y / n;
  half_yty_ = 0.5 * data.y.squaredNorm() / n;
}

double LeastSquares::value(const Eigen::VectorXd& beta) const {
  return value(beta, gram_ * beta);
}

double LeastSquares::value(const Eigen::VectorXd& beta, const Eigen::VectorXd& gram_beta) const {
  // Clamp rounding below zero; the loss is a sum of squares.
  return std::max(0.0, 0.5 * beta.dot(gram_beta) - xty_.dot(beta) + half_yty_);
}

Eigen::VectorXd LeastSquares::gradient(const Eigen::VectorXd& beta) const {
  return gram_ * beta - xty_;
}

double LeastSquares::operator_norm_estimate() const {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(gram_.rows());
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < 20; ++it) {
    const Eigen::VectorXd w = gram_ * v;
    estimate = w.norm();
    if (estimate == 0.0) return 0.0;
    v = w / estimate;
  }
  return estimate;
}

namespace {

double resolve_step(const LeastSquares& loss, const LearningRate& lr) {
  if (lr.base > 0.0) return lr.base;
  const double norm = loss.operator_norm_estimate();
  return lr.auto_scale / std::max(norm, 1e-12);
}

double relative_change(double change_norm, double reference_norm, double fallback_norm) {
  if (reference_norm > 0.0) return change_norm / reference_norm;
  if (fallback_norm > 0.0) return change_norm / fallback_norm;
  return change_norm;
}

void check_inputs(const Dataset& data, const PenaltyEvaluator& ev, const FitConfig& cfg,
                  const Eigen::VectorXd& beta0) {
  data.validate();
  const std::size_t p = data.features();
  if (ev.dimension() != p) {
    throw ValidationError("fit: penalty dimension " + std::to_string(ev.dimension()) +
                          " does not match p=" + std::to_string(p));
  }
  if (static_cast<std::size_t>(beta0.size()) != p) throw ValidationError("fit: beta0 has wrong length");
  cfg.validate();
}

// Tracks the best-objective iterate and guards against divergence.
struct Tracker {
  FitResult& result;
  double best = std::numeric_limits<double>::infinity();

  void start(const Eigen::VectorXd& beta0, double objective) {
    result.initial_objective = objective;
    best = objective;
    result.beta_raw = beta0;
  }

  void record(const Eigen::VectorXd& beta, double objective) {
    result.trace.push_back(objective);
    if (!std::isfinite(objective)) {
      throw DivergedError("fit diverged at iteration " + std::to_string(result.trace.size()) +
                              " (learning rate too large?)",
                          result.trace);
    }
    if (objective < best) {
      best = objective;
      result.beta_raw = beta;
    }
  }

  void finish(const Eigen::VectorXd& last) {
    result.iterations = result.trace.size();
    result.beta_last = last;
    result.best_objective = best;
    result.beta = unsupervised_threshold(result.beta_raw);
  }
};

}  // namespace

FitResult subgradient_descent(const Dataset& data, const PenaltyEvaluator& ev, const FitConfig& cfg,
                              const Eigen::VectorXd& beta0) {
  check_inputs(data, ev, cfg, beta0);
  const LeastSquares loss(data);
  const double base = resolve_step(loss, cfg.lr);
  const bool penalized = cfg.lambda > 0.0;

  FitResult result;
  result.step_base = base;
  Tracker tracker{result};

  Eigen::VectorXd beta = beta0;
  Eigen::VectorXd heat = penalized ? ev.apply(beta.cwiseAbs2()) : Eigen::VectorXd();
  auto objective = [&](const Eigen::VectorXd& b) {
    double value = loss.value(b);
    if (penalized) value += cfg.lambda * heat_penalty_from_heat(heat);
    return value;
  };
  tracker.start(beta, objective(beta));

  Eigen::VectorXd zeta(beta.size());
  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    Eigen::VectorXd grad = loss.gradient(beta);
    if (penalized) {
      for (Eigen::Index j = 0; j < heat.size(); ++j) zeta(j) = ev.inverse_sqrt_link(heat(j));
      grad += cfg.lambda * ev.apply(zeta).cwiseProduct(beta);
    }
    const Eigen::VectorXd next = beta - cfg.lr.at(it, base) * grad;
    const double rel = relative_change((next - beta).norm(), beta.norm(), 0.0);
    beta = next;
    if (penalized) heat = ev.apply(beta.cwiseAbs2());
    tracker.record(beta, objective(beta));
    if (rel <= cfg.eps) {
      result.converged = true;
      break;
    }
  }
  tracker.finish(beta);
  return result;
}

namespace {

// Row-wise and column-wise compressed counts of the endpoint table: for row
// i, (v, c) means c of the B walks from i end at v; for column v, (i, c)
// is the same fact indexed by endpoint.
struct EndpointCounts {
  std::vector<std::size_t> row_offsets, col_offsets;
  std::vector<std::uint32_t> row_vertex, col_row;
  std::vector<std::uint32_t> row_count, col_count;

  explicit EndpointCounts(const HeatFlowMatrix& h) {
    const std::size_t p = h.vertices();
    row_offsets.assign(p + 1, 0);
    std::vector<Vertex> sorted;
    std::vector<std::size_t> col_sizes(p, 0);
    for (std::size_t i = 0; i < p; ++i) {
      const auto row = h.row(i);
      sorted.assign(row.begin(), row.end());
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t k = 0; k < sorted.size();) {
        std::size_t m = k;
        while (m < sorted.size() && sorted[m] == sorted[k]) ++m;
        row_vertex.push_back(sorted[k]);
        row_count.push_back(static_cast<std::uint32_t>(m - k));
        ++col_sizes[sorted[k]];
        k = m;
      }
      row_offsets[i + 1] = row_vertex.size();
    }
    col_offsets.assign(p + 1, 0);
    for (std::size_t v = 0; v < p; ++v) col_offsets[v + 1] = col_offsets[v] + col_sizes[v];
    col_row.resize(row_vertex.size());
    col_count.resize(row_vertex.size());
    std::vector<std::size_t> fill(col_offsets.begin(), col_offsets.end() - 1);
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t e = row_offsets[i]; e < row_offsets[i + 1]; ++e) {
        const std::size_t slot = fill[row_vertex[e]]++;
        col_row[slot] = static_cast<std::uint32_t>(i);
        col_count[slot] = row_count[e];
      }
    }
  }
};

}  // namespace

FitResult stochastic_block_cd(const Dataset& data, const PenaltyEvaluator& ev, const FitConfig& cfg,
                              const Eigen::VectorXd& beta0) {
  check_inputs(data, ev, cfg, beta0);
  if (ev.mode() != PenaltyEvaluator::Mode::monte_carlo) {
    throw ValidationError("stochastic_block_cd: requires a Monte Carlo penalty evaluator");
  }
  if (cfg.block_size > data.features()) {
    throw ValidationError("stochastic_block_cd: block size must lie in [1, p]");
  }
  const LeastSquares loss(data);
  const double base = resolve_step(loss, cfg.lr);
  const bool penalized = cfg.lambda > 0.0;
  const HeatFlowMatrix& hf = *ev.heat_flow();
  const std::size_t p = data.features();
  const std::size_t q = cfg.block_size;
  const double inv_walks = 1.0 / static_cast<double>(hf.walks());
  const EndpointCounts counts(hf);
  const Eigen::MatrixXd& gram = loss.gram();

  FitResult result;
  result.step_base = base;
  Tracker tracker{result};

  Eigen::VectorXd beta = beta0;
  Eigen::VectorXd gram_beta = gram * beta;
  // heat(i) tracks the walk average of beta^2 from vertex i and is updated
  // only where the changed coordinates are reachable.
  Eigen::VectorXd heat = penalized ? apply_heatflow(hf, beta.cwiseAbs2()) : Eigen::VectorXd();
  auto objective = [&] {
    double value = loss.value(beta, gram_beta);
    if (penalized) value += cfg.lambda * heat_penalty_from_heat(heat);
    return value;
  };
  tracker.start(beta, objective());

  SplitMix64 picker(derive_seed(cfg.seed, "block-cd"));
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> step(q);
  constexpr std::size_t kResync = 256;

  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    for (std::size_t k = 0; k < q; ++k) {
      std::swap(order[k], order[k + picker.below(p - k)]);
    }
    const double alpha = cfg.lr.at(it, base);
    double change_sq = 0.0, block_sq = 0.0;
    for (std::size_t k = 0; k < q; ++k) {
      const auto j = static_cast<Eigen::Index>(order[k]);
      double grad = gram_beta(j) - loss.xty()(j);
      if (penalized) {
        double zeta_mean = 0.0;
        for (std::size_t e = counts.row_offsets[order[k]]; e < counts.row_offsets[order[k] + 1]; ++e) {
          zeta_mean += counts.row_count[e] * ev.inverse_sqrt_link(heat(counts.row_vertex[e]));
        }
        grad += cfg.lambda * zeta_mean * inv_walks * beta(j);
      }
      step[k] = -alpha * grad;
      change_sq += step[k] * step[k];
      block_sq += beta(j) * beta(j);
    }
    const double full_norm = beta.norm();
    for (std::size_t k = 0; k < q; ++k) {
      const auto j = static_cast<Eigen::Index>(order[k]);
      const double old_value = beta(j);
      const double new_value = old_value + step[k];
      beta(j) = new_value;
      gram_beta += step[k] * gram.col(j);
      if (penalized) {
        const double delta = (new_value * new_value - old_value * old_value) * inv_walks;
        for (std::size_t e = counts.col_offsets[order[k]]; e < counts.col_offsets[order[k] + 1]; ++e) {
          heat(counts.col_row[e]) += counts.col_count[e] * delta;
        }
      }
    }
    if (it % kResync == 0) {
      gram_beta = gram * beta;
      if (penalized) heat = apply_heatflow(hf, beta.cwiseAbs2());
    }
    tracker.record(beta, objective());
    const double rel = relative_change(std::sqrt(change_sq), std::sqrt(block_sq), full_norm);
    if (rel <= cfg.eps) {
      result.converged = true;
      break;
    }
  }
  tracker.finish(beta);
  return result;
}

Eigen::VectorXd unsupervised_threshold(const Eigen::VectorXd& beta) {
  const Eigen::Index p = beta.size();
  if (p < 2) return beta;
  const Eigen::VectorXd mag = beta.cwiseAbs();
  double lo = mag.minCoeff();
  double hi = mag.maxCoeff();
  if (lo == hi) return beta;

  std::vector<bool> far(static_cast<std::size_t>(p), false);
  for (int it = 0; it < 100; ++it) {
    double sum_lo = 0.0, sum_hi = 0.0;
    std::size_t n_lo = 0, n_hi = 0;
    bool changed = false;
    for (Eigen::Index i = 0; i < p; ++i) {
      const bool to_hi = std::abs(mag(i) - hi) < std::abs(mag(i) - lo);
      if (to_hi != far[static_cast<std::size_t>(i)]) changed = true;
      far[static_cast<std::size_t>(i)] = to_hi;
      if (to_hi) {
        sum_hi += mag(i);
        ++n_hi;
      } else {
        sum_lo += mag(i);
        ++n_lo;
      }
    }
    if (n_lo > 0) lo = sum_lo / static_cast<double>(n_lo);
    if (n_hi > 0) hi = sum_hi / static_cast<double>(n_hi);
    if (!changed && it > 0) break;
  }

  // Keep the cluster whose centroid is farther from zero.
  const bool keep_far = hi >= lo;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (far[static_cast<std::size_t>(i)] == keep_far) out(i) = beta(i);
  }
  return out;
}

Eigen::VectorXd ridge_init(const Dataset& data, double ridge_lambda) {
  if (!(ridge_lambda > 0.0)) throw ValidationError("ridge_init: ridge lambda must be positive");
  const LeastSquares loss(data);
  Eigen::MatrixXd system = loss.gram();
  system.diagonal().array() += ridge_lambda;
  Eigen::LLT<Eigen::MatrixXd> chol(system);
  if (chol.info() != Eigen::Success) throw ValidationError("ridge_init: system not positive definite");
  return chol.solve(loss.xty());
}

FitResult fit_heat_flow(const Dataset& data, const PenaltyEvaluator& ev, const FitConfig& cfg,
                        Optimizer optimizer) {
  const Eigen::VectorXd beta0 = ridge_init(data, cfg.ridge_lambda);
  if (optimizer == Optimizer::block_cd) return stochastic_block_cd(data, ev, cfg, beta0);
  return subgradient_descent(data, ev, cfg, beta0);
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("cross-validation: need at least two folds");
  if (n / folds < 2) {
    throw ValidationError("cross-validation: " + std::to_string(folds) + " folds over " +
                          std::to_string(n) + " rows leaves a fold with fewer than 2 rows");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(derive_seed(seed, "folds"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t begin = f * n / folds;
    const std::size_t end = (f + 1) * n / folds;
    out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                  order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

CvResult cross_validate(const Dataset& data, const EvaluatorFactory& factory,
                        std::span<const GridPoint> grid, std::size_t folds, const FitConfig& cfg,
                        Optimizer optimizer, unsigned threads) {
  if (grid.empty()) throw ValidationError("cross-validation: empty grid");
  const auto fold_rows = make_folds(data.samples(), folds, cfg.seed);

  std::vector<Dataset> train(folds), valid(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> rest;
    for (std::size_t g = 0; g < folds; ++g) {
      if (g != f) rest.insert(rest.end(), fold_rows[g].begin(), fold_rows[g].end());
    }
    std::sort(rest.begin(), rest.end());
    train[f] = select_rows(data, rest);
    valid[f] = select_rows(data, fold_rows[f]);
  }

  CvResult result;
  result.table.resize(grid.size());
  std::vector<PenaltyEvaluator> evaluators;
  evaluators.reserve(grid.size());
  for (const auto& point : grid) evaluators.push_back(factory(point.t));

  const std::size_t jobs = grid.size() * folds;
  std::vector<double> mse(jobs, 0.0);
  parallel_for(jobs, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t job = begin; job < end; ++job) {
      const std::size_t cell = job / folds;
      const std::size_t f = job % folds;
      FitConfig local = cfg;
      local.lambda = grid[cell].lambda;
      local.t = grid[cell].t;
      local.seed = derive_seed(cfg.seed, job);
      try {
        const FitResult fit = fit_heat_flow(train[f], evaluators[cell], local, optimizer);
        const Eigen::VectorXd resid = valid[f].y - valid[f].X * fit.beta;
        mse[job] = resid.squaredNorm() / static_cast<double>(valid[f].samples());
      } catch (const DivergedError&) {
        mse[job] = std::numeric_limits<double>::infinity();
      }
    }
  });

  std::size_t best = 0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    CvCell& cell = result.table[c];
    cell.point = grid[c];
    cell.fold_mse.assign(mse.begin() + static_cast<std::ptrdiff_t>(c * folds),
                         mse.begin() + static_cast<std::ptrdiff_t>((c + 1) * folds));
    const double mean = std::accumulate(cell.fold_mse.begin(), cell.fold_mse.end(), 0.0) /
                        static_cast<double>(folds);
    double var = 0.0;
    for (double v : cell.fold_mse) var += (v - mean) * (v - mean);
    cell.mean_mse = mean;
    cell.std_error = std::sqrt(var / static_cast<double>(folds - 1) / static_cast<double>(folds));

    const CvCell& incumbent = result.table[best];
    const bool better =
        cell.mean_mse < incumbent.mean_mse ||
        (cell.mean_mse == incumbent.mean_mse &&
         (cell.point.t < incumbent.point.t ||
          (cell.point.t == incumbent.point.t && cell.point.lambda < incumbent.point.lambda)));
    if (c == 0 || better) best = c;
  }
  result.best = result.table[best].point;
  return result;
}

double heat_lambda_max(const Dataset& data) {
  const double n = static_cast<double>(data.samples());
  return (data.X.transpose() * data.y / n).cwiseAbs().maxCoeff();
}

std::vector<double> log_grid(double hi, double lo, std::size_t count) {
  if (count == 0) return {};
  if (!(hi > 0.0 && lo > 0.0)) throw ValidationError("log_grid: bounds must be positive");
  if (count == 1) return {hi};
  std::vector<double> out(count);
  const double lh = std::log(hi), ll = std::log(lo);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::exp(lh + (ll - lh) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return out;
}

double t_flow_heuristic(std::optional<double> lambda_g) {
  if (!lambda_g || !(*lambda_g > 0.0)) return 0.5;
  return 0.5 * std::min(1.0, 1.0 / *lambda_g);
}

double t_flow_heuristic(const LaplacianSpectrum& spec, std::optional<std::size_t> index) {
  if (index) {
    if (*index >= spec.size()) return 0.5;
    return t_flow_heuristic(spec.eigenvalues(static_cast<Eigen::Index>(*index)));
  }
  return t_flow_heuristic(spectral_gap(spec, default_zero_tol(spec)).lambda_g);
}

}  // namespace heatpen
