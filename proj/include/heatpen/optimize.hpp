#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "heatpen/design.hpp"
#include "heatpen/penalty.hpp"

namespace heatpen {

/// Step size alpha(i) for iteration i >= 1.
struct LearningRate {
  enum class Schedule { constant, inverse_sqrt };

  Schedule schedule = Schedule::inverse_sqrt;
  /// Base step. Non-positive means auto: auto_scale / ||X^T X / n||_op.
  double base = 0.0;
  double auto_scale = 1.0;

  double at(std::size_t iteration, double resolved_base) const noexcept;
};

struct FitConfig {
  double lambda = 0.0;
  double t = 0.0;
  std::size_t walks = 500;  // B
  LearningRate lr;
  double eps = 1e-5;
  std::size_t max_iter = 3000;
  std::size_t block_size = 10;  // q, block coordinate descent only
  std::uint64_t seed = 0;
  double ridge_lambda = 0.1;

  void validate() const;
};

struct FitResult {
  Eigen::VectorXd beta_raw;   // best-objective iterate
  Eigen::VectorXd beta;       // beta_raw after unsupervised thresholding
  Eigen::VectorXd beta_last;  // final iterate
  std::size_t iterations = 0;
  std::vector<double> trace;  // objective after each iteration
  bool converged = false;
  double best_objective = 0.0;
  double initial_objective = 0.0;
  double step_base = 0.0;     // resolved alpha_0
};

/// Squared-error loss (1/2n)||y - X beta||^2 with cached sufficient statistics.
class LeastSquares {
 public:
  explicit LeastSquares(const Dataset& data);

  std::size_t features() const noexcept { return static_cast<std::size_t>(gram_.rows()); }
  const Eigen::MatrixXd& gram() const noexcept { return gram_; }  // X^T X / n
  const Eigen::VectorXd& xty() const noexcept { return xty_; }    // X^T y / n

  double value(const Eigen::VectorXd& beta) const;
  /// Loss given a precomputed gram * beta.
  double value(const Eigen::VectorXd& beta, const Eigen::VectorXd& gram_beta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;

  /// Largest eigenvalue of the gram matrix by 20 power iterations.
  double operator_norm_estimate() const;

 private:
  Eigen::MatrixXd gram_;
  Eigen::VectorXd xty_;
  double half_yty_ = 0.0;
};

/// Full subgradient descent on loss + lambda * heat penalty. The heat flow
/// (or exact kernel) inside `ev` is fixed for the whole run.
FitResult subgradient_descent(const Dataset& data, const PenaltyEvaluator& ev, const FitConfig& cfg,
                              const Eigen::VectorXd& beta0);

/// Stochastic block coordinate descent: each iteration updates q random
/// coordinates using only the walk rows that start at them. Monte Carlo mode
/// only.
FitResult stochastic_block_cd(const Dataset& data, const PenaltyEvaluator& ev, const FitConfig& cfg,
                              const Eigen::VectorXd& beta0);

/// 2-means on |beta| (Lloyd, initialized at min and max); entries in the
/// cluster with the larger centroid are kept, the rest zeroed.
Eigen::VectorXd unsupervised_threshold(const Eigen::VectorXd& beta);

/// Solves (X^T X / n + ridge_lambda I) beta = X^T y / n.
Eigen::VectorXd ridge_init(const Dataset& data, double ridge_lambda);

enum class Optimizer { subgradient, block_cd };

/// Runs the chosen optimizer from the ridge start and thresholds.
FitResult fit_heat_flow(const Dataset& data, const PenaltyEvaluator& ev, const FitConfig& cfg,
                        Optimizer optimizer);

struct GridPoint {
  double lambda = 0.0;
  double t = 0.0;
};

struct CvCell {
  GridPoint point;
  double mean_mse = 0.0;
  double std_error = 0.0;
  std::vector<double> fold_mse;
};

struct CvResult {
  GridPoint best;
  std::vector<CvCell> table;
};

/// Returns the evaluator to use for a given heat-flow time.
using EvaluatorFactory = std::function<PenaltyEvaluator(double t)>;

/// Row indices of each fold: one seeded shuffle, then contiguous blocks.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t folds, std::uint64_t seed);

/// K-fold cross-validation of validation MSE over the grid. Ties are broken
/// toward smaller t, then smaller lambda. Fits that diverge score +inf.
CvResult cross_validate(const Dataset& data, const EvaluatorFactory& factory,
                        std::span<const GridPoint> grid, std::size_t folds, const FitConfig& cfg,
                        Optimizer optimizer, unsigned threads = 1);

/// Largest lambda worth trying for the heat penalty: ||X^T y / n||_inf.
double heat_lambda_max(const Dataset& data);

/// `count` log-spaced values from hi down to lo.
std::vector<double> log_grid(double hi, double lo, std::size_t count);

/// 0.5 * min(1, 1 / lambda_g); 0.5 when the gap is absent or non-positive.
double t_flow_heuristic(std::optional<double> lambda_g);

/// Heuristic from a spectrum. The gap is the first eigenvalue at or above
/// the default zero tolerance unless `index` (0-based) selects one directly.
double t_flow_heuristic(const LaplacianSpectrum& spec, std::optional<std::size_t> index = std::nullopt);

}  // namespace heatpen
