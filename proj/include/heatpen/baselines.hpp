#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "heatpen/design.hpp"
#include "heatpen/graph.hpp"
#include "heatpen/optimize.hpp"
#include "heatpen/penalty.hpp"
#include "heatpen/rng.hpp"

namespace heatpen {

struct KMeansResult {
  std::vector<std::size_t> labels;
  Eigen::MatrixXd centroids;  // k x d
  double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` by inertia.
KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, Rng& rng, std::size_t restarts = 10,
                    std::size_t max_iter = 300);

/// Unnormalized spectral clustering: k-means on the rows of the eigenvectors
/// of the k smallest Laplacian eigenvalues. Labels are renumbered in order
/// of first appearance, so every label in [0, k') is used.
GroupStructure spectral_clustering(const LaplacianSpectrum& spec, std::size_t k, Rng& rng);

/// Number of eigenvalues strictly below `tol` (at least 1).
std::size_t count_small_eigenvalues(const LaplacianSpectrum& spec, double tol);

/// Fraction of coordinates whose labels agree under the best matching of
/// estimated to true labels (Hungarian assignment on the confusion matrix).
double clustering_accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> estimate);

struct GroupLassoFit {
  Eigen::VectorXd beta;
  std::vector<double> trace;  // objective after each sweep
  std::size_t sweeps = 0;
  bool converged = false;
};

/// Block coordinate descent for (1/2n)||y - X beta||^2 + lambda sum_j
/// sqrt(T_j) ||beta_j||_2. Each block takes a majorized proximal step with
/// curvature equal to the block's largest gram eigenvalue.
GroupLassoFit group_lasso_fit(const Dataset& data, const GroupStructure& groups, double lambda,
                              const std::optional<Eigen::VectorXd>& warm_start = std::nullopt,
                              double tol = 1e-8, std::size_t max_sweeps = 100000);

/// Smallest lambda at which beta = 0 is optimal: max_j ||X_j^T y / n|| / sqrt(T_j).
double group_lasso_lambda_max(const Dataset& data, const GroupStructure& groups);

struct GroupLassoCv {
  double best_lambda = 0.0;
  std::vector<double> lambdas;
  std::vector<double> mean_mse;
  Eigen::VectorXd beta;  // refit on all rows at best_lambda
};

/// K-fold CV over `grid_size` log-spaced lambdas from lambda_max down to
/// lambda_max / 1000, warm-started along the path.
GroupLassoCv group_lasso_cv(const Dataset& data, const GroupStructure& groups, std::size_t folds,
                            std::uint64_t seed, std::size_t grid_size = 50);

struct MetricsReport {
  std::optional<double> prediction_error;   // (1/n) ||X_test (beta_hat - beta*)||^2
  std::optional<double> test_mse;           // (1/n) ||y_test - X_test beta_hat||^2
  std::optional<double> estimation_error;   // ||beta_hat - beta*||_2
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> clustering_accuracy;
};

/// Scores an estimate on a holdout set. Support metrics treat any entry with
/// |beta| > 0 as selected; a metric with an empty denominator is absent.
MetricsReport score(const Eigen::VectorXd& beta_hat, const Dataset& holdout);

}  // namespace heatpen
