#include "heatpen/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "heatpen/errors.hpp"

namespace heatpen {

namespace {

std::vector<std::size_t> relabel_by_first_appearance(std::span<const std::size_t> labels) {
  std::vector<std::size_t> map;
  std::vector<std::size_t> out(labels.size());
  constexpr auto unset = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= map.size()) map.resize(labels[i] + 1, unset);
    if (map[labels[i]] == unset) {
      map[labels[i]] = static_cast<std::size_t>(std::count_if(map.begin(), map.end(),
                                                              [](std::size_t v) { return v != unset; }));
    }
    out[i] = map[labels[i]];
  }
  return out;
}

KMeansResult lloyd(const Eigen::MatrixXd& points, Eigen::MatrixXd centroids, std::size_t max_iter) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = centroids.rows();
  KMeansResult out;
  out.labels.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = it == 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        const double d = (points.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (out.labels[static_cast<std::size_t>(i)] != static_cast<std::size_t>(best)) changed = true;
      out.labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(out.labels[static_cast<std::size_t>(i)])) += points.row(i);
      ++counts[out.labels[static_cast<std::size_t>(i)]];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      // An emptied cluster keeps its previous centroid.
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
    if (!changed) break;
  }
  out.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.inertia += (points.row(i) - centroids.row(static_cast<Eigen::Index>(out.labels[static_cast<std::size_t>(i)]))).squaredNorm();
  }
  out.centroids = std::move(centroids);
  return out;
}

Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& points, std::size_t k, Rng& rng) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), points.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centroids.row(0) = points.row(first(rng));
  Eigen::VectorXd dist(n);
  for (Eigen::Index i = 0; i < n; ++i) dist(i) = (points.row(i) - centroids.row(0)).squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    const double total = dist.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> unif(0.0, total);
      double target = unif(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        target -= dist(pick);
        if (target <= 0.0) break;
      }
    } else {
      pick = first(rng);
    }
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      dist(i) = std::min(dist(i), (points.row(i) - centroids.row(static_cast<Eigen::Index>(c))).squaredNorm());
    }
  }
  return centroids;
}

// Maximum-weight perfect matching on a square matrix (Hungarian method,
// potentials form). Returns assignment[row] = column.
std::vector<std::size_t> hungarian_max(const Eigen::MatrixXd& weight) {
  const auto n = static_cast<std::size_t>(weight.rows());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays as in the classic formulation; cost = -weight.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -weight(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, Rng& rng, std::size_t restarts,
                    std::size_t max_iter) {
  if (k == 0 || k > static_cast<std::size_t>(points.rows())) {
    throw ValidationError("kmeans: k must lie in [1, n]");
  }
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    KMeansResult run = lloyd(points, kmeanspp_seed(points, k, rng), max_iter);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

GroupStructure spectral_clustering(const LaplacianSpectrum& spec, std::size_t k, Rng& rng) {
  if (k == 0 || k > spec.size()) throw ValidationError("spectral_clustering: k must lie in [1, p]");
  const Eigen::MatrixXd embedding = spec.eigenvectors.leftCols(static_cast<Eigen::Index>(k));
  const KMeansResult km = kmeans(embedding, k, rng, 10);
  return GroupStructure(relabel_by_first_appearance(km.labels));
}

std::size_t count_small_eigenvalues(const LaplacianSpectrum& spec, double tol) {
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < spec.eigenvalues.size(); ++i) {
    if (spec.eigenvalues(i) < tol) ++count;
  }
  return std::max<std::size_t>(count, 1);
}

double clustering_accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> estimate) {
  if (truth.size() != estimate.size()) throw ValidationError("clustering_accuracy: length mismatch");
  if (truth.empty()) return 1.0;
  const std::size_t kt = *std::max_element(truth.begin(), truth.end()) + 1;
  const std::size_t ke = *std::max_element(estimate.begin(), estimate.end()) + 1;
  const std::size_t k = std::max(kt, ke);
  Eigen::MatrixXd confusion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    confusion(static_cast<Eigen::Index>(estimate[i]), static_cast<Eigen::Index>(truth[i])) += 1.0;
  }
  const auto assignment = hungarian_max(confusion);
  double agree = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    agree += confusion(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(assignment[r]));
  }
  return agree / static_cast<double>(truth.size());
}

double group_lasso_lambda_max(const Dataset& data, const GroupStructure& groups) {
  if (groups.size() != data.features()) throw ValidationError("group lasso: group labels do not match p");
  const Eigen::VectorXd xty = data.X.transpose() * data.y / static_cast<double>(data.samples());
  double best = 0.0;
  for (std::size_t j = 0; j < groups.groups(); ++j) {
    double sq = 0.0;
    for (std::size_t i : groups.members(j)) sq += xty(static_cast<Eigen::Index>(i)) * xty(static_cast<Eigen::Index>(i));
    best = std::max(best, std::sqrt(sq) / std::sqrt(static_cast<double>(groups.sizes()[j])));
  }
  return best;
}

namespace {

struct GroupLassoProblem {
  LeastSquares loss;
  std::vector<std::vector<Eigen::Index>> members;
  std::vector<double> curvature;  // largest eigenvalue of each gram block
  std::vector<double> weight;     // sqrt(T_j)

  GroupLassoProblem(const Dataset& data, const GroupStructure& groups) : loss(data) {
    if (groups.size() != data.features()) throw ValidationError("group lasso: group labels do not match p");
    const Eigen::MatrixXd& gram = loss.gram();
    for (std::size_t j = 0; j < groups.groups(); ++j) {
      std::vector<Eigen::Index> idx;
      for (std::size_t i : groups.members(j)) idx.push_back(static_cast<Eigen::Index>(i));
      Eigen::MatrixXd block(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b)
          block(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = gram(idx[a], idx[b]);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block, Eigen::EigenvaluesOnly);
      curvature.push_back(eig.eigenvalues().maxCoeff());
      weight.push_back(std::sqrt(static_cast<double>(idx.size())));
      members.push_back(std::move(idx));
    }
  }

  double objective(const Eigen::VectorXd& beta, const Eigen::VectorXd& gram_beta, double lambda) const {
    double pen = 0.0;
    for (std::size_t j = 0; j < members.size(); ++j) {
      double sq = 0.0;
      for (Eigen::Index i : members[j]) sq += beta(i) * beta(i);
      pen += weight[j] * std::sqrt(sq);
    }
    return loss.value(beta, gram_beta) + lambda * pen;
  }

  GroupLassoFit solve(double lambda, Eigen::VectorXd beta, double tol, std::size_t max_sweeps) const {
    const Eigen::MatrixXd& gram = loss.gram();
    const Eigen::VectorXd& xty = loss.xty();
    Eigen::VectorXd gram_beta = gram * beta;
    GroupLassoFit fit;
    Eigen::VectorXd z;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
      double max_change = 0.0;
      for (std::size_t j = 0; j < members.size(); ++j) {
        const auto& idx = members[j];
        const double step = curvature[j];
        if (!(step > 0.0)) continue;
        z.resize(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t a = 0; a < idx.size(); ++a) {
          const Eigen::Index i = idx[a];
          z(static_cast<Eigen::Index>(a)) = beta(i) - (gram_beta(i) - xty(i)) / step;
        }
        const double norm = z.norm();
        const double shrink = norm > 0.0 ? std::max(0.0, 1.0 - lambda * weight[j] / (step * norm)) : 0.0;
        double change_sq = 0.0;
        for (std::size_t a = 0; a < idx.size(); ++a) {
          const Eigen::Index i = idx[a];
          const double updated = shrink * z(static_cast<Eigen::Index>(a));
          const double delta = updated - beta(i);
          if (delta != 0.0) {
            gram_beta += delta * gram.col(i);
            beta(i) = updated;
          }
          change_sq += delta * delta;
        }
        max_change = std::max(max_change, std::sqrt(change_sq));
      }
      fit.trace.push_back(objective(beta, gram_beta, lambda));
      ++fit.sweeps;
      if (max_change <= tol) {
        fit.converged = true;
        break;
      }
    }
    fit.beta = std::move(beta);
    return fit;
  }
};

}  // namespace

GroupLassoFit group_lasso_fit(const Dataset& data, const GroupStructure& groups, double lambda,
                              const std::optional<Eigen::VectorXd>& warm_start, double tol,
                              std::size_t max_sweeps) {
  if (!(lambda >= 0.0)) throw ValidationError("group lasso: lambda must be >= 0");
  const GroupLassoProblem problem(data, groups);
  Eigen::VectorXd beta0 = warm_start ? *warm_start : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.features()));
  if (static_cast<std::size_t>(beta0.size()) != data.features()) {
    throw ValidationError("group lasso: warm start has wrong length");
  }
  return problem.solve(lambda, std::move(beta0), tol, max_sweeps);
}

GroupLassoCv group_lasso_cv(const Dataset& data, const GroupStructure& groups, std::size_t folds,
                            std::uint64_t seed, std::size_t grid_size) {
  const double lambda_max = group_lasso_lambda_max(data, groups);
  GroupLassoCv cv;
  cv.lambdas = lambda_max > 0.0 ? log_grid(lambda_max, lambda_max / 1000.0, grid_size)
                                : std::vector<double>{0.0};
  cv.mean_mse.assign(cv.lambdas.size(), 0.0);
  const auto fold_rows = make_folds(data.samples(), folds, seed);
  constexpr double kPathTol = 1e-6;
  constexpr std::size_t kPathSweeps = 5000;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> rest;
    for (std::size_t g = 0; g < folds; ++g) {
      if (g != f) rest.insert(rest.end(), fold_rows[g].begin(), fold_rows[g].end());
    }
    std::sort(rest.begin(), rest.end());
    const Dataset train = select_rows(data, rest);
    const Dataset valid = select_rows(data, fold_rows[f]);
    const GroupLassoProblem problem(train, groups);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.features()));
    for (std::size_t l = 0; l < cv.lambdas.size(); ++l) {
      beta = problem.solve(cv.lambdas[l], beta, kPathTol, kPathSweeps).beta;
      const Eigen::VectorXd resid = valid.y - valid.X * beta;
      cv.mean_mse[l] += resid.squaredNorm() / static_cast<double>(valid.samples()) / static_cast<double>(folds);
    }
  }
  const auto best = static_cast<std::size_t>(
      std::min_element(cv.mean_mse.begin(), cv.mean_mse.end()) - cv.mean_mse.begin());
  cv.best_lambda = cv.lambdas[best];

  // Refit along the full-data path down to the chosen lambda.
  const GroupLassoProblem problem(data, groups);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.features()));
  for (std::size_t l = 0; l <= best; ++l) {
    const double tol = l == best ? 1e-8 : kPathTol;
    beta = problem.solve(cv.lambdas[l], beta, tol, l == best ? 100000 : kPathSweeps).beta;
  }
  cv.beta = std::move(beta);
  return cv;
}

MetricsReport score(const Eigen::VectorXd& beta_hat, const Dataset& holdout) {
  holdout.validate();
  if (static_cast<std::size_t>(beta_hat.size()) != holdout.features()) {
    throw ValidationError("score: estimate has wrong length");
  }
  MetricsReport report;
  const double n = static_cast<double>(holdout.samples());
  if (n > 0) report.test_mse = (holdout.y - holdout.X * beta_hat).squaredNorm() / n;
  if (!holdout.beta_true) return report;
  const Eigen::VectorXd& truth = *holdout.beta_true;
  const Eigen::VectorXd diff = beta_hat - truth;
  if (n > 0) report.prediction_error = (holdout.X * diff).squaredNorm() / n;
  report.estimation_error = diff.norm();
  std::size_t true_nz = 0, true_z = 0, hit = 0, kept_zero = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    const bool selected = std::abs(beta_hat(i)) > 0.0;
    if (truth(i) != 0.0) {
      ++true_nz;
      if (selected) ++hit;
    } else {
      ++true_z;
      if (!selected) ++kept_zero;
    }
  }
  if (true_nz > 0) report.sensitivity = static_cast<double>(hit) / static_cast<double>(true_nz);
  if (true_z > 0) report.specificity = static_cast<double>(kept_zero) / static_cast<double>(true_z);
  return report;
}

}  // namespace heatpen
