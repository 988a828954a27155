#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "heatpen/baselines.hpp"
#include "heatpen/errors.hpp"
#include "heatpen/graph.hpp"
#include "heatpen/rng.hpp"

using namespace heatpen;

namespace {

Dataset gaussian_data(std::size_t n, std::size_t p, const Eigen::VectorXd& beta, double sigma, Rng& rng) {
  std::normal_distribution<double> z;
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (auto& x : d.X.reshaped()) x = z(rng);
  d.y = d.X * beta;
  for (auto& v : d.y) v += sigma * z(rng);
  return d;
}

// Accuracy by enumerating every relabeling of the estimate.
double brute_force_accuracy(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& est,
                            std::size_t k) {
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = 0.0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += perm[est[i]] == truth[i];
    best = std::max(best, static_cast<double>(hits) / static_cast<double>(truth.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double group_objective(const Dataset& d, const GroupStructure& gs, const Eigen::VectorXd& b, double lambda) {
  double pen = 0.0;
  for (std::size_t g = 0; g < gs.groups(); ++g) {
    double sq = 0.0;
    for (auto j : gs.members(g)) sq += b(static_cast<Eigen::Index>(j)) * b(static_cast<Eigen::Index>(j));
    pen += std::sqrt(static_cast<double>(gs.members(g).size())) * std::sqrt(sq);
  }
  return (d.y - d.X * b).squaredNorm() / (2.0 * static_cast<double>(d.samples())) + lambda * pen;
}

}  // namespace

TEST_CASE("k-means separates well-spaced clusters") {
  Rng rng = make_rng(1);
  std::normal_distribution<double> z(0.0, 0.1);
  Eigen::MatrixXd pts(60, 2);
  const double centers[3][2] = {{0, 0}, {5, 0}, {0, 5}};
  for (int i = 0; i < 60; ++i) {
    pts(i, 0) = centers[i % 3][0] + z(rng);
    pts(i, 1) = centers[i % 3][1] + z(rng);
  }
  const auto km = kmeans(pts, 3, rng);
  REQUIRE(km.labels.size() == 60);
  for (int i = 3; i < 60; ++i) CHECK(km.labels[i] == km.labels[i % 3]);
  CHECK(km.labels[0] != km.labels[1]);
  CHECK(km.labels[1] != km.labels[2]);
  CHECK(km.labels[0] != km.labels[2]);
  CHECK(km.centroids.rows() == 3);
  CHECK(km.inertia < 60 * 0.1);
  CHECK_THROWS_AS(kmeans(pts, 0, rng), ValidationError);
  CHECK_THROWS_AS(kmeans(pts, 61, rng), ValidationError);
}

TEST_CASE("spectral clustering recovers disconnected components") {
  Rng rng = make_rng(2);
  const std::vector<std::size_t> sizes{16, 24, 40, 20};
  const auto truth = block_labels(sizes);
  for (int trial = 0; trial < 5; ++trial) {
    const Graph g = sbm_sample(sizes, 0.5, 0.0, rng);
    const auto s = spectrum(laplacian(g));
    const auto est = spectral_clustering(s, 4, rng);
    CHECK(est.groups() == 4);
    CHECK(clustering_accuracy(truth, est.labels()) == 1.0);
    CHECK(count_small_eigenvalues(s, default_zero_tol(s)) == 4);
  }
}

TEST_CASE("clustering accuracy matches brute force") {
  Rng rng = make_rng(3);
  std::uniform_int_distribution<std::size_t> lab(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> truth(30), est(30);
    for (auto& v : truth) v = lab(rng);
    for (auto& v : est) v = lab(rng);
    CHECK(clustering_accuracy(truth, est) == doctest::Approx(brute_force_accuracy(truth, est, 4)));
  }
  const std::vector<std::size_t> a{0, 0, 1, 1}, b{1, 1, 0, 0};
  CHECK(clustering_accuracy(a, b) == 1.0);
  const std::vector<std::size_t> c{0, 0, 0, 0};
  CHECK(clustering_accuracy(a, c) == 0.5);
}

TEST_CASE("group lasso satisfies the optimality conditions") {
  Rng rng = make_rng(4);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(12);
  truth.head(4).setConstant(0.8);
  const Dataset d = gaussian_data(100, 12, truth, 0.5, rng);
  const GroupStructure gs({0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 2, 2});
  const double lambda = 0.3 * group_lasso_lambda_max(d, gs);
  const auto fit = group_lasso_fit(d, gs, lambda, std::nullopt, 1e-12);
  CHECK(fit.converged);
  for (std::size_t s = 1; s < fit.trace.size(); ++s) CHECK(fit.trace[s] <= fit.trace[s - 1] + 1e-12);

  const Eigen::VectorXd grad = d.X.transpose() * (d.y - d.X * fit.beta) / 100.0;
  for (std::size_t g = 0; g < gs.groups(); ++g) {
    const auto& m = gs.members(g);
    Eigen::VectorXd gg(m.size()), bg(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      gg(static_cast<Eigen::Index>(i)) = grad(static_cast<Eigen::Index>(m[i]));
      bg(static_cast<Eigen::Index>(i)) = fit.beta(static_cast<Eigen::Index>(m[i]));
    }
    const double w = lambda * std::sqrt(static_cast<double>(m.size()));
    if (bg.norm() > 0.0) {
      CHECK((gg - w * bg / bg.norm()).norm() <= 1e-5);
    } else {
      CHECK(gg.norm() <= w + 1e-6);
    }
  }
  CHECK(fit.beta.head(4).norm() > 0.0);
  CHECK(fit.beta.tail(8).isZero());
}

TEST_CASE("singleton groups reduce to the lasso") {
  Rng rng = make_rng(5);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(8);
  truth.head(3) << 1.0, -1.0, 0.5;
  const Dataset d = gaussian_data(60, 8, truth, 0.3, rng);
  const GroupStructure gs({0, 1, 2, 3, 4, 5, 6, 7});
  const double lambda = 0.1;
  const auto fit = group_lasso_fit(d, gs, lambda, std::nullopt, 1e-13);
  // Soft-threshold optimality for each coordinate.
  const Eigen::VectorXd grad = d.X.transpose() * (d.y - d.X * fit.beta) / 60.0;
  for (int j = 0; j < 8; ++j) {
    if (fit.beta(j) != 0.0) {
      CHECK(grad(j) == doctest::Approx(lambda * (fit.beta(j) > 0 ? 1.0 : -1.0)).epsilon(1e-5));
    } else {
      CHECK(std::abs(grad(j)) <= lambda + 1e-8);
    }
  }
  // Any small perturbation does no better.
  std::normal_distribution<double> z(0.0, 1e-3);
  const double best = group_objective(d, gs, fit.beta, lambda);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd b = fit.beta;
    for (auto& v : b) v += z(rng);
    CHECK(group_objective(d, gs, b, lambda) >= best - 1e-12);
  }
}

TEST_CASE("group lasso at and above lambda max is zero") {
  Rng rng = make_rng(6);
  const Dataset d = gaussian_data(50, 9, Eigen::VectorXd::Ones(9), 0.5, rng);
  const GroupStructure gs({0, 0, 0, 1, 1, 1, 2, 2, 2});
  const double lmax = group_lasso_lambda_max(d, gs);
  CHECK(group_lasso_fit(d, gs, lmax).beta.isZero());
  CHECK(group_lasso_fit(d, gs, 2.0 * lmax).beta.isZero());
  CHECK_FALSE(group_lasso_fit(d, gs, 0.9 * lmax).beta.isZero());

  // Groups enter or leave as a whole.
  const auto mid = group_lasso_fit(d, gs, 0.5 * lmax);
  for (std::size_t g = 0; g < gs.groups(); ++g) {
    std::size_t nonzero = 0;
    for (auto j : gs.members(g)) nonzero += mid.beta(static_cast<Eigen::Index>(j)) != 0.0;
    CHECK((nonzero == 0 || nonzero == gs.members(g).size()));
  }
  CHECK_THROWS_AS(group_lasso_fit(d, gs, -1.0), ValidationError);
  CHECK_THROWS_AS(group_lasso_fit(d, GroupStructure({0, 0, 1}), 0.1), ValidationError);
}

TEST_CASE("group lasso cross-validation") {
  Rng rng = make_rng(7);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(12);
  truth.head(6).setConstant(0.6);
  const Dataset d = gaussian_data(120, 12, truth, 0.5, rng);
  const GroupStructure gs({0, 0, 0, 0, 0, 0, 1, 1, 1, 2, 2, 2});
  const auto cv = group_lasso_cv(d, gs, 5, 3, 20);
  REQUIRE(cv.lambdas.size() == 20);
  CHECK(cv.mean_mse.size() == 20);
  CHECK(cv.lambdas.front() == doctest::Approx(group_lasso_lambda_max(d, gs)));
  CHECK(cv.lambdas.back() == doctest::Approx(group_lasso_lambda_max(d, gs) / 1000.0));
  const auto best = std::min_element(cv.mean_mse.begin(), cv.mean_mse.end());
  CHECK(cv.best_lambda == cv.lambdas[static_cast<std::size_t>(best - cv.mean_mse.begin())]);
  CHECK(cv.beta.head(6).cwiseAbs().minCoeff() > 0.0);
  CHECK((cv.beta - group_lasso_fit(d, gs, cv.best_lambda).beta).cwiseAbs().maxCoeff() <= 1e-5);

  const auto again = group_lasso_cv(d, gs, 5, 3, 20);
  CHECK(again.best_lambda == cv.best_lambda);
}

TEST_CASE("score examples") {
  Rng rng = make_rng(8);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(6);
  truth.head(2) << 1.0, -1.0;
  Dataset holdout = gaussian_data(50, 6, truth, 0.0, rng);
  holdout.beta_true = truth;

  const auto exact = score(truth, holdout);
  CHECK(*exact.sensitivity == 1.0);
  CHECK(*exact.specificity == 1.0);
  CHECK(*exact.prediction_error == doctest::Approx(0.0));
  CHECK(*exact.estimation_error == 0.0);
  CHECK(*exact.test_mse == doctest::Approx(0.0));

  const auto zero = score(Eigen::VectorXd::Zero(6), holdout);
  CHECK(*zero.sensitivity == 0.0);
  CHECK(*zero.specificity == 1.0);
  CHECK(*zero.estimation_error == doctest::Approx(std::sqrt(2.0)));
  CHECK(*zero.prediction_error == doctest::Approx((holdout.X * truth).squaredNorm() / 50.0));

  Dataset dense = holdout;
  dense.beta_true = Eigen::VectorXd::Ones(6);
  CHECK_FALSE(score(Eigen::VectorXd::Ones(6), dense).specificity);

  Dataset unknown = holdout;
  unknown.beta_true.reset();
  const auto partial = score(truth, unknown);
  CHECK_FALSE(partial.prediction_error);
  CHECK_FALSE(partial.sensitivity);
  CHECK(partial.test_mse);
}
