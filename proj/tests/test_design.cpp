#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "heatpen/design.hpp"
#include "heatpen/errors.hpp"
#include "heatpen/graph.hpp"
#include "heatpen/rng.hpp"

using namespace heatpen;

namespace {

Eigen::MatrixXd sample_correlation(const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd c = X.rowwise() - X.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(X.rows() - 1);
  const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  return cov.array() / (sd * sd.transpose()).array();
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd c = X.rowwise() - X.colwise().mean();
  return c.transpose() * c / static_cast<double>(X.rows() - 1);
}

// Block-constant correlation: `within` inside blocks, 0 across.
Eigen::MatrixXd block_correlation(std::size_t blocks, std::size_t size, double within) {
  const auto p = static_cast<Eigen::Index>(blocks * size);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      if (i / static_cast<Eigen::Index>(size) == j / static_cast<Eigen::Index>(size)) r(i, j) = i == j ? 1.0 : within;
  return r;
}

}  // namespace

TEST_CASE("standard block design") {
  const DesignSpec spec = standard_block_design(2000);
  CHECK(spec.features() == 100);
  Rng rng = make_rng(1);
  const Dataset d = sample_design(spec, rng);
  CHECK(d.samples() == 2000);

  // Within-block-2 (rho = 0.9) sample correlations.
  const Eigen::MatrixXd r = sample_correlation(d.X);
  double sum = 0.0;
  int count = 0;
  for (int i = 16; i < 40; ++i)
    for (int j = i + 1; j < 40; ++j) {
      sum += r(i, j);
      ++count;
    }
  CHECK(std::abs(sum / count - 0.9) <= 0.05);

  REQUIRE(d.beta_true);
  const Eigen::VectorXd& b = *d.beta_true;
  CHECK((b.array() != 0.0).count() == 56);
  for (int j = 0; j < 16; ++j) CHECK((b(j) >= 0.5 && b(j) <= 0.7));
  for (int j = 16; j < 40; ++j) CHECK(b(j) == 0.0);
  for (int j = 40; j < 80; ++j) CHECK((b(j) >= -0.7 && b(j) <= -0.5));
  for (int j = 80; j < 100; ++j) CHECK(b(j) == 0.0);
  REQUIRE(d.groups_true);
  CHECK(d.groups_true->sizes() == std::vector<std::size_t>{16, 24, 40, 20});

  // y - X beta* is the noise draw.
  const Eigen::VectorXd eps = d.y - d.X * b;
  const double n = 2000.0;
  CHECK(std::abs(eps.mean()) <= 4.0 * spec.noise_sigma / std::sqrt(n));
  const double sd = std::sqrt((eps.array() - eps.mean()).square().sum() / (n - 1));
  CHECK(sd == doctest::Approx(spec.noise_sigma).epsilon(0.1));
}

TEST_CASE("uncorrelated blocks") {
  DesignSpec spec = standard_block_design(500);
  std::get<BlockGaussian>(spec.kind).rhos = {0.0, 0.0, 0.0, 0.0};
  Rng rng = make_rng(2);
  const Eigen::MatrixXd r = sample_correlation(sample_design(spec, rng).X);
  const Eigen::MatrixXd off = r - Eigen::MatrixXd::Identity(100, 100);
  CHECK(off.cwiseAbs().maxCoeff() <= 0.2);
}

TEST_CASE("design validation") {
  DesignSpec spec = standard_block_design();
  std::get<BlockGaussian>(spec.kind).rhos = {0.6, 1.2, 0.7, 0.4};
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  // The lower limit for a block of 24 is -1/23.
  std::get<BlockGaussian>(spec.kind).rhos = {0.6, -0.05, 0.7, 0.4};
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  std::get<BlockGaussian>(spec.kind).rhos = {0.6, -0.04, 0.7, 0.4};
  CHECK_NOTHROW(spec.validate());
  std::get<BlockGaussian>(spec.kind).rhos = {0.6, 0.9};
  CHECK_THROWS_AS(spec.validate(), ValidationError);

  DesignSpec g = standard_gff_design();
  std::get<GaussianFreeField>(g.kind).within = 1.5;
  CHECK_THROWS_AS(g.validate(), ValidationError);
}

TEST_CASE("block covariance") {
  const BlockGaussian b{{2, 3}, {0.5, -0.25}};
  const Eigen::MatrixXd s = block_covariance(b);
  CHECK(s(0, 1) == 0.5);
  CHECK(s(2, 4) == -0.25);
  CHECK(s(1, 2) == 0.0);
  CHECK(s.diagonal().isOnes());
}

TEST_CASE("GFF with identity precision") {
  Rng rng = make_rng(3);
  const Eigen::MatrixXd X = gff_rows(Graph(10), 1.0, 2000, rng);
  const Eigen::MatrixXd c = sample_covariance(X);
  for (int j = 0; j < 10; ++j) CHECK(std::abs(c(j, j) - 1.0) <= 0.1);
  CHECK_THROWS_AS(gff_rows(Graph(10), 0.0, 5, rng), ValidationError);
}

TEST_CASE("GFF covariance matches the inverse precision") {
  Rng rng = make_rng(4);
  const std::vector<std::size_t> sizes{10, 10};
  const Graph g = sbm_sample(sizes, 0.5, 0.1, rng);
  const double theta = 0.7;
  const Eigen::MatrixXd precision = laplacian(g) + theta * Eigen::MatrixXd::Identity(20, 20);
  const Eigen::MatrixXd sigma = precision.inverse();
  CHECK((precision * sigma - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff() <= 1e-8);
  const Eigen::MatrixXd X = gff_rows(g, theta, 5000, rng);
  CHECK((sample_covariance(X) - sigma).norm() / sigma.norm() <= 0.15);
}

TEST_CASE("standard GFF design") {
  const DesignSpec spec = standard_gff_design(200);
  Rng rng = make_rng(5);
  const GffSample s = gff_sample(spec, rng);
  CHECK(s.data.samples() == 200);
  CHECK(s.data.features() == 100);
  CHECK(s.graph.size() == 100);
  // Mass is the fifth smallest Laplacian eigenvalue (four blocks).
  const auto sp = spectrum(laplacian(s.graph));
  CHECK(s.mass == doctest::Approx(sp.eigenvalues(4)));
  CHECK(s.mass > 0.0);
  REQUIRE(s.data.beta_true);
  CHECK((s.data.beta_true->array() != 0.0).count() == 56);
}

TEST_CASE("RBLW shrinkage weight") {
  Rng rng = make_rng(6);
  std::normal_distribution<double> z;
  auto draw = [&](Eigen::Index n, Eigen::Index p) {
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < p; ++j) X(i, j) = z(rng);
    return X;
  };

  // Closed form recomputed independently.
  const Eigen::MatrixXd X = draw(40, 8);
  const Eigen::MatrixXd S = sample_covariance(X);
  const double n = 40.0, p = 8.0;
  const double tr = S.trace(), tr2 = (S * S).trace();
  const double rho = std::clamp(((n - 2.0) / n * tr2 + tr * tr) / ((n + 2.0) * (tr2 - tr * tr / p)), 0.0, 1.0);
  const auto est = rblw_shrinkage(X);
  CHECK(est.weight == doctest::Approx(rho).epsilon(1e-12));
  const Eigen::MatrixXd expected = (1.0 - rho) * S + rho * tr / p * Eigen::MatrixXd::Identity(8, 8);
  CHECK((est.covariance - expected).cwiseAbs().maxCoeff() <= 1e-12);

  // Far from the spherical target with n >> p: little shrinkage.
  Eigen::MatrixXd skewed = draw(5000, 5);
  for (Eigen::Index j = 0; j < 5; ++j) skewed.col(j) *= static_cast<double>(j + 1);
  CHECK(rblw_shrinkage(skewed).weight < 0.05);

  // n = 2 leaves S rank one, so the weight is 1 / (4 (1 - 1/p)).
  const auto tiny = rblw_shrinkage(draw(2, 50));
  CHECK(tiny.weight == doctest::Approx(1.0 / (4.0 * (1.0 - 1.0 / 50.0))).epsilon(1e-10));

  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> nn(2, 30), pp(2, 15);
    const auto e = rblw_shrinkage(draw(nn(rng), pp(rng)));
    CHECK(e.weight >= 0.0);
    CHECK(e.weight <= 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e.covariance);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }

  Eigen::MatrixXd constant = draw(10, 3);
  constant.col(1).setConstant(2.0);
  CHECK_THROWS_AS(rblw_shrinkage(constant), ValidationError);
  CHECK_THROWS_AS(rblw_shrinkage(draw(1, 3)), ValidationError);
}

TEST_CASE("correlation from covariance") {
  const Eigen::MatrixXd d = Eigen::Vector3d(2.0, 3.0, 0.5).asDiagonal();
  CHECK(correlation_from_covariance(d).isIdentity());

  Eigen::Matrix2d s;
  s << 4, 2, 2, 1;
  CHECK(correlation_from_covariance(s)(0, 1) == doctest::Approx(1.0));

  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd a = Eigen::MatrixXd::Random(6, 6);
    const Eigen::MatrixXd r = correlation_from_covariance(a * a.transpose() + 0.01 * Eigen::MatrixXd::Identity(6, 6));
    CHECK(r.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    CHECK(r.diagonal().isOnes(1e-14));
  }
  Eigen::Matrix2d bad;
  bad << 1, 0, 0, 0;
  CHECK_THROWS_AS(correlation_from_covariance(bad), ValidationError);
}

TEST_CASE("type-7 quantile") {
  CHECK(quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({4, 1, 3, 2}, 0.0) == 1.0);
  CHECK(quantile({4, 1, 3, 2}, 1.0) == 4.0);
  CHECK(quantile({1, 2, 3, 4}, 0.75) == doctest::Approx(3.25));
  CHECK(quantile({7}, 0.3) == 7.0);
  CHECK_THROWS_AS(quantile({}, 0.5), ValidationError);
  CHECK_THROWS_AS(quantile({1, 2}, 1.5), ValidationError);
}

TEST_CASE("graph estimation by thresholding") {
  CHECK(estimate_graph(Eigen::MatrixXd::Identity(6, 6)).edge_count() == 0);

  // Four equal blocks: 77% of pairs are zero, so the 0.75 quantile is 0.
  const Graph four = estimate_graph(block_correlation(4, 10, 0.9), 0.75);
  CHECK(four.edge_count() == 4 * 45);
  const auto labels = component_labels(four);
  for (std::size_t i = 0; i < 40; ++i) CHECK(labels[i] == i / 10);

  // Two equal blocks: about half the pairs are zero.
  const Graph two = estimate_graph(block_correlation(2, 10, 0.9), 0.4);
  CHECK(two.edge_count() == 2 * 45);
  CHECK(spectral_gap(spectrum(laplacian(two)), 1e-8).components == 2);

  CHECK_THROWS_AS(estimate_graph(Eigen::MatrixXd::Identity(1, 1)), ValidationError);
}

TEST_CASE("graph estimation is permutation equivariant") {
  Rng rng = make_rng(8);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(12, 12);
  const Eigen::MatrixXd r = correlation_from_covariance(a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(12, 12));
  std::vector<std::size_t> perm(12);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd pr(12, 12);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) pr(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j])) = r(i, j);
  CHECK(estimate_graph(pr).edges() == estimate_graph(r).relabeled(perm).edges());
}

TEST_CASE("graph estimation at large n refines the block partition") {
  // The 0.75 level keeps 1238 of 4950 pairs: all 1176 pairs of the three
  // strongest blocks plus about 62 of the 190 pairs of the rho = 0.4 block.
  int strong_connected = 0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng = make_rng(100 + static_cast<std::uint64_t>(seed));
    const Dataset d = sample_design(standard_block_design(2000), rng);
    const Graph g = estimate_graph(correlation_from_covariance(rblw_shrinkage(d.X).covariance));
    const auto& truth = d.groups_true->labels();
    bool within_only = true;
    for (const auto& [u, v] : g.edges()) within_only = within_only && truth[u] == truth[v];
    CHECK(within_only);
    const auto labels = component_labels(g);
    bool connected = true;
    for (std::size_t i = 1; i < 80; ++i)
      if (truth[i] == truth[i - 1]) connected = connected && labels[i] == labels[i - 1];
    strong_connected += connected;
  }
  CHECK(strong_connected >= 19);
}

TEST_CASE("dataset CSV round trip") {
  Rng rng = make_rng(9);
  DesignSpec spec = standard_block_design(30);
  const Dataset d = sample_design(spec, rng);
  const auto dir = std::filesystem::temp_directory_path() / "heatpen_design_test";
  std::filesystem::create_directories(dir);
  write_dataset(d, dir / "d.csv", dir / "d.json", R"({"note": "x"})");
  const Dataset back = read_dataset(dir / "d.csv", dir / "d.json");
  CHECK(back.X == d.X);
  CHECK(back.y == d.y);
  REQUIRE(back.beta_true);
  CHECK(*back.beta_true == *d.beta_true);
  REQUIRE(back.groups_true);
  CHECK(back.groups_true->labels() == d.groups_true->labels());
  CHECK(back.sigma_noise == d.sigma_noise);

  const Dataset bare = read_dataset(dir / "d.csv");
  CHECK_FALSE(bare.beta_true);
  CHECK(bare.X == d.X);
  std::filesystem::remove_all(dir);
}

TEST_CASE("row selection") {
  Rng rng = make_rng(10);
  const Dataset d = sample_design(standard_block_design(10), rng);
  auto [a, b] = split_rows(d, 7);
  CHECK(a.samples() == 7);
  CHECK(b.samples() == 3);
  CHECK(b.X.row(0) == d.X.row(7));
  CHECK(*b.beta_true == *d.beta_true);
  const std::vector<std::size_t> rows{9, 0};
  const Dataset s = select_rows(d, rows);
  CHECK(s.y(0) == d.y(9));
  CHECK(s.y(1) == d.y(0));
  CHECK_THROWS_AS(split_rows(d, 11), ValidationError);

  Dataset bad = d;
  bad.y.conservativeResize(5);
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
