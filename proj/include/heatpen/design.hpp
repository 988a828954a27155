#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "heatpen/graph.hpp"
#include "heatpen/penalty.hpp"
#include "heatpen/rng.hpp"

namespace heatpen {

struct Dataset {
  Eigen::MatrixXd X;  // n x p
  Eigen::VectorXd y;  // n
  std::optional<Eigen::VectorXd> beta_true;
  std::optional<GroupStructure> groups_true;
  double sigma_noise = 0.0;

  std::size_t samples() const noexcept { return static_cast<std::size_t>(X.rows()); }
  std::size_t features() const noexcept { return static_cast<std::size_t>(X.cols()); }

  /// Throws ValidationError if X, y, beta_true and groups_true disagree.
  void validate() const;
};

/// Rows [0, n_first) and [n_first, n) as two datasets sharing the truth.
std::pair<Dataset, Dataset> split_rows(const Dataset& data, std::size_t n_first);

/// Rows picked by index, truth carried over.
Dataset select_rows(const Dataset& data, std::span<const std::size_t> rows);

/// Coefficient range for one group; lo == hi == 0 means the group is inactive.
struct UniformRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct BlockGaussian {
  std::vector<std::size_t> sizes;
  std::vector<double> rhos;  // equicorrelation per block
};

struct GaussianFreeField {
  std::vector<std::size_t> sizes;
  double within = 0.5;
  double between = 0.025;
};

struct DesignSpec {
  std::variant<BlockGaussian, GaussianFreeField> kind;
  std::size_t n = 200;
  std::vector<UniformRange> beta_rule;  // one entry per group
  double noise_sigma = 0.35;
  std::uint64_t seed = 0;

  const std::vector<std::size_t>& sizes() const;
  std::size_t features() const;
  void validate() const;
};

/// Group sizes and correlations of the block-diagonal experiment.
DesignSpec standard_block_design(std::size_t n = 200, double noise_sigma = 0.35);
/// SBM / GFF experiment over the same group sizes.
DesignSpec standard_gff_design(std::size_t n = 200, double noise_sigma = 0.35);

/// Coefficient pattern: U(0.5, 0.7), 0, U(-0.7, -0.5), 0 over four groups.
std::vector<UniformRange> standard_beta_rule();

/// Draws beta* group by group from the rule.
Eigen::VectorXd sample_beta(std::span<const std::size_t> sizes, std::span<const UniformRange> rule,
                            Rng& rng);

/// Equicorrelation block-diagonal covariance.
Eigen::MatrixXd block_covariance(const BlockGaussian& design);

/// Rows N(0, Sigma) with block-diagonal equicorrelation Sigma; y = X beta* + noise.
Dataset block_gaussian_sample(const DesignSpec& spec, Rng& rng);

struct GffSample {
  Dataset data;
  Graph graph;
  double mass = 0.0;  // theta
};

/// Samples an SBM graph, then rows with precision L + theta I where theta
/// is the (k+1)-th smallest Laplacian eigenvalue (k = number of blocks).
GffSample gff_sample(const DesignSpec& spec, Rng& rng);

/// Rows with precision L + theta I for a given graph. theta must be > 0.
Eigen::MatrixXd gff_rows(const Graph& g, double theta, std::size_t n, Rng& rng);

/// Generates a dataset for either design kind.
Dataset sample_design(const DesignSpec& spec, Rng& rng);

struct ShrinkageEstimate {
  Eigen::MatrixXd covariance;
  double weight = 0.0;  // rho, in [0, 1]
};

/// Rao-Blackwellized Ledoit-Wolf shrinkage toward (tr(S)/p) I.
ShrinkageEstimate rblw_shrinkage(const Eigen::MatrixXd& X);

Eigen::MatrixXd correlation_from_covariance(const Eigen::MatrixXd& sigma);

/// Type-7 (linear interpolation) sample quantile, level in [0, 1].
double quantile(std::vector<double> values, double level);

/// Joins i and j when |R_ij| is strictly above the `level` quantile of the
/// strict upper-triangle |R_ij| values.
Graph estimate_graph(const Eigen::MatrixXd& correlation, double level = 0.75);

// CSV: header x1..xp,y then one row per sample. Sidecar JSON holds beta_true,
// groups_true, sigma_noise and any extra metadata passed in.
void write_dataset(const Dataset& data, const std::filesystem::path& csv_path,
                   const std::filesystem::path& json_path, const std::string& extra_json = "{}");
Dataset read_dataset(const std::filesystem::path& csv_path,
                     const std::optional<std::filesystem::path>& json_path = std::nullopt);

}  // namespace heatpen
