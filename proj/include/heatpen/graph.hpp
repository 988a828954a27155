#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "heatpen/rng.hpp"

namespace heatpen {

using Vertex = std::uint32_t;
using Edge = std::pair<Vertex, Vertex>;

/// Undirected simple graph in compressed adjacency form. Neighbor lists are
/// sorted and symmetric; there are no self-loops or parallel edges.
class Graph {
 public:
  Graph() = default;

  /// Empty graph (no edges) on p vertices.
  explicit Graph(std::size_t p);

  /// Builds from an edge list. Edges may be given in either orientation;
  /// self-loops, duplicates and out-of-range endpoints raise ValidationError.
  static Graph from_edges(std::size_t p, std::span<const Edge> edges);

  /// Builds from a dense 0/1 adjacency matrix (must be symmetric with a zero
  /// diagonal).
  static Graph from_adjacency(const Eigen::MatrixXi& adjacency);

  std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t edge_count() const noexcept { return targets_.size() / 2; }

  std::span<const Vertex> neighbors(Vertex v) const noexcept {
    return {targets_.data() + offsets_[v], targets_.data() + offsets_[v + 1]};
  }
  std::size_t degree(Vertex v) const noexcept { return offsets_[v + 1] - offsets_[v]; }
  std::size_t max_degree() const noexcept;
  double mean_degree() const noexcept;

  bool has_edge(Vertex u, Vertex v) const noexcept;

  /// Edges with first < second, in lexicographic order.
  std::vector<Edge> edges() const;

  /// Graph with vertex v relabeled to perm[v].
  Graph relabeled(std::span<const std::size_t> perm) const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Vertex> targets_;
};

/// Connected-component label per vertex, labels numbered in order of first
/// appearance.
std::vector<std::size_t> component_labels(const Graph& g);

/// Dense combinatorial Laplacian D - A.
Eigen::MatrixXd laplacian(const Graph& g);

struct LaplacianSpectrum {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // column i pairs with eigenvalues[i]

  std::size_t size() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
  double max_eigenvalue() const { return eigenvalues.size() ? eigenvalues(eigenvalues.size() - 1) : 0.0; }
};

/// Dense symmetric eigendecomposition. Raises ValidationError when the input is
/// not square or not symmetric within 1e-12.
LaplacianSpectrum spectrum(const Eigen::MatrixXd& laplacian_matrix);

/// 1e-8 * max(1, largest eigenvalue).
double default_zero_tol(const LaplacianSpectrum& spec);

struct SpectralGap {
  std::size_t components = 0;      // eigenvalues below the zero tolerance
  std::optional<double> lambda_g;  // first eigenvalue at or above it
};

SpectralGap spectral_gap(const LaplacianSpectrum& spec, double zero_tol);

/// Stochastic block model: vertices are assigned to consecutive blocks of the
/// given sizes; each unordered pair is joined independently with probability
/// `within` (same block) or `between`. No self-loops.
Graph sbm_sample(std::span<const std::size_t> sizes, double within, double between, Rng& rng);

/// Block label per vertex for consecutive blocks of the given sizes.
std::vector<std::size_t> block_labels(std::span<const std::size_t> sizes);

// Edge-list text format: optional "# p <count>" header, then one "i j" pair
// per line, 0-indexed, i < j. Without the header p is 1 + the largest id.
void write_edge_list(std::ostream& out, const Graph& g);
Graph read_edge_list(std::istream& in);

}  // namespace heatpen
