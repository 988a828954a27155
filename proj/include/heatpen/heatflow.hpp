#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "heatpen/graph.hpp"

namespace heatpen {

/// Endpoints of B continuous-time random walks from every vertex, all run
/// to the same time t. Entry (i, j) is where walk j started at vertex i sits
/// at time t. Immutable once built.
class HeatFlowMatrix {
 public:
  HeatFlowMatrix() = default;
  HeatFlowMatrix(std::size_t p, std::size_t walks, double t, std::uint64_t seed,
                 std::vector<Vertex> endpoints, std::uint64_t total_steps);

  std::size_t vertices() const noexcept { return p_; }
  std::size_t walks() const noexcept { return walks_; }
  double time() const noexcept { return t_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t total_steps() const noexcept { return total_steps_; }

  /// Mean number of jumps per walk.
  double mean_steps() const noexcept;

  std::span<const Vertex> row(std::size_t i) const noexcept {
    return {endpoints_.data() + i * walks_, walks_};
  }
  Vertex at(std::size_t i, std::size_t j) const noexcept { return endpoints_[i * walks_ + j]; }

  // Binary cache: magic, p, B, t, seed, total_steps, then row-major endpoints.
  void save(const std::filesystem::path& path) const;
  static HeatFlowMatrix load(const std::filesystem::path& path);

 private:
  std::size_t p_ = 0;
  std::size_t walks_ = 0;
  double t_ = 0.0;
  std::uint64_t seed_ = 0;
  std::uint64_t total_steps_ = 0;
  std::vector<Vertex> endpoints_;
};

/// Runs the walks. Each walk holds at its current vertex for an
/// Exponential(degree) time, then jumps to a uniform neighbor; a jump whose
/// clock rings after t is not taken. Every (i, j) cell draws from its own
/// generator derived from (seed, i, j), so results do not depend on
/// `threads`.
HeatFlowMatrix simulate_heat_flow(const Graph& g, double t, std::size_t walks, std::uint64_t seed,
                                  unsigned threads = 1);

/// Monte Carlo estimate of (e^{-tL} f)_i for each i in `subset`; the result
/// is aligned with `subset`.
std::vector<double> apply_heatflow(const HeatFlowMatrix& h, std::span<const double> f,
                                   std::span<const std::size_t> subset);

/// Same estimate over every vertex.
Eigen::VectorXd apply_heatflow(const HeatFlowMatrix& h, const Eigen::VectorXd& f);

/// Exact e^{-tL} f through the eigendecomposition of L.
Eigen::VectorXd exact_heat_kernel_apply(const LaplacianSpectrum& spec, double t,
                                        const Eigen::VectorXd& f);

}  // namespace heatpen
