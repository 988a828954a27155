#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "heatpen/graph.hpp"
#include "heatpen/heatflow.hpp"

namespace heatpen {

/// Partition of the p coordinates into k labeled groups.
class GroupStructure {
 public:
  GroupStructure() = default;

  /// Labels must cover 0..k-1 with every group nonempty.
  explicit GroupStructure(std::vector<std::size_t> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t groups() const noexcept { return sizes_.size(); }
  const std::vector<std::size_t>& labels() const noexcept { return labels_; }
  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }

  /// Coordinates belonging to group j, ascending.
  std::vector<std::size_t> members(std::size_t j) const;

 private:
  std::vector<std::size_t> labels_;
  std::vector<std::size_t> sizes_;
};

/// Evaluates e^{-tL} either with a fixed table of random-walk endpoints or
/// exactly through the Laplacian eigendecomposition. Cheap to copy; the
/// underlying data is shared and immutable.
class PenaltyEvaluator {
 public:
  enum class Mode { monte_carlo, exact };

  static constexpr double kDefaultZeroGuard = 1e-12;

  static PenaltyEvaluator monte_carlo(std::shared_ptr<const HeatFlowMatrix> heat_flow,
                                      double zero_guard = kDefaultZeroGuard);
  static PenaltyEvaluator exact(std::shared_ptr<const LaplacianSpectrum> spec, double t,
                                double zero_guard = kDefaultZeroGuard);

  Mode mode() const noexcept { return mode_; }
  std::size_t dimension() const noexcept;
  double time() const noexcept;
  double zero_guard() const noexcept { return zero_guard_; }

  /// Null in exact mode.
  const HeatFlowMatrix* heat_flow() const noexcept { return heat_flow_.get(); }
  const LaplacianSpectrum* spectrum() const noexcept { return spec_.get(); }

  /// e^{-tL} f (estimated in Monte Carlo mode).
  Eigen::VectorXd apply(const Eigen::VectorXd& f) const;

  /// l(x) = sgn(x) / sqrt(|x|) with |x| floored at the zero guard. Zero and
  /// rounding-level negatives (above -1e-15) map to 0.
  double inverse_sqrt_link(double x) const noexcept;

 private:
  Mode mode_ = Mode::exact;
  std::shared_ptr<const HeatFlowMatrix> heat_flow_;
  std::shared_ptr<const LaplacianSpectrum> spec_;
  double t_ = 0.0;
  double zero_guard_ = kDefaultZeroGuard;
};

/// Heat-flow penalty: sum_i sqrt(|h_i|) with h = e^{-tL}(beta * beta).
double heat_penalty(const PenaltyEvaluator& ev, const Eigen::VectorXd& beta);

/// Same value when h has already been computed.
double heat_penalty_from_heat(const Eigen::VectorXd& heat);

/// (e^{-tL} zeta) * beta with zeta_j = l(h_j), h = e^{-tL}(beta * beta).
Eigen::VectorXd heat_penalty_subgradient(const PenaltyEvaluator& ev, const Eigen::VectorXd& beta);

/// sum_j sqrt(T_j) * ||beta_{C_j}||_2.
double group_lasso_penalty(const GroupStructure& groups, const Eigen::VectorXd& beta);

struct GroupApproximationBound {
  double xi = 0.0;      // e^{-t lambda_g} * ||beta * beta||_2
  double bound = 0.0;   // p * sqrt(xi)
  bool condition_holds = false;
};

/// Bound on |heat penalty - group lasso penalty| for a graph whose connected
/// components are exactly the given groups. The component check uses the
/// kernel of the spectrum: every group indicator must lie in it and its
/// dimension must equal the number of groups.
GroupApproximationBound group_approximation_bound(const LaplacianSpectrum& spec, const GroupStructure& groups,
                         const Eigen::VectorXd& beta, double t);

}  // namespace heatpen
