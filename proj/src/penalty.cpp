#include "heatpen/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "heatpen/errors.hpp"

namespace heatpen {

GroupStructure::GroupStructure(std::vector<std::size_t> labels) : labels_(std::move(labels)) {
  std::size_t k = 0;
  for (std::size_t l : labels_) k = std::max(k, l + 1);
  sizes_.assign(k, 0);
  for (std::size_t l : labels_) ++sizes_[l];
  for (std::size_t j = 0; j < k; ++j) {
    if (sizes_[j] == 0) {
      throw ValidationError("group structure: group " + std::to_string(j) + " is empty");
    }
  }
}

std::vector<std::size_t> GroupStructure::members(std::size_t j) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == j) out.push_back(i);
  }
  return out;
}

PenaltyEvaluator PenaltyEvaluator::monte_carlo(std::shared_ptr<const HeatFlowMatrix> heat_flow,
                                               double zero_guard) {
  if (!heat_flow) throw ValidationError("penalty: null heat flow matrix");
  if (!(zero_guard > 0.0)) throw ValidationError("penalty: zero guard must be positive");
  PenaltyEvaluator ev;
  ev.mode_ = Mode::monte_carlo;
  ev.t_ = heat_flow->time();
  ev.heat_flow_ = std::move(heat_flow);
  ev.zero_guard_ = zero_guard;
  return ev;
}

PenaltyEvaluator PenaltyEvaluator::exact(std::shared_ptr<const LaplacianSpectrum> spec, double t,
                                         double zero_guard) {
  if (!spec) throw ValidationError("penalty: null spectrum");
  if (!(t >= 0.0)) throw ValidationError("penalty: t must be >= 0");
  if (!(zero_guard > 0.0)) throw ValidationError("penalty: zero guard must be positive");
  PenaltyEvaluator ev;
  ev.mode_ = Mode::exact;
  ev.spec_ = std::move(spec);
  ev.t_ = t;
  ev.zero_guard_ = zero_guard;
  return ev;
}

std::size_t PenaltyEvaluator::dimension() const noexcept {
  return mode_ == Mode::monte_carlo ? heat_flow_->vertices() : spec_->size();
}

double PenaltyEvaluator::time() const noexcept { return t_; }

Eigen::VectorXd PenaltyEvaluator::apply(const Eigen::VectorXd& f) const {
  if (mode_ == Mode::monte_carlo) return apply_heatflow(*heat_flow_, f);
  return exact_heat_kernel_apply(*spec_, t_, f);
}

double PenaltyEvaluator::inverse_sqrt_link(double x) const noexcept {
  if (x == 0.0 || (x < 0.0 && x > -1e-15)) return 0.0;
  const double mag = std::max(std::abs(x), zero_guard_);
  return std::copysign(1.0 / std::sqrt(mag), x);
}

double heat_penalty_from_heat(const Eigen::VectorXd& heat) {
  return heat.array().abs().sqrt().sum();
}

double heat_penalty(const PenaltyEvaluator& ev, const Eigen::VectorXd& beta) {
  if (static_cast<std::size_t>(beta.size()) != ev.dimension()) {
    throw ValidationError("heat_penalty: beta has wrong length");
  }
  return heat_penalty_from_heat(ev.apply(beta.cwiseAbs2()));
}

Eigen::VectorXd heat_penalty_subgradient(const PenaltyEvaluator& ev, const Eigen::VectorXd& beta) {
  if (static_cast<std::size_t>(beta.size()) != ev.dimension()) {
    throw ValidationError("heat_penalty_subgradient: beta has wrong length");
  }
  const Eigen::VectorXd heat = ev.apply(beta.cwiseAbs2());
  Eigen::VectorXd zeta(heat.size());
  for (Eigen::Index j = 0; j < heat.size(); ++j) zeta(j) = ev.inverse_sqrt_link(heat(j));
  return ev.apply(zeta).cwiseProduct(beta);
}

double group_lasso_penalty(const GroupStructure& groups, const Eigen::VectorXd& beta) {
  if (static_cast<std::size_t>(beta.size()) != groups.size()) {
    throw ValidationError("group_lasso_penalty: beta has wrong length");
  }
  std::vector<double> sq(groups.groups(), 0.0);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    sq[groups.labels()[i]] += beta(static_cast<Eigen::Index>(i)) * beta(static_cast<Eigen::Index>(i));
  }
  double total = 0.0;
  for (std::size_t j = 0; j < sq.size(); ++j) {
    total += std::sqrt(static_cast<double>(groups.sizes()[j])) * std::sqrt(sq[j]);
  }
  return total;
}

GroupApproximationBound group_approximation_bound(const LaplacianSpectrum& spec, const GroupStructure& groups,
                         const Eigen::VectorXd& beta, double t) {
  const auto p = static_cast<Eigen::Index>(spec.size());
  if (static_cast<std::size_t>(p) != groups.size() || beta.size() != p) {
    throw ValidationError("group_approximation_bound: dimension mismatch");
  }
  const double tol = 1e-8 * std::max(1.0, spec.max_eigenvalue());
  const SpectralGap gap = spectral_gap(spec, tol);
  if (gap.components != groups.groups()) {
    throw ValidationError("group_approximation_bound: graph has " + std::to_string(gap.components) +
                          " components but " + std::to_string(groups.groups()) + " groups were given");
  }
  const auto kernel = spec.eigenvectors.leftCols(static_cast<Eigen::Index>(gap.components));
  for (std::size_t j = 0; j < groups.groups(); ++j) {
    Eigen::VectorXd indicator = Eigen::VectorXd::Zero(p);
    for (std::size_t i : groups.members(j)) indicator(static_cast<Eigen::Index>(i)) = 1.0;
    const Eigen::VectorXd residual = indicator - kernel * (kernel.transpose() * indicator);
    if (residual.norm() > 1e-6 * std::sqrt(static_cast<double>(p))) {
      throw ValidationError("group_approximation_bound: group " + std::to_string(j) +
                            " is not a connected component of the graph");
    }
  }

  GroupApproximationBound out;
  if (gap.lambda_g) {
    out.xi = std::exp(-t * *gap.lambda_g) * beta.cwiseAbs2().norm();
  } else {
    // Every component is a single vertex: e^{-tL} is the identity.
    out.xi = 0.0;
  }
  out.bound = static_cast<double>(p) * std::sqrt(out.xi);

  double min_ratio = std::numeric_limits<double>::infinity();
  std::vector<double> sq(groups.groups(), 0.0);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    sq[groups.labels()[i]] += beta(static_cast<Eigen::Index>(i)) * beta(static_cast<Eigen::Index>(i));
  }
  for (std::size_t j = 0; j < sq.size(); ++j) {
    if (sq[j] != 0.0) min_ratio = std::min(min_ratio, sq[j] / static_cast<double>(groups.sizes()[j]));
  }
  out.condition_holds = out.xi <= 0.5 * min_ratio;
  return out;
}

}  // namespace heatpen
