#include "heatpen/heatflow.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "heatpen/errors.hpp"
#include "heatpen/parallel.hpp"
#include "heatpen/rng.hpp"

namespace heatpen {

namespace {
constexpr std::array<char, 8> kMagic = {'H', 'E', 'A', 'T', 'F', 'L', 'W', '1'};
}

HeatFlowMatrix::HeatFlowMatrix(std::size_t p, std::size_t walks, double t, std::uint64_t seed,
                               std::vector<Vertex> endpoints, std::uint64_t total_steps)
    : p_(p), walks_(walks), t_(t), seed_(seed), total_steps_(total_steps),
      endpoints_(std::move(endpoints)) {
  if (endpoints_.size() != p_ * walks_) {
    throw ValidationError("heat flow: endpoint table has wrong size");
  }
  for (Vertex v : endpoints_) {
    if (v >= p_) throw ValidationError("heat flow: endpoint out of range");
  }
}

double HeatFlowMatrix::mean_steps() const noexcept {
  const auto cells = static_cast<double>(p_ * walks_);
  return cells == 0 ? 0.0 : static_cast<double>(total_steps_) / cells;
}

void HeatFlowMatrix::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("heat flow: cannot open " + path.string() + " for writing");
  const std::uint64_t header[] = {static_cast<std::uint64_t>(p_), static_cast<std::uint64_t>(walks_)};
  out.write(kMagic.data(), kMagic.size());
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(&t_), sizeof(t_));
  out.write(reinterpret_cast<const char*>(&seed_), sizeof(seed_));
  out.write(reinterpret_cast<const char*>(&total_steps_), sizeof(total_steps_));
  out.write(reinterpret_cast<const char*>(endpoints_.data()),
            static_cast<std::streamsize>(endpoints_.size() * sizeof(Vertex)));
  if (!out) throw std::runtime_error("heat flow: write failed for " + path.string());
}

HeatFlowMatrix HeatFlowMatrix::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("heat flow: cannot open " + path.string());
  std::array<char, 8> magic{};
  std::uint64_t header[2] = {0, 0};
  double t = 0.0;
  std::uint64_t seed = 0, steps = 0;
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  in.read(reinterpret_cast<char*>(&t), sizeof(t));
  in.read(reinterpret_cast<char*>(&seed), sizeof(seed));
  in.read(reinterpret_cast<char*>(&steps), sizeof(steps));
  if (!in || magic != kMagic) throw ValidationError("heat flow: bad cache header in " + path.string());
  std::vector<Vertex> endpoints(header[0] * header[1]);
  in.read(reinterpret_cast<char*>(endpoints.data()),
          static_cast<std::streamsize>(endpoints.size() * sizeof(Vertex)));
  if (!in) throw ValidationError("heat flow: truncated cache " + path.string());
  return {header[0], header[1], t, seed, std::move(endpoints), steps};
}

HeatFlowMatrix simulate_heat_flow(const Graph& g, double t, std::size_t walks, std::uint64_t seed,
                                  unsigned threads) {
  if (!(t >= 0.0)) throw ValidationError("simulate_heat_flow: t must be >= 0");
  if (walks == 0) throw ValidationError("simulate_heat_flow: need at least one walk per vertex");
  const std::size_t p = g.size();
  std::vector<Vertex> endpoints(p * walks);
  std::vector<std::uint64_t> steps_per_row(p, 0);

  parallel_for(p, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint64_t row_seed = derive_seed(seed, i);
      std::uint64_t steps = 0;
      for (std::size_t j = 0; j < walks; ++j) {
        SplitMix64 gen(derive_seed(row_seed, j));
        auto here = static_cast<Vertex>(i);
        double clock = 0.0;
        while (true) {
          const std::size_t deg = g.degree(here);
          if (deg == 0) break;
          clock += gen.exponential(static_cast<double>(deg));
          if (clock >= t) break;
          here = g.neighbors(here)[gen.below(deg)];
          ++steps;
        }
        endpoints[i * walks + j] = here;
      }
      steps_per_row[i] = steps;
    }
  });

  const std::uint64_t total = std::accumulate(steps_per_row.begin(), steps_per_row.end(), std::uint64_t{0});
  return {p, walks, t, seed, std::move(endpoints), total};
}

std::vector<double> apply_heatflow(const HeatFlowMatrix& h, std::span<const double> f,
                                   std::span<const std::size_t> subset) {
  if (f.size() != h.vertices()) {
    throw ValidationError("apply_heatflow: vector length " + std::to_string(f.size()) +
                          " does not match p=" + std::to_string(h.vertices()));
  }
  std::vector<double> out;
  out.reserve(subset.size());
  const double inv = 1.0 / static_cast<double>(h.walks());
  for (std::size_t i : subset) {
    if (i >= h.vertices()) {
      throw ValidationError("apply_heatflow: index " + std::to_string(i) + " out of range");
    }
    double acc = 0.0;
    for (Vertex v : h.row(i)) acc += f[v];
    out.push_back(acc * inv);
  }
  return out;
}

Eigen::VectorXd apply_heatflow(const HeatFlowMatrix& h, const Eigen::VectorXd& f) {
  if (static_cast<std::size_t>(f.size()) != h.vertices()) {
    throw ValidationError("apply_heatflow: vector length does not match p");
  }
  const std::size_t p = h.vertices();
  const double inv = 1.0 / static_cast<double>(h.walks());
  Eigen::VectorXd out(static_cast<Eigen::Index>(p));
  const double* data = f.data();
  for (std::size_t i = 0; i < p; ++i) {
    double acc = 0.0;
    for (Vertex v : h.row(i)) acc += data[v];
    out(static_cast<Eigen::Index>(i)) = acc * inv;
  }
  return out;
}

Eigen::VectorXd exact_heat_kernel_apply(const LaplacianSpectrum& spec, double t,
                                        const Eigen::VectorXd& f) {
  if (f.size() != spec.eigenvalues.size()) {
    throw ValidationError("exact_heat_kernel_apply: dimension mismatch");
  }
  const Eigen::VectorXd coeffs = spec.eigenvectors.transpose() * f;
  Eigen::VectorXd decay;
  if (std::isinf(t) && t > 0) {
    // Projection onto the kernel: the per-component stationary average.
    const double tol = default_zero_tol(spec);
    decay = (spec.eigenvalues.array() < tol).cast<double>().matrix();
  } else {
    decay = (-t * spec.eigenvalues.array()).exp().matrix();
  }
  return spec.eigenvectors * coeffs.cwiseProduct(decay);
}

}  // namespace heatpen
