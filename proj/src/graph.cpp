#include "heatpen/graph.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>

#include "heatpen/errors.hpp"

namespace heatpen {

Graph::Graph(std::size_t p) : offsets_(p + 1, 0) {}

Graph Graph::from_edges(std::size_t p, std::span<const Edge> edges) {
  if (p > static_cast<std::size_t>(std::numeric_limits<Vertex>::max())) {
    throw ValidationError("graph: vertex count exceeds 32-bit ids");
  }
  std::vector<std::vector<Vertex>> lists(p);
  for (const auto& [u, v] : edges) {
    if (u >= p || v >= p) {
      throw ValidationError("graph: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                            ") out of range for p=" + std::to_string(p));
    }
    if (u == v) {
      throw ValidationError("graph: self-loop at vertex " + std::to_string(u));
    }
    lists[u].push_back(v);
    lists[v].push_back(u);
  }

  Graph g(p);
  std::size_t total = 0;
  for (std::size_t i = 0; i < p; ++i) {
    auto& l = lists[i];
    std::sort(l.begin(), l.end());
    if (std::adjacent_find(l.begin(), l.end()) != l.end()) {
      throw ValidationError("graph: duplicate edge at vertex " + std::to_string(i));
    }
    total += l.size();
    g.offsets_[i + 1] = total;
  }
  g.targets_.reserve(total);
  for (const auto& l : lists) g.targets_.insert(g.targets_.end(), l.begin(), l.end());
  return g;
}

Graph Graph::from_adjacency(const Eigen::MatrixXi& adjacency) {
  if (adjacency.rows() != adjacency.cols()) {
    throw ValidationError("graph: adjacency matrix must be square");
  }
  const auto p = static_cast<std::size_t>(adjacency.rows());
  std::vector<Edge> edges;
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i) {
    if (adjacency(i, i) != 0) throw ValidationError("graph: nonzero adjacency diagonal");
    for (Eigen::Index j = i + 1; j < adjacency.cols(); ++j) {
      if (adjacency(i, j) != adjacency(j, i)) {
        throw ValidationError("graph: adjacency matrix is not symmetric");
      }
      if (adjacency(i, j) != 0) edges.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(j));
    }
  }
  return from_edges(p, edges);
}

std::size_t Graph::max_degree() const noexcept {
  std::size_t best = 0;
  for (std::size_t v = 0; v < size(); ++v) best = std::max(best, degree(static_cast<Vertex>(v)));
  return best;
}

double Graph::mean_degree() const noexcept {
  return size() == 0 ? 0.0 : static_cast<double>(targets_.size()) / static_cast<double>(size());
}

bool Graph::has_edge(Vertex u, Vertex v) const noexcept {
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count());
  for (std::size_t u = 0; u < size(); ++u) {
    for (Vertex v : neighbors(static_cast<Vertex>(u))) {
      if (u < v) out.emplace_back(static_cast<Vertex>(u), v);
    }
  }
  return out;
}

Graph Graph::relabeled(std::span<const std::size_t> perm) const {
  if (perm.size() != size()) throw ValidationError("graph: permutation size mismatch");
  std::vector<Edge> mapped;
  mapped.reserve(edge_count());
  for (const auto& [u, v] : edges()) {
    mapped.emplace_back(static_cast<Vertex>(perm[u]), static_cast<Vertex>(perm[v]));
  }
  return from_edges(size(), mapped);
}

std::vector<std::size_t> component_labels(const Graph& g) {
  constexpr auto unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> label(g.size(), unset);
  std::size_t next = 0;
  std::queue<Vertex> frontier;
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (label[s] != unset) continue;
    label[s] = next;
    frontier.push(static_cast<Vertex>(s));
    while (!frontier.empty()) {
      const Vertex u = frontier.front();
      frontier.pop();
      for (Vertex v : g.neighbors(u)) {
        if (label[v] == unset) {
          label[v] = next;
          frontier.push(v);
        }
      }
    }
    ++next;
  }
  return label;
}

Eigen::MatrixXd laplacian(const Graph& g) {
  const auto p = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto v = static_cast<Vertex>(i);
    L(i, i) = static_cast<double>(g.degree(v));
    for (Vertex j : g.neighbors(v)) L(i, j) = -1.0;
  }
  return L;
}

LaplacianSpectrum spectrum(const Eigen::MatrixXd& laplacian_matrix) {
  if (laplacian_matrix.rows() != laplacian_matrix.cols()) {
    throw ValidationError("spectrum: matrix must be square");
  }
  const double asym = (laplacian_matrix - laplacian_matrix.transpose()).cwiseAbs().maxCoeff();
  if (laplacian_matrix.size() > 0 && asym > 1e-12) {
    throw ValidationError("spectrum: matrix is not symmetric (max asymmetry " +
                          std::to_string(asym) + ")");
  }
  if (laplacian_matrix.size() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian_matrix);
  if (solver.info() != Eigen::Success) {
    throw ValidationError("spectrum: eigendecomposition failed");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

double default_zero_tol(const LaplacianSpectrum& spec) {
  return 1e-8 * std::max(1.0, spec.max_eigenvalue());
}

SpectralGap spectral_gap(const LaplacianSpectrum& spec, double zero_tol) {
  SpectralGap gap;
  for (Eigen::Index i = 0; i < spec.eigenvalues.size(); ++i) {
    const double lambda = spec.eigenvalues(i);
    if (lambda < zero_tol) {
      ++gap.components;
    } else if (!gap.lambda_g) {
      gap.lambda_g = lambda;
    }
  }
  return gap;
}

std::vector<std::size_t> block_labels(std::span<const std::size_t> sizes) {
  std::vector<std::size_t> labels;
  for (std::size_t b = 0; b < sizes.size(); ++b) labels.insert(labels.end(), sizes[b], b);
  return labels;
}

Graph sbm_sample(std::span<const std::size_t> sizes, double within, double between, Rng& rng) {
  if (!(within >= 0.0 && within <= 1.0) || !(between >= 0.0 && between <= 1.0)) {
    throw ValidationError("sbm_sample: probabilities must lie in [0, 1]");
  }
  const auto labels = block_labels(sizes);
  const std::size_t p = labels.size();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      const double prob = labels[i] == labels[j] ? within : between;
      if (unif(rng) < prob) edges.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(j));
    }
  }
  return Graph::from_edges(p, edges);
}

void write_edge_list(std::ostream& out, const Graph& g) {
  out << "# p " << g.size() << '\n';
  for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

Graph read_edge_list(std::istream& in) {
  std::optional<std::size_t> declared;
  std::vector<Edge> edges;
  std::size_t max_id = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line.front() == '#') {
      std::string hash, key;
      std::size_t value = 0;
      if (ls >> hash >> key >> value && key == "p") declared = value;
      continue;
    }
    long long u = -1, v = -1;
    if (!(ls >> u >> v) || u < 0 || v < 0) {
      throw ValidationError("edge list: malformed line " + std::to_string(lineno));
    }
    if (u >= v) {
      throw ValidationError("edge list: expected i < j on line " + std::to_string(lineno));
    }
    edges.emplace_back(static_cast<Vertex>(u), static_cast<Vertex>(v));
    max_id = std::max(max_id, static_cast<std::size_t>(v));
  }
  const std::size_t p = declared ? *declared : (edges.empty() ? 0 : max_id + 1);
  return Graph::from_edges(p, edges);
}

}  // namespace heatpen
