#include "heatpen/design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "heatpen/errors.hpp"

namespace heatpen {

void Dataset::validate() const {
  if (y.size() != X.rows()) {
    throw ValidationError("dataset: X has " + std::to_string(X.rows()) + " rows but y has " +
                          std::to_string(y.size()) + " entries");
  }
  if (beta_true && beta_true->size() != X.cols()) {
    throw ValidationError("dataset: beta_true length does not match p");
  }
  if (groups_true && groups_true->size() != static_cast<std::size_t>(X.cols())) {
    throw ValidationError("dataset: groups_true length does not match p");
  }
}

Dataset select_rows(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = static_cast<Eigen::Index>(rows[r]);
    out.X.row(static_cast<Eigen::Index>(r)) = data.X.row(src);
    out.y(static_cast<Eigen::Index>(r)) = data.y(src);
  }
  out.beta_true = data.beta_true;
  out.groups_true = data.groups_true;
  out.sigma_noise = data.sigma_noise;
  return out;
}

std::pair<Dataset, Dataset> split_rows(const Dataset& data, std::size_t n_first) {
  if (n_first > data.samples()) throw ValidationError("split_rows: split point beyond n");
  std::vector<std::size_t> head(n_first), tail(data.samples() - n_first);
  std::iota(head.begin(), head.end(), std::size_t{0});
  std::iota(tail.begin(), tail.end(), n_first);
  return {select_rows(data, head), select_rows(data, tail)};
}

const std::vector<std::size_t>& DesignSpec::sizes() const {
  return std::visit([](const auto& k) -> const std::vector<std::size_t>& { return k.sizes; }, kind);
}

std::size_t DesignSpec::features() const {
  const auto& s = sizes();
  return std::accumulate(s.begin(), s.end(), std::size_t{0});
}

void DesignSpec::validate() const {
  const auto& s = sizes();
  if (s.empty()) throw ValidationError("design: no groups");
  if (std::find(s.begin(), s.end(), std::size_t{0}) != s.end()) {
    throw ValidationError("design: group sizes must be positive");
  }
  if (n == 0) throw ValidationError("design: n must be positive");
  if (beta_rule.size() != s.size()) {
    throw ValidationError("design: beta rule has " + std::to_string(beta_rule.size()) +
                          " entries for " + std::to_string(s.size()) + " groups");
  }
  for (const auto& r : beta_rule) {
    if (!(r.lo <= r.hi)) throw ValidationError("design: beta range with lo > hi");
  }
  if (!(noise_sigma >= 0.0)) throw ValidationError("design: noise sigma must be >= 0");
  if (const auto* bg = std::get_if<BlockGaussian>(&kind)) {
    if (bg->rhos.size() != s.size()) throw ValidationError("design: one rho per block required");
    for (std::size_t b = 0; b < s.size(); ++b) {
      const double rho = bg->rhos[b];
      const double lower = s[b] > 1 ? -1.0 / static_cast<double>(s[b] - 1) : -1.0;
      if (!(rho > lower && rho < 1.0)) {
        throw ValidationError("design: rho=" + std::to_string(rho) + " makes block " +
                              std::to_string(b) + " not positive definite");
      }
    }
  } else {
    const auto& gff = std::get<GaussianFreeField>(kind);
    if (!(gff.within >= 0 && gff.within <= 1 && gff.between >= 0 && gff.between <= 1)) {
      throw ValidationError("design: SBM probabilities must lie in [0, 1]");
    }
  }
}

std::vector<UniformRange> standard_beta_rule() {
  return {{0.5, 0.7}, {0.0, 0.0}, {-0.7, -0.5}, {0.0, 0.0}};
}

DesignSpec standard_block_design(std::size_t n, double noise_sigma) {
  DesignSpec spec;
  spec.kind = BlockGaussian{{16, 24, 40, 20}, {0.6, 0.9, 0.7, 0.4}};
  spec.n = n;
  spec.beta_rule = standard_beta_rule();
  spec.noise_sigma = noise_sigma;
  return spec;
}

DesignSpec standard_gff_design(std::size_t n, double noise_sigma) {
  DesignSpec spec;
  spec.kind = GaussianFreeField{{16, 24, 40, 20}, 0.5, 0.025};
  spec.n = n;
  spec.beta_rule = standard_beta_rule();
  spec.noise_sigma = noise_sigma;
  return spec;
}

Eigen::VectorXd sample_beta(std::span<const std::size_t> sizes, std::span<const UniformRange> rule,
                            Rng& rng) {
  if (rule.size() != sizes.size()) throw ValidationError("sample_beta: rule/group count mismatch");
  const std::size_t p = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  Eigen::Index i = 0;
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    const auto [lo, hi] = rule[b];
    const bool active = !(lo == 0.0 && hi == 0.0);
    std::uniform_real_distribution<double> unif(lo, hi);
    for (std::size_t c = 0; c < sizes[b]; ++c, ++i) {
      if (active) beta(i) = lo == hi ? lo : unif(rng);
    }
  }
  return beta;
}

Eigen::MatrixXd block_covariance(const BlockGaussian& design) {
  const std::size_t p = std::accumulate(design.sizes.begin(), design.sizes.end(), std::size_t{0});
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Eigen::Index start = 0;
  for (std::size_t b = 0; b < design.sizes.size(); ++b) {
    const auto d = static_cast<Eigen::Index>(design.sizes[b]);
    const double rho = design.rhos[b];
    sigma.block(start, start, d, d).setConstant(rho);
    sigma.block(start, start, d, d).diagonal().setOnes();
    start += d;
  }
  return sigma;
}

namespace {

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(rows, cols);
  // Row-major fill so a prefix of rows does not depend on the total count.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) z(r, c) = normal(rng);
  return z;
}

Dataset finish_response(Eigen::MatrixXd X, const DesignSpec& spec, Rng& rng) {
  Dataset data;
  data.beta_true = sample_beta(spec.sizes(), spec.beta_rule, rng);
  const Eigen::MatrixXd noise = standard_normal(X.rows(), 1, rng);
  data.y = X * *data.beta_true + spec.noise_sigma * noise.col(0);
  data.X = std::move(X);
  data.groups_true = GroupStructure(block_labels(spec.sizes()));
  data.sigma_noise = spec.noise_sigma;
  return data;
}

}  // namespace

Dataset block_gaussian_sample(const DesignSpec& spec, Rng& rng) {
  spec.validate();
  const auto* design = std::get_if<BlockGaussian>(&spec.kind);
  if (!design) throw ValidationError("block_gaussian_sample: design is not block Gaussian");
  const Eigen::MatrixXd sigma = block_covariance(*design);
  Eigen::LLT<Eigen::MatrixXd> chol(sigma);
  if (chol.info() != Eigen::Success) throw ValidationError("block_gaussian_sample: covariance not PD");
  const Eigen::MatrixXd z = standard_normal(static_cast<Eigen::Index>(spec.n), sigma.rows(), rng);
  // Rows x = R z with Sigma = R R^T.
  Eigen::MatrixXd X = z * chol.matrixL().transpose();
  return finish_response(std::move(X), spec, rng);
}

Eigen::MatrixXd gff_rows(const Graph& g, double theta, std::size_t n, Rng& rng) {
  if (!(theta > 0.0)) {
    throw ValidationError("gff: mass parameter must be positive (got " + std::to_string(theta) + ")");
  }
  Eigen::MatrixXd precision = laplacian(g);
  precision.diagonal().array() += theta;
  Eigen::LLT<Eigen::MatrixXd> chol(precision);
  if (chol.info() != Eigen::Success) throw ValidationError("gff: precision not positive definite");
  const auto p = static_cast<Eigen::Index>(g.size());
  const Eigen::MatrixXd z = standard_normal(static_cast<Eigen::Index>(n), p, rng);
  // Q = R R^T; x = R^{-T} z has covariance Q^{-1}. Solve for all rows at once.
  Eigen::MatrixXd xt = chol.matrixU().solve(z.transpose());
  return xt.transpose();
}

GffSample gff_sample(const DesignSpec& spec, Rng& rng) {
  spec.validate();
  const auto* design = std::get_if<GaussianFreeField>(&spec.kind);
  if (!design) throw ValidationError("gff_sample: design is not a Gaussian free field");
  GffSample out;
  out.graph = sbm_sample(design->sizes, design->within, design->between, rng);
  const LaplacianSpectrum spec_l = spectrum(laplacian(out.graph));
  const std::size_t k = design->sizes.size();
  if (spec_l.size() <= k) throw ValidationError("gff_sample: need more vertices than blocks");
  out.mass = spec_l.eigenvalues(static_cast<Eigen::Index>(k));
  if (!(out.mass > 1e-10)) {
    throw ValidationError("gff_sample: (k+1)-th Laplacian eigenvalue is zero; graph too fragmented");
  }
  out.data = finish_response(gff_rows(out.graph, out.mass, spec.n, rng), spec, rng);
  return out;
}

Dataset sample_design(const DesignSpec& spec, Rng& rng) {
  if (std::holds_alternative<BlockGaussian>(spec.kind)) return block_gaussian_sample(spec, rng);
  return gff_sample(spec, rng).data;
}

ShrinkageEstimate rblw_shrinkage(const Eigen::MatrixXd& X) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (n < 2) throw ValidationError("rblw_shrinkage: need at least two samples");
  if (p < 1) throw ValidationError("rblw_shrinkage: need at least one column");
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mean;
  const Eigen::MatrixXd S = (centered.transpose() * centered) / static_cast<double>(n - 1);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(S(j, j) > 0.0)) {
      throw ValidationError("rblw_shrinkage: column " + std::to_string(j) + " has zero variance");
    }
  }
  const double nd = static_cast<double>(n);
  const double pd = static_cast<double>(p);
  const double tr = S.trace();
  const double tr2 = tr * tr;
  const double tr_sq = S.squaredNorm();  // tr(S^2) for symmetric S
  const double num = ((nd - 2.0) / nd) * tr_sq + tr2;
  const double den = (nd + 2.0) * (tr_sq - tr2 / pd);
  double rho = den > 0.0 ? num / den : 1.0;
  rho = std::clamp(rho, 0.0, 1.0);

  ShrinkageEstimate out;
  out.weight = rho;
  out.covariance = (1.0 - rho) * S;
  out.covariance.diagonal().array() += rho * tr / pd;
  return out;
}

Eigen::MatrixXd correlation_from_covariance(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols()) throw ValidationError("correlation: matrix must be square");
  const Eigen::VectorXd diag = sigma.diagonal();
  if ((diag.array() <= 0.0).any()) throw ValidationError("correlation: nonpositive diagonal entry");
  const Eigen::VectorXd inv_sd = diag.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd R = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
  R.diagonal().setOnes();
  return R;
}

double quantile(std::vector<double> values, double level) {
  if (values.empty()) throw ValidationError("quantile: empty input");
  if (!(level >= 0.0 && level <= 1.0)) throw ValidationError("quantile: level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = level * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Graph estimate_graph(const Eigen::MatrixXd& correlation, double level) {
  const auto p = correlation.rows();
  if (p != correlation.cols()) throw ValidationError("estimate_graph: matrix must be square");
  if (p < 2) throw ValidationError("estimate_graph: need p >= 2");
  std::vector<double> upper;
  upper.reserve(static_cast<std::size_t>(p * (p - 1) / 2));
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i + 1; j < p; ++j) upper.push_back(std::abs(correlation(i, j)));
  const double threshold = quantile(upper, level);
  std::vector<Edge> edges;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      if (std::abs(correlation(i, j)) > threshold) {
        edges.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(j));
      }
    }
  }
  return Graph::from_edges(static_cast<std::size_t>(p), edges);
}

void write_dataset(const Dataset& data, const std::filesystem::path& csv_path,
                   const std::filesystem::path& json_path, const std::string& extra_json) {
  data.validate();
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open " + csv_path.string() + " for writing");
  csv << std::setprecision(17);
  for (Eigen::Index j = 0; j < data.X.cols(); ++j) csv << 'x' << (j + 1) << ',';
  csv << "y\n";
  for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.X.cols(); ++j) csv << data.X(i, j) << ',';
    csv << data.y(i) << '\n';
  }
  if (!csv) throw std::runtime_error("write failed for " + csv_path.string());

  nlohmann::json meta = nlohmann::json::parse(extra_json);
  meta["n"] = data.samples();
  meta["p"] = data.features();
  meta["sigma_noise"] = data.sigma_noise;
  if (data.beta_true) {
    meta["beta_true"] = std::vector<double>(data.beta_true->data(),
                                            data.beta_true->data() + data.beta_true->size());
  }
  if (data.groups_true) meta["groups_true"] = data.groups_true->labels();
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("cannot open " + json_path.string() + " for writing");
  js << meta.dump(2) << '\n';
  if (!js) throw std::runtime_error("write failed for " + json_path.string());
}

Dataset read_dataset(const std::filesystem::path& csv_path,
                     const std::optional<std::filesystem::path>& json_path) {
  std::ifstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
  std::string line;
  if (!std::getline(csv, line)) throw ValidationError("dataset: empty file " + csv_path.string());
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',') + 1);
  if (columns < 2) throw ValidationError("dataset: need at least one feature column and y");
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("dataset: bad number '" + cell + "' on row " + std::to_string(rows + 1));
      }
      ++count;
    }
    if (count != columns) {
      throw ValidationError("dataset: row " + std::to_string(rows + 1) + " has " +
                            std::to_string(count) + " fields, expected " + std::to_string(columns));
    }
    ++rows;
  }
  Dataset data;
  const auto p = static_cast<Eigen::Index>(columns - 1);
  data.X.resize(static_cast<Eigen::Index>(rows), p);
  data.y.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    for (Eigen::Index j = 0; j < p; ++j) {
      data.X(static_cast<Eigen::Index>(r), j) = values[r * columns + static_cast<std::size_t>(j)];
    }
    data.y(static_cast<Eigen::Index>(r)) = values[r * columns + columns - 1];
  }

  if (json_path && std::filesystem::exists(*json_path)) {
    std::ifstream js(*json_path);
    const nlohmann::json meta = nlohmann::json::parse(js);
    if (meta.contains("beta_true")) {
      const auto beta = meta["beta_true"].get<std::vector<double>>();
      data.beta_true = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    }
    if (meta.contains("groups_true")) {
      data.groups_true = GroupStructure(meta["groups_true"].get<std::vector<std::size_t>>());
    }
    if (meta.contains("sigma_noise")) data.sigma_noise = meta["sigma_noise"].get<double>();
  }
  data.validate();
  return data;
}

}  // namespace heatpen
