#include "womble/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "womble/error.hpp"

namespace womble {

namespace {

const double kLn2 = std::log(2.0);
// Scores this close to ln 2 are treated as the exp(.) = 0.5 tie.
const double kTieScore = kLn2 * (1.0 + 16.0 * std::numeric_limits<double>::epsilon());

std::size_t count_components(std::size_t n, const std::vector<Border>& borders) {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  std::size_t components = n;
  for (const auto& b : borders) {
    auto a = find(b.k);
    auto c = find(b.j);
    if (a != c) {
      parent[a] = c;
      --components;
    }
  }
  return components;
}

std::vector<std::string> default_ids(std::size_t n) {
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
  return ids;
}

}  // namespace

AreaGraph::AreaGraph(std::vector<std::string> area_ids,
                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs)
    : area_ids_(std::move(area_ids)) {
  const std::size_t n = area_ids_.size();
  if (n == 0) fail_validation("empty_graph", "graph has no areas");

  for (std::size_t i = 0; i < n; ++i) {
    if (!lookup_.emplace(area_ids_[i], i).second)
      fail_validation("duplicate_area_id", "duplicate area id '" + area_ids_[i] + "'");
  }

  borders_.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    if (a >= n || b >= n)
      fail_validation("index_out_of_range", "border (" + std::to_string(a) + ", " + std::to_string(b) +
                                                ") references an area index >= " + std::to_string(n));
    if (a == b) fail_validation("self_loop", "area " + area_ids_[a] + " listed as its own neighbour");
    borders_.push_back(Border{std::min(a, b), std::max(a, b)});
  }
  std::sort(borders_.begin(), borders_.end());
  borders_.erase(std::unique(borders_.begin(), borders_.end()), borders_.end());

  incidence_.assign(n, {});
  for (std::size_t b = 0; b < borders_.size(); ++b) {
    incidence_[borders_[b].k].push_back({borders_[b].j, b});
    incidence_[borders_[b].j].push_back({borders_[b].k, b});
  }
  components_ = count_components(n, borders_);
}

AreaGraph AreaGraph::from_matrix(const std::vector<std::vector<int>>& matrix, std::vector<std::string> area_ids) {
  const std::size_t n = matrix.size();
  if (n == 0) fail_validation("empty_graph", "adjacency matrix is empty");
  if (area_ids.empty()) area_ids = default_ids(n);
  if (area_ids.size() != n)
    fail_validation("shape_mismatch", "adjacency matrix has " + std::to_string(n) + " rows but " +
                                          std::to_string(area_ids.size()) + " area ids were given");

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t r = 0; r < n; ++r) {
    if (matrix[r].size() != n) fail_validation("not_square", "adjacency matrix row " + std::to_string(r) + " has wrong length");
    for (std::size_t c = 0; c < n; ++c) {
      const int v = matrix[r][c];
      if (v != 0 && v != 1) fail_validation("not_binary", "adjacency matrix entries must be 0 or 1");
      if (r == c && v != 0) fail_validation("self_loop", "adjacency matrix has a non-zero diagonal at row " + std::to_string(r));
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = r + 1; c < n; ++c) {
      if (matrix[r][c] != matrix[c][r])
        fail_validation("asymmetric_matrix", "adjacency matrix is not symmetric at (" + std::to_string(r) + ", " +
                                                 std::to_string(c) + ")");
      if (matrix[r][c] == 1) pairs.emplace_back(r, c);
    }
  }
  return AreaGraph(std::move(area_ids), pairs);
}

AreaGraph AreaGraph::from_pairs(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  if (n == 0) fail_validation("empty_graph", "graph has no areas");
  return AreaGraph(default_ids(n), pairs);
}

std::optional<std::size_t> AreaGraph::find(std::string_view area_id) const {
  auto it = lookup_.find(std::string(area_id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t AreaGraph::index_of(std::string_view area_id) const {
  auto idx = find(area_id);
  if (!idx) fail_validation("unknown_area", "unknown area id '" + std::string(area_id) + "'");
  return *idx;
}

void AreaGraph::set_centroids(std::vector<Point> centroids) {
  if (centroids.size() != size()) fail_validation("shape_mismatch", "centroid count does not match area count");
  centroids_ = std::move(centroids);
}

void AreaGraph::set_shapes(std::vector<AreaShape> shapes) {
  if (shapes.size() != size()) fail_validation("shape_mismatch", "polygon count does not match area count");
  shapes_ = std::move(shapes);
}

DissimilarityData standardize_border_values(const AreaGraph& graph, const Eigen::MatrixXd& raw_border_values,
                                            std::vector<std::string> metric_names) {
  const auto nb = static_cast<Eigen::Index>(graph.border_count());
  const auto q = raw_border_values.cols();
  if (q < 1) fail_validation("no_metrics", "at least one dissimilarity metric is required");
  if (raw_border_values.rows() != nb)
    fail_validation("shape_mismatch", "border metric rows do not match the border count");
  if (metric_names.empty()) {
    for (Eigen::Index i = 0; i < q; ++i) metric_names.push_back("metric" + std::to_string(i + 1));
  }
  if (static_cast<Eigen::Index>(metric_names.size()) != q)
    fail_validation("shape_mismatch", "metric name count does not match metric count");
  if (nb < 2)
    fail_validation("too_few_borders", "standardizing a metric needs at least two borders (sample SD undefined)");
  if (!raw_border_values.allFinite()) fail_validation("non_finite_metric", "dissimilarity values must be finite");
  if ((raw_border_values.array() < 0.0).any())
    fail_validation("negative_metric", "border-level dissimilarity values must be non-negative");

  DissimilarityData out;
  out.metric_names = std::move(metric_names);
  out.raw = Eigen::MatrixXd(0, q);
  out.scales.resize(q);
  out.border_metrics.resize(nb, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const auto col = raw_border_values.col(i);
    const double mean = col.mean();
    const double ss = (col.array() - mean).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(nb - 1));
    if (!(sd > 0.0) || !std::isfinite(sd))
      fail_validation("constant_metric", "metric '" + out.metric_names[static_cast<std::size_t>(i)] +
                                             "' has zero spread across borders and cannot be standardized");
    out.scales(i) = sd;
    out.border_metrics.col(i) = col / sd;
  }
  return out;
}

DissimilarityData compute_border_metrics(const AreaGraph& graph, const Eigen::MatrixXd& covariates,
                                         std::vector<std::string> metric_names) {
  if (covariates.rows() != static_cast<Eigen::Index>(graph.size()))
    fail_validation("shape_mismatch", "covariate rows do not match the area count");
  if (!covariates.allFinite())
    fail_validation("missing_covariate", "covariate values must be present and finite (no imputation)");

  Eigen::MatrixXd diffs(static_cast<Eigen::Index>(graph.border_count()), covariates.cols());
  for (std::size_t b = 0; b < graph.border_count(); ++b) {
    const auto& br = graph.border(b);
    diffs.row(static_cast<Eigen::Index>(b)) =
        (covariates.row(static_cast<Eigen::Index>(br.k)) - covariates.row(static_cast<Eigen::Index>(br.j))).cwiseAbs();
  }
  auto out = standardize_border_values(graph, diffs, std::move(metric_names));
  out.raw = covariates;
  return out;
}

AdjacencyState adjacency_from_w(const AreaGraph& graph, std::vector<std::uint8_t> w) {
  if (w.size() != graph.border_count()) fail_validation("shape_mismatch", "w length does not match border count");
  AdjacencyState adj;
  adj.row_sums.assign(graph.size(), 0);
  for (std::size_t b = 0; b < w.size(); ++b) {
    if (w[b]) {
      ++adj.row_sums[graph.border(b).k];
      ++adj.row_sums[graph.border(b).j];
    } else {
      ++adj.boundary_count;
    }
  }
  adj.w = std::move(w);
  return adj;
}

AdjacencyState full_adjacency(const AreaGraph& graph) {
  return adjacency_from_w(graph, std::vector<std::uint8_t>(graph.border_count(), 1));
}

bool is_boundary_score(double score) noexcept { return score > kTieScore; }

AdjacencyState evaluate_w(const AreaGraph& graph, const DissimilarityData& dis, const Eigen::VectorXd& alpha) {
  const auto q = static_cast<Eigen::Index>(dis.metric_count());
  if (alpha.size() != q) fail_validation("shape_mismatch", "alpha length does not match metric count");
  if (dis.border_count() != graph.border_count())
    fail_validation("shape_mismatch", "dissimilarity data does not match the graph");
  for (Eigen::Index i = 0; i < q; ++i) {
    if (!(alpha(i) >= 0.0)) fail_validation("negative_alpha", "alpha components must be non-negative");
  }

  std::vector<std::uint8_t> w(graph.border_count());
  for (std::size_t b = 0; b < w.size(); ++b) {
    const double score = dis.border_metrics.row(static_cast<Eigen::Index>(b)).dot(alpha);
    w[b] = is_boundary_score(score) ? 0 : 1;
  }
  return adjacency_from_w(graph, std::move(w));
}

double alpha_min(const DissimilarityData& dis, std::size_t metric) {
  if (metric >= dis.metric_count()) fail_validation("index_out_of_range", "metric index out of range");
  const double zmax = dis.border_metrics.col(static_cast<Eigen::Index>(metric)).maxCoeff();
  if (!(zmax > 0.0)) fail_validation("zero_metric", "metric '" + dis.metric_names[metric] + "' is zero on every border");
  return kLn2 / zmax;
}

AlphaPriorBound alpha_prior_upper(const DissimilarityData& dis, std::size_t metric, double max_boundary_fraction) {
  if (metric >= dis.metric_count()) fail_validation("index_out_of_range", "metric index out of range");
  if (!(max_boundary_fraction > 0.0 && max_boundary_fraction <= 1.0))
    fail_validation("bad_fraction", "max boundary fraction must lie in (0, 1]");

  const auto col = dis.border_metrics.col(static_cast<Eigen::Index>(metric));
  std::vector<double> z(col.begin(), col.end());
  std::sort(z.begin(), z.end());
  const std::size_t nb = z.size();

  auto first_positive = std::find_if(z.begin(), z.end(), [](double v) { return v > 0.0; });
  if (first_positive == z.end())
    fail_validation("zero_metric", "metric '" + dis.metric_names[metric] + "' is zero on every border");

  AlphaPriorBound bound;
  bound.natural_limit = kLn2 / *first_positive;

  // Lower nearest rank: the m-th order statistic (1-based) with
  // m = ceil(B (1 - f)), so at most B - m <= f B borders exceed it.
  const double target = static_cast<double>(nb) * (1.0 - max_boundary_fraction);
  const auto rank = static_cast<std::size_t>(std::ceil(target - 1e-9));
  if (rank == 0) {
    bound.upper = bound.natural_limit;
    return bound;
  }
  const double quantile = z[rank - 1];
  if (!(quantile > 0.0))
    fail_validation("zero_quantile", "the boundary-fraction quantile of metric '" + dis.metric_names[metric] +
                                         "' is zero; the prior upper limit would be infinite");
  bound.upper = kLn2 / quantile;
  return bound;
}

}  // namespace womble
