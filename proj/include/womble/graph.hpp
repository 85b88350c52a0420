#pragma once

// Areal contiguity structure and the covariate-dissimilarity metrics that
// drive the adjacency model.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace womble {

/// An unordered pair of contiguous areas, stored with k < j.
struct Border {
  std::size_t k = 0;
  std::size_t j = 0;

  friend bool operator==(const Border&, const Border&) = default;
  friend auto operator<=>(const Border&, const Border&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

using Ring = std::vector<Point>;
/// Outer ring followed by any holes.
using Polygon = std::vector<Ring>;
/// One or more polygons per area (MultiPolygon in GeoJSON terms).
using AreaShape = std::vector<Polygon>;

/// Neighbour of an area together with the index of the shared border.
struct Incidence {
  std::size_t neighbour = 0;
  std::size_t border = 0;
};

class AreaGraph {
 public:
  /// Normalizes `pairs` into a sorted unordered border list. Pairs listed in
  /// both orientations, or repeated, collapse to one border.
  AreaGraph(std::vector<std::string> area_ids,
            const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

  /// Builds from a dense 0/1 matrix that must be symmetric with zero diagonal.
  static AreaGraph from_matrix(const std::vector<std::vector<int>>& matrix,
                               std::vector<std::string> area_ids = {});

  /// Builds from a pair list; area ids default to "0", "1", ...
  static AreaGraph from_pairs(std::size_t n,
                              const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

  std::size_t size() const noexcept { return area_ids_.size(); }
  std::size_t border_count() const noexcept { return borders_.size(); }
  const std::vector<Border>& borders() const noexcept { return borders_; }
  const Border& border(std::size_t b) const { return borders_.at(b); }
  const std::vector<std::string>& area_ids() const noexcept { return area_ids_; }
  const std::vector<Incidence>& incident(std::size_t k) const { return incidence_.at(k); }

  std::optional<std::size_t> find(std::string_view area_id) const;
  std::size_t index_of(std::string_view area_id) const;

  /// Number of connected components (isolated areas count as components).
  std::size_t component_count() const noexcept { return components_; }

  const std::optional<std::vector<Point>>& centroids() const noexcept { return centroids_; }
  void set_centroids(std::vector<Point> centroids);

  const std::optional<std::vector<AreaShape>>& shapes() const noexcept { return shapes_; }
  void set_shapes(std::vector<AreaShape> shapes);

 private:
  std::vector<std::string> area_ids_;
  std::unordered_map<std::string, std::size_t> lookup_;
  std::vector<Border> borders_;
  std::vector<std::vector<Incidence>> incidence_;
  std::size_t components_ = 0;
  std::optional<std::vector<Point>> centroids_;
  std::optional<std::vector<AreaShape>> shapes_;
};

/// Per-border standardized dissimilarity metrics z_kj = |z_k - z_j| / sigma.
struct DissimilarityData {
  std::vector<std::string> metric_names;
  /// n x q per-area covariate values; empty (0 x q) when the metrics were
  /// supplied directly at border level.
  Eigen::MatrixXd raw;
  /// B x q standardized metrics, one row per border in graph order.
  Eigen::MatrixXd border_metrics;
  /// q scale factors (sample SD of the raw absolute differences).
  Eigen::VectorXd scales;

  std::size_t metric_count() const noexcept { return static_cast<std::size_t>(border_metrics.cols()); }
  std::size_t border_count() const noexcept { return static_cast<std::size_t>(border_metrics.rows()); }
};

/// Standardizes absolute covariate differences across each border.
/// Throws a validation error `constant_metric` naming the metric when its
/// differences have zero standard deviation, and `too_few_borders` when
/// fewer than two borders exist.
DissimilarityData compute_border_metrics(const AreaGraph& graph, const Eigen::MatrixXd& covariates,
                                         std::vector<std::string> metric_names = {});

/// Same standardization applied to border-level raw values (B x q), used when
/// metrics are generated per border rather than derived from area covariates.
DissimilarityData standardize_border_values(const AreaGraph& graph, const Eigen::MatrixXd& raw_border_values,
                                            std::vector<std::string> metric_names = {});

/// Binary adjacency over borders under a given alpha.
struct AdjacencyState {
  std::vector<std::uint8_t> w;
  std::vector<std::size_t> row_sums;
  std::size_t boundary_count = 0;

  friend bool operator==(const AdjacencyState&, const AdjacencyState&) = default;
};

/// All borders retained (w = 1); equivalent to alpha = 0.
AdjacencyState full_adjacency(const AreaGraph& graph);

/// Adjacency from an explicit per-border w vector.
AdjacencyState adjacency_from_w(const AreaGraph& graph, std::vector<std::uint8_t> w);

/// w = 1 iff exp(-sum_i z_kji alpha_i) >= 0.5. Sums within a few ulps of
/// ln 2 count as the tie and keep the border.
AdjacencyState evaluate_w(const AreaGraph& graph, const DissimilarityData& dis, const Eigen::VectorXd& alpha);

/// True when the linear score sum_i z_i alpha_i marks a boundary.
bool is_boundary_score(double score) noexcept;

/// -ln(0.5) / max_b z_bi: below this a metric alone detects no boundary.
double alpha_min(const DissimilarityData& dis, std::size_t metric);

struct AlphaPriorBound {
  /// M_i such that alpha_i = M_i alone flags at most the requested fraction.
  double upper = 0.0;
  /// -ln(0.5) / z_min (smallest positive value): every border with z > 0 is
  /// a boundary beyond this.
  double natural_limit = 0.0;
};

AlphaPriorBound alpha_prior_upper(const DissimilarityData& dis, std::size_t metric,
                                  double max_boundary_fraction = 0.5);

}  // namespace womble
