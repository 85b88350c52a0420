#pragma once

// File formats: CSV tables, the areas / adjacency inputs, GeoJSON geometry and
// the boundary line overlay.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "womble/boundary.hpp"
#include "womble/graph.hpp"
#include "womble/mcmc.hpp"

namespace womble {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; validation error `missing_column` if absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

/// RFC 4180 style: comma separated, double-quoted fields may hold commas,
/// quotes ("") and newlines. Blank lines are skipped; every row must have the
/// header's width.
CsvTable parse_csv(std::string_view text, std::string_view source = "<memory>");
CsvTable read_csv(const std::filesystem::path& path);
std::string format_csv(const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Shortest representation that round-trips, '.' decimal separator
/// regardless of locale. Non-finite values print as nan / inf / -inf.
std::string format_double(double value);
/// Strict parse of a whole field; `what` names the field in errors.
double parse_double(std::string_view field, std::string_view what);
std::uint64_t parse_unsigned(std::string_view field, std::string_view what);

/// Contents of the areas CSV (`area_id,y,E,<metric columns>`).
struct AreasInput {
  std::vector<std::string> ids;
  ObservedData data;
  std::vector<std::string> metric_names;
  Eigen::MatrixXd covariates;  ///< n x q; missing values (empty or NA) are NaN
};

/// `metrics` selects covariate columns; empty selects every column other than
/// area_id, y and E.
AreasInput read_areas(const std::filesystem::path& path, const std::vector<std::string>& metrics = {});
/// Reads only area_id, y and E; covariate columns are ignored.
AreasInput read_counts(const std::filesystem::path& path);

/// Either a pair list with header `area_id_1,area_id_2` or a square 0/1
/// matrix whose rows follow `ids`.
AreaGraph read_adjacency(const std::filesystem::path& path, const std::vector<std::string>& ids);

/// Polygon / MultiPolygon features keyed by `properties.area_id`. Every area
/// in the graph must have a feature.
std::vector<AreaShape> read_geojson(const std::filesystem::path& path, const AreaGraph& graph);

/// Line overlay of boundary borders: the segments the two areas' rings share,
/// chained into LineString features.
std::string boundary_geojson(const AreaGraph& graph, const BoundarySet& boundaries);

/// Optional simulation inputs keyed by area id: `area_id,x,y`,
/// `area_id,group` and `area_id,E`.
std::vector<Point> read_centroids(const std::filesystem::path& path, const AreaGraph& graph);
std::vector<int> read_partition(const std::filesystem::path& path, const AreaGraph& graph);
Eigen::VectorXd read_expected(const std::filesystem::path& path, const AreaGraph& graph);

}  // namespace womble
