#include "womble/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "womble/error.hpp"

namespace womble {

namespace {

using Rows = std::vector<std::vector<std::string>>;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

Rows parse_rows(std::string_view text, std::string_view source) {
  Rows rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;     // inside quotes
  bool was_quoted = false; // current field started with a quote
  std::size_t line = 1;

  auto end_field = [&] {
    row.push_back(was_quoted ? field : std::string(trim(field)));
    field.clear();
    was_quoted = false;
  };
  auto end_row = [&] {
    end_field();
    const bool blank = row.size() == 1 && row[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!trim(field).empty())
          fail_validation("bad_csv", std::string(source) + ":" + std::to_string(line) + ": stray quote");
        field.clear();
        quoted = true;
        was_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\n':
        end_row();
        ++line;
        break;
      case '\r':
        break;
      default:
        if (was_quoted && c != ' ' && c != '\t')
          fail_validation("bad_csv", std::string(source) + ":" + std::to_string(line) + ": text after closing quote");
        if (!was_quoted) field.push_back(c);
    }
  }
  if (quoted) fail_validation("bad_csv", std::string(source) + ": unterminated quoted field");
  if (!field.empty() || !row.empty() || was_quoted) end_row();
  return rows;
}

bool needs_quotes(std::string_view s) {
  return s.find_first_of(",\"\n\r") != std::string_view::npos || (!s.empty() && (s.front() == ' ' || s.back() == ' '));
}

bool is_missing(std::string_view field) {
  return field.empty() || field == "NA" || field == "na" || field == "NaN" || field == "nan";
}

struct KeyedRows {
  std::vector<std::size_t> row_of_area;  // area index -> table row
};

// Maps every graph area to exactly one row of a table keyed by `area_id`.
KeyedRows key_by_area(const CsvTable& table, const AreaGraph& graph, const std::filesystem::path& path) {
  const std::size_t id_col = table.column("area_id");
  constexpr auto unset = std::numeric_limits<std::size_t>::max();
  KeyedRows out{std::vector<std::size_t>(graph.size(), unset)};
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& id = table.rows[r][id_col];
    const auto k = graph.find(id);
    if (!k) fail_validation("unknown_area", path.string() + ": area '" + id + "' is not in the areas file");
    if (out.row_of_area[*k] != unset)
      fail_validation("duplicate_area_id", path.string() + ": area '" + id + "' appears twice");
    out.row_of_area[*k] = r;
  }
  for (std::size_t k = 0; k < graph.size(); ++k)
    if (out.row_of_area[k] == unset)
      fail_validation("missing_area", path.string() + ": no row for area '" + graph.area_ids()[k] + "'");
  return out;
}

// ---- GeoJSON ---------------------------------------------------------------

using json = nlohmann::json;

Point parse_position(const json& pos, std::string_view where) {
  if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
    fail_validation("bad_geojson", std::string(where) + ": malformed position");
  return {pos[0].get<double>(), pos[1].get<double>()};
}

Polygon parse_polygon(const json& coords, std::string_view where) {
  if (!coords.is_array()) fail_validation("bad_geojson", std::string(where) + ": malformed polygon");
  Polygon poly;
  for (const auto& ring_json : coords) {
    if (!ring_json.is_array()) fail_validation("bad_geojson", std::string(where) + ": malformed ring");
    Ring ring;
    for (const auto& pos : ring_json) ring.push_back(parse_position(pos, where));
    poly.push_back(std::move(ring));
  }
  return poly;
}

using SegmentKey = std::array<std::int64_t, 4>;

struct Quantizer {
  double quantum = 1e-9;

  std::array<std::int64_t, 2> operator()(const Point& p) const {
    return {std::llround(p.x / quantum), std::llround(p.y / quantum)};
  }
  SegmentKey segment(const Point& a, const Point& b) const {
    auto qa = (*this)(a);
    auto qb = (*this)(b);
    if (qb < qa) std::swap(qa, qb);
    return {qa[0], qa[1], qb[0], qb[1]};
  }
};

// Ring vertices without the closing repeat.
std::vector<Point> open_ring(const Ring& ring, const Quantizer& q) {
  std::vector<Point> pts(ring.begin(), ring.end());
  if (pts.size() > 1 && q(pts.front()) == q(pts.back())) pts.pop_back();
  return pts;
}

std::set<SegmentKey> segment_set(const AreaShape& shape, const Quantizer& q) {
  std::set<SegmentKey> out;
  for (const auto& poly : shape)
    for (const auto& ring : poly) {
      const auto pts = open_ring(ring, q);
      for (std::size_t i = 0; i < pts.size() && pts.size() > 1; ++i)
        out.insert(q.segment(pts[i], pts[(i + 1) % pts.size()]));
    }
  return out;
}

// Runs of consecutive ring edges of `shape` that also appear in `other`.
std::vector<std::vector<Point>> shared_lines(const AreaShape& shape, const std::set<SegmentKey>& other,
                                             const Quantizer& q) {
  std::vector<std::vector<Point>> lines;
  for (const auto& poly : shape)
    for (const auto& ring : poly) {
      const auto pts = open_ring(ring, q);
      const std::size_t m = pts.size();
      if (m < 2) continue;
      std::vector<bool> shared(m);
      for (std::size_t i = 0; i < m; ++i) shared[i] = other.contains(q.segment(pts[i], pts[(i + 1) % m]));
      if (std::all_of(shared.begin(), shared.end(), [](bool s) { return s; })) {
        std::vector<Point> closed(pts);
        closed.push_back(pts.front());
        lines.push_back(std::move(closed));
        continue;
      }
      // Start just after an unshared edge so no run wraps around.
      std::size_t start = 0;
      while (shared[start]) ++start;
      std::vector<Point> current;
      for (std::size_t step = 1; step <= m; ++step) {
        const std::size_t i = (start + step) % m;
        if (shared[i]) {
          if (current.empty()) current.push_back(pts[i]);
          current.push_back(pts[(i + 1) % m]);
        } else if (!current.empty()) {
          lines.push_back(std::move(current));
          current.clear();
        }
      }
      if (!current.empty()) lines.push_back(std::move(current));
    }
  return lines;
}

double coordinate_scale(const std::vector<AreaShape>& shapes) {
  double scale = 1.0;
  for (const auto& shape : shapes)
    for (const auto& poly : shape)
      for (const auto& ring : poly)
        for (const auto& p : ring) scale = std::max({scale, std::abs(p.x), std::abs(p.y)});
  return scale;
}

}  // namespace

// ---- CSV -------------------------------------------------------------------

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) fail_validation("missing_column", "missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

CsvTable parse_csv(std::string_view text, std::string_view source) {
  Rows rows = parse_rows(text, source);
  if (rows.empty()) fail_validation("empty_csv", std::string(source) + ": no header row");
  CsvTable table;
  table.header = std::move(rows.front());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != table.header.size())
      fail_validation("bad_csv", std::string(source) + ": row " + std::to_string(r + 1) + " has " +
                                     std::to_string(rows[r].size()) + " fields, header has " +
                                     std::to_string(table.header.size()));
    table.rows.push_back(std::move(rows[r]));
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path), path.string()); }

std::string format_csv(const CsvTable& table) {
  std::string out;
  auto emit = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out.push_back(',');
      if (needs_quotes(row[i])) {
        out.push_back('"');
        for (char c : row[i]) {
          if (c == '"') out.push_back('"');
          out.push_back(c);
        }
        out.push_back('"');
      } else {
        out += row[i];
      }
    }
    out.push_back('\n');
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
  return out;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_text(path, format_csv(table)); }

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("unreadable_file", "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail_io("unreadable_file", "error reading '" + path.string() + "'");
  return buf.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_io("unwritable_file", "cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) fail_io("unwritable_file", "error writing '" + path.string() + "'");
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view field, std::string_view what) {
  field = trim(field);
  if (field == "nan" || field == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (field == "inf") return std::numeric_limits<double>::infinity();
  if (field == "-inf") return -std::numeric_limits<double>::infinity();
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size())
    fail_validation("bad_number", std::string(what) + ": '" + std::string(field) + "' is not a number");
  return value;
}

std::uint64_t parse_unsigned(std::string_view field, std::string_view what) {
  field = trim(field);
  std::uint64_t value = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size())
    fail_validation("bad_number", std::string(what) + ": '" + std::string(field) + "' is not a non-negative integer");
  return value;
}

// ---- inputs ----------------------------------------------------------------

namespace {

AreasInput read_areas_impl(const std::filesystem::path& path, const std::vector<std::string>& metrics, bool counts_only) {
  const CsvTable table = read_csv(path);
  const std::string src = path.string();
  for (const char* required : {"area_id", "y", "E"})
    if (!table.has_column(required))
      fail_validation("missing_column", src + ": missing required column '" + required + "'");
  const std::size_t id_col = table.column("area_id");
  const std::size_t y_col = table.column("y");
  const std::size_t e_col = table.column("E");

  std::vector<std::size_t> metric_cols;
  AreasInput out;
  if (counts_only) {
  } else if (metrics.empty()) {
    for (std::size_t c = 0; c < table.header.size(); ++c)
      if (c != id_col && c != y_col && c != e_col) {
        metric_cols.push_back(c);
        out.metric_names.push_back(table.header[c]);
      }
  } else {
    for (const auto& m : metrics) {
      if (!table.has_column(m))
        fail_validation("missing_metric_column", src + ": metric column '" + m + "' not found");
      if (m == "area_id" || m == "y" || m == "E")
        fail_validation("missing_metric_column", src + ": '" + m + "' cannot be used as a metric");
      metric_cols.push_back(table.column(m));
      out.metric_names.push_back(m);
    }
  }

  const std::size_t n = table.rows.size();
  const auto rows = static_cast<Eigen::Index>(n);
  out.data.y.resize(rows);
  out.data.E.resize(rows);
  out.covariates.resize(rows, static_cast<Eigen::Index>(metric_cols.size()));
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = table.rows[r];
    const std::string where = src + " row " + std::to_string(r + 2);
    if (row[id_col].empty()) fail_validation("missing_area_id", where + ": empty area_id");
    if (!seen.insert(row[id_col]).second)
      fail_validation("duplicate_area_id", where + ": duplicate area_id '" + row[id_col] + "'");
    out.ids.push_back(row[id_col]);
    const auto rr = static_cast<Eigen::Index>(r);
    if (is_missing(row[y_col])) fail_validation("bad_count", where + ": missing count y");
    if (is_missing(row[e_col])) fail_validation("bad_expected", where + ": missing expected count E");
    out.data.y(rr) = parse_double(row[y_col], where + " y");
    out.data.E(rr) = parse_double(row[e_col], where + " E");
    for (std::size_t i = 0; i < metric_cols.size(); ++i) {
      const auto& field = row[metric_cols[i]];
      out.covariates(rr, static_cast<Eigen::Index>(i)) =
          is_missing(field) ? std::numeric_limits<double>::quiet_NaN()
                            : parse_double(field, where + " " + out.metric_names[i]);
    }
  }
  out.data.validate(n);
  return out;
}

}  // namespace

AreasInput read_areas(const std::filesystem::path& path, const std::vector<std::string>& metrics) {
  return read_areas_impl(path, metrics, false);
}

AreasInput read_counts(const std::filesystem::path& path) { return read_areas_impl(path, {}, true); }

AreaGraph read_adjacency(const std::filesystem::path& path, const std::vector<std::string>& ids) {
  const std::string src = path.string();
  const Rows rows = parse_rows(read_text(path), src);
  if (rows.empty()) fail_validation("bad_adjacency", src + ": empty adjacency file");

  if (rows.front().size() == 2 && rows.front()[0] == "area_id_1" && rows.front()[1] == "area_id_2") {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < ids.size(); ++k) index.emplace(ids[k], k);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() != 2)
        fail_validation("bad_adjacency", src + ": row " + std::to_string(r + 1) + " must have two fields");
      std::array<std::size_t, 2> ends{};
      for (std::size_t e = 0; e < 2; ++e) {
        const auto it = index.find(rows[r][e]);
        if (it == index.end())
          fail_validation("unknown_area", src + ": area '" + rows[r][e] + "' is not in the areas file");
        ends[e] = it->second;
      }
      pairs.emplace_back(ends[0], ends[1]);
    }
    return AreaGraph(ids, pairs);
  }

  const std::size_t n = rows.size();
  std::vector<std::vector<int>> matrix(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != n)
      fail_validation("bad_adjacency", src + ": expected a pair list with header area_id_1,area_id_2 or a square 0/1 matrix");
    for (const auto& cell : rows[r]) {
      const double v = parse_double(cell, src + " matrix entry");
      if (v != 0.0 && v != 1.0) fail_validation("not_binary", src + ": matrix entries must be 0 or 1");
      matrix[r].push_back(static_cast<int>(v));
    }
  }
  if (n != ids.size())
    fail_validation("shape_mismatch", src + ": matrix is " + std::to_string(n) + "x" + std::to_string(n) + " but there are " +
                                          std::to_string(ids.size()) + " areas");
  return AreaGraph::from_matrix(matrix, ids);
}

std::vector<AreaShape> read_geojson(const std::filesystem::path& path, const AreaGraph& graph) {
  const std::string src = path.string();
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    fail_validation("bad_geojson", src + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array())
    fail_validation("bad_geojson", src + ": expected a FeatureCollection");

  std::vector<AreaShape> shapes(graph.size());
  std::vector<bool> seen(graph.size(), false);
  for (const auto& feature : doc["features"]) {
    if (!feature.is_object() || !feature.contains("properties") || !feature["properties"].is_object() ||
        !feature["properties"].contains("area_id"))
      fail_validation("bad_geojson", src + ": feature without properties.area_id");
    const json& id_json = feature["properties"]["area_id"];
    std::string id;
    if (id_json.is_string())
      id = id_json.get<std::string>();
    else if (id_json.is_number_integer())
      id = std::to_string(id_json.get<long long>());
    else
      fail_validation("bad_geojson", src + ": area_id must be a string or integer");
    const auto k = graph.find(id);
    if (!k) fail_validation("unknown_area", src + ": area '" + id + "' is not in the areas file");
    if (seen[*k]) fail_validation("duplicate_area_id", src + ": area '" + id + "' has two features");
    seen[*k] = true;

    const json& geom = feature.value("geometry", json());
    const std::string type = geom.is_object() ? geom.value("type", "") : "";
    const std::string where = src + " area '" + id + "'";
    if (type == "Polygon") {
      shapes[*k].push_back(parse_polygon(geom["coordinates"], where));
    } else if (type == "MultiPolygon") {
      if (!geom["coordinates"].is_array()) fail_validation("bad_geojson", where + ": malformed MultiPolygon");
      for (const auto& poly : geom["coordinates"]) shapes[*k].push_back(parse_polygon(poly, where));
    } else {
      fail_validation("bad_geojson", where + ": geometry must be Polygon or MultiPolygon");
    }
  }
  for (std::size_t k = 0; k < graph.size(); ++k)
    if (!seen[k]) fail_validation("missing_area", src + ": no feature for area '" + graph.area_ids()[k] + "'");
  return shapes;
}

std::string boundary_geojson(const AreaGraph& graph, const BoundarySet& boundaries) {
  if (!graph.shapes()) fail_validation("missing_geometry", "boundary overlay needs area polygons");
  const auto& shapes = *graph.shapes();
  if (boundaries.is_boundary.size() != graph.border_count())
    fail_validation("shape_mismatch", "boundary flags do not match the border count");
  const Quantizer q{1e-9 * coordinate_scale(shapes)};

  nlohmann::ordered_json features = nlohmann::ordered_json::array();
  for (std::size_t b = 0; b < graph.border_count(); ++b) {
    if (!boundaries.is_boundary[b]) continue;
    const auto& border = graph.border(b);
    const auto lines = shared_lines(shapes[border.k], segment_set(shapes[border.j], q), q);
    for (const auto& line : lines) {
      nlohmann::ordered_json coords = nlohmann::ordered_json::array();
      for (const auto& p : line) coords.push_back({p.x, p.y});
      nlohmann::ordered_json feature;
      feature["type"] = "Feature";
      feature["properties"] = {{"area_id_1", graph.area_ids()[border.k]},
                               {"area_id_2", graph.area_ids()[border.j]},
                               {"w_mean", boundaries.w_mean[b]}};
      feature["geometry"] = {{"type", "LineString"}, {"coordinates", std::move(coords)}};
      features.push_back(std::move(feature));
    }
  }
  nlohmann::ordered_json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = std::move(features);
  return doc.dump() + "\n";
}

std::vector<Point> read_centroids(const std::filesystem::path& path, const AreaGraph& graph) {
  const CsvTable table = read_csv(path);
  const auto keyed = key_by_area(table, graph, path);
  const std::size_t xc = table.column("x");
  const std::size_t yc = table.column("y");
  std::vector<Point> out(graph.size());
  for (std::size_t k = 0; k < graph.size(); ++k) {
    const auto& row = table.rows[keyed.row_of_area[k]];
    out[k] = {parse_double(row[xc], path.string() + " x"), parse_double(row[yc], path.string() + " y")};
    if (!std::isfinite(out[k].x) || !std::isfinite(out[k].y))
      fail_validation("bad_centroid", path.string() + ": non-finite centroid for '" + graph.area_ids()[k] + "'");
  }
  return out;
}

std::vector<int> read_partition(const std::filesystem::path& path, const AreaGraph& graph) {
  const CsvTable table = read_csv(path);
  const auto keyed = key_by_area(table, graph, path);
  const std::size_t gc = table.column("group");
  std::vector<int> out(graph.size());
  for (std::size_t k = 0; k < graph.size(); ++k) {
    const auto g = parse_unsigned(table.rows[keyed.row_of_area[k]][gc], path.string() + " group");
    if (g > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
      fail_validation("bad_number", path.string() + ": group label too large");
    out[k] = static_cast<int>(g);
  }
  return out;
}

Eigen::VectorXd read_expected(const std::filesystem::path& path, const AreaGraph& graph) {
  const CsvTable table = read_csv(path);
  const auto keyed = key_by_area(table, graph, path);
  const std::size_t ec = table.column("E");
  Eigen::VectorXd out(static_cast<Eigen::Index>(graph.size()));
  for (std::size_t k = 0; k < graph.size(); ++k) {
    const double e = parse_double(table.rows[keyed.row_of_area[k]][ec], path.string() + " E");
    if (!(e > 0.0) || !std::isfinite(e))
      fail_validation("bad_expected", path.string() + ": E must be positive for '" + graph.area_ids()[k] + "'");
    out(static_cast<Eigen::Index>(k)) = e;
  }
  return out;
}

}  // namespace womble
