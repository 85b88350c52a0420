#pragma once

// Scratch directories and a small on-disk grid dataset shared by the CLI
// tests and the acceptance suite.

#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>
#include <unistd.h>

#include "womble/io.hpp"

namespace fixture {

namespace fs = std::filesystem;
using womble::write_text;

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("womble_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

// side x side grid: areas.csv with one informative covariate (a step across the
// middle column) and one noise covariate, the pair-list adjacency and unit
// square polygons.
inline void write_grid(const TempDir& dir, std::size_t side) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::ostringstream areas, adj;
  nlohmann::json features = nlohmann::json::array();
  areas << "area_id,y,E,step,noise\n";
  adj << "area_id_1,area_id_2\n";
  auto id = [](std::size_t r, std::size_t c) { return "a" + std::to_string(r) + "_" + std::to_string(c); };
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      const bool high = c >= side / 2;
      std::poisson_distribution<int> pois(high ? 80.0 : 50.0);
      areas << id(r, c) << ',' << pois(rng) << ",50," << (high ? 5.0 : 1.0) + noise(rng) << ',' << noise(rng) << '\n';
      if (c + 1 < side) adj << id(r, c) << ',' << id(r, c + 1) << '\n';
      if (r + 1 < side) adj << id(r, c) << ',' << id(r + 1, c) << '\n';
      const double x = static_cast<double>(c), y = static_cast<double>(r);
      features.push_back({{"type", "Feature"},
                          {"properties", {{"area_id", id(r, c)}}},
                          {"geometry",
                           {{"type", "Polygon"},
                            {"coordinates", {{{x, y}, {x + 1, y}, {x + 1, y + 1}, {x, y + 1}, {x, y}}}}}}});
    }
  }
  write_text(dir / "areas.csv", areas.str());
  write_text(dir / "adj.csv", adj.str());
  write_text(dir / "shapes.geojson", nlohmann::json{{"type", "FeatureCollection"}, {"features", features}}.dump());
}

}  // namespace fixture
