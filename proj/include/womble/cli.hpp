#pragma once

// Command-line orchestration: fit, simulate, diagnose and blv subcommands.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "womble/mcmc.hpp"
#include "womble/simulate.hpp"

namespace womble {

enum class BlvRule { None, AbsoluteCutoff, TopPercent };

/// Parsed `c1=<x>` (rule a) or `c2=<percent>` (rule b).
struct BlvRuleSpec {
  BlvRule rule = BlvRule::None;
  double value = 0.0;

  static BlvRuleSpec parse(const std::string& text);
  std::string to_string() const;
};

struct RunConfig {
  std::string subcommand;

  std::filesystem::path areas;
  std::filesystem::path adjacency;
  std::filesystem::path geojson;
  std::filesystem::path out;  ///< empty: "." (diagnose: the fit directory)
  std::vector<std::string> metrics;  ///< empty = every covariate column

  ChainConfig chains;
  BlvRuleSpec baseline_blv;  ///< fit: also run the alpha = 0 baseline

  // simulate
  SimConfig sim;
  std::vector<double> k1_values{0.4};
  std::vector<double> k2_values{3.0};
  std::size_t lattice = 16;
  double expected = 100.0;
  std::filesystem::path centroids;
  std::filesystem::path partition;
  std::filesystem::path expected_file;

  // diagnose
  std::filesystem::path fit_dir;
  std::size_t permutations = 10000;

  int verbosity = 0;
};

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

// Each command writes its outputs under config.out and returns an exit code.
// Failures print one line `error: <CLASS> <code>: <message>` to `err`.
int cmd_fit(const RunConfig& config, std::ostream& log, std::ostream& err);
int cmd_simulate(const RunConfig& config, std::ostream& log, std::ostream& err);
int cmd_diagnose(const RunConfig& config, std::ostream& log, std::ostream& err);
int cmd_blv(const RunConfig& config, std::ostream& log, std::ostream& err);

/// Full command-line entry point (argv[0] is the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& log, std::ostream& err);

}  // namespace womble
