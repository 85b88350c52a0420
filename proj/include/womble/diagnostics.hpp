#pragma once

// Residual spatial-autocorrelation checks.

#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "womble/graph.hpp"
#include "womble/mcmc.hpp"

namespace womble {

struct MoranResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n_permutations = 0;
  std::string residual_type = "pearson";
};

/// Moran's I with binary weights over the graph's borders (both orientations
/// counted in S0). `w` selects a subset of borders; empty means all.
double morans_i(const Eigen::VectorXd& values, const AreaGraph& graph, std::span<const std::uint8_t> w = {});

/// One-sided upper-tail permutation test with add-one correction. Each
/// permutation draws from its own stream derived from (seed, index), so the
/// result does not depend on execution order.
MoranResult moran_permutation_test(const Eigen::VectorXd& residuals, const AreaGraph& graph,
                                   std::size_t n_permutations = 10000, std::uint64_t seed = 1,
                                   std::span<const std::uint8_t> w = {}, std::size_t threads = 1);

/// (y - E R) / sqrt(E R).
Eigen::VectorXd pearson_residuals(const ObservedData& data, std::span<const double> risk);

}  // namespace womble
