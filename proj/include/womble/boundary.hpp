#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "womble/graph.hpp"
#include "womble/mcmc.hpp"
#include "womble/stats.hpp"

namespace womble {

struct BoundarySet {
  std::vector<std::uint8_t> w_median;  ///< posterior median of w per border
  std::vector<double> w_mean;          ///< share of draws with w = 1
  std::vector<std::uint8_t> is_boundary;
  std::size_t boundary_count = 0;
  double boundary_fraction = 0.0;
};

/// Boundary iff the pooled posterior median of w is 0. An exact 50/50 split
/// resolves to w = 1 (no boundary).
BoundarySet classify_boundaries(const PosteriorSamples& samples);

struct BlvResult {
  std::vector<double> values;  ///< |R_k - R_j| per border, graph order
};

BlvResult blv(std::span<const double> risks, const AreaGraph& graph);

/// Rule (a): flag borders with BLV strictly above c1.
std::vector<std::uint8_t> blv_rule_a(const BlvResult& res, double c1);

/// Rule (b): flag the ceil(c2 / 100 * B) largest BLVs, ties broken by border
/// order. c2 is a percentage in (0, 100].
std::vector<std::uint8_t> blv_rule_b(const BlvResult& res, double c2);

/// Number of borders rule (b) flags for B borders.
std::size_t blv_rule_b_count(std::size_t borders, double c2);

enum class Effect { Substantial, NoEffect, Inconclusive };

std::string_view to_string(Effect effect) noexcept;

/// Verdict for an already-computed 95% interval.
Effect classify_effect(Interval interval, double alpha_min_value);

/// Equal-tailed 95% interval of the draws, then the verdict above.
Effect classify_effect(std::span<const double> alpha_samples, double alpha_min_value);

}  // namespace womble
