#include "womble/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "womble/error.hpp"

namespace womble {

BoundarySet classify_boundaries(const PosteriorSamples& samples) {
  const std::size_t total = samples.total_draws();
  if (total == 0 || samples.n_borders == 0) fail_validation("empty_trace", "no retained w draws to classify");

  std::vector<std::size_t> ones(samples.n_borders, 0);
  for (const auto& c : samples.chains) {
    if (c.w.size() != c.draws() * samples.n_borders) fail_validation("empty_trace", "w trace is incomplete");
    for (std::size_t t = 0; t < c.draws(); ++t) {
      const auto* row = c.w.data() + t * samples.n_borders;
      for (std::size_t b = 0; b < samples.n_borders; ++b) ones[b] += row[b];
    }
  }

  BoundarySet out;
  out.w_median.resize(samples.n_borders);
  out.w_mean.resize(samples.n_borders);
  out.is_boundary.resize(samples.n_borders);
  for (std::size_t b = 0; b < samples.n_borders; ++b) {
    // Median is 0 only when zeros are a strict majority.
    const std::size_t zeros = total - ones[b];
    out.w_median[b] = 2 * zeros > total ? 0 : 1;
    out.w_mean[b] = static_cast<double>(ones[b]) / static_cast<double>(total);
    out.is_boundary[b] = out.w_median[b] == 0;
    out.boundary_count += out.is_boundary[b];
  }
  out.boundary_fraction = static_cast<double>(out.boundary_count) / static_cast<double>(samples.n_borders);
  return out;
}

BlvResult blv(std::span<const double> risks, const AreaGraph& graph) {
  if (risks.size() != graph.size()) fail_validation("shape_mismatch", "risk vector length does not match the area count");
  for (double r : risks)
    if (!(r > 0.0) || !std::isfinite(r)) fail_validation("bad_risk", "risks must be positive and finite");
  BlvResult out;
  out.values.reserve(graph.border_count());
  for (const auto& b : graph.borders()) out.values.push_back(std::abs(risks[b.k] - risks[b.j]));
  return out;
}

std::vector<std::uint8_t> blv_rule_a(const BlvResult& res, double c1) {
  std::vector<std::uint8_t> flags(res.values.size());
  for (std::size_t b = 0; b < flags.size(); ++b) flags[b] = res.values[b] > c1;
  return flags;
}

std::size_t blv_rule_b_count(std::size_t borders, double c2) {
  if (!(c2 > 0.0 && c2 <= 100.0)) fail_validation("bad_percentage", "c2 must lie in (0, 100]");
  const double exact = c2 * static_cast<double>(borders) / 100.0;
  return std::min(borders, static_cast<std::size_t>(std::ceil(exact - 1e-9)));
}

std::vector<std::uint8_t> blv_rule_b(const BlvResult& res, double c2) {
  const std::size_t count = blv_rule_b_count(res.values.size(), c2);
  std::vector<std::size_t> order(res.values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return res.values[a] > res.values[b]; });
  std::vector<std::uint8_t> flags(res.values.size(), 0);
  for (std::size_t i = 0; i < count; ++i) flags[order[i]] = 1;
  return flags;
}

std::string_view to_string(Effect effect) noexcept {
  switch (effect) {
    case Effect::Substantial: return "substantial";
    case Effect::NoEffect: return "no-effect";
    case Effect::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

Effect classify_effect(Interval interval, double alpha_min_value) {
  if (interval.upper < alpha_min_value) return Effect::NoEffect;
  if (interval.lower > alpha_min_value) return Effect::Substantial;
  return Effect::Inconclusive;
}

Effect classify_effect(std::span<const double> alpha_samples, double alpha_min_value) {
  if (alpha_samples.size() < 2) fail_validation("too_few_samples", "effect classification needs at least two draws");
  return classify_effect(equal_tailed_interval(alpha_samples, 0.95), alpha_min_value);
}

}  // namespace womble
