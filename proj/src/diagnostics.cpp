#include "womble/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "womble/error.hpp"
#include "womble/parallel.hpp"
#include "womble/rng.hpp"

namespace womble {

namespace {

struct MoranTerms {
  double scale = 0.0;  // n / (S0 * sum of squares)
  double mean = 0.0;
};

MoranTerms moran_terms(const Eigen::VectorXd& values, const AreaGraph& graph, std::span<const std::uint8_t> w) {
  if (static_cast<std::size_t>(values.size()) != graph.size())
    fail_validation("shape_mismatch", "value length does not match the area count");
  if (!w.empty() && w.size() != graph.border_count())
    fail_validation("shape_mismatch", "weight length does not match the border count");
  std::size_t active = 0;
  for (std::size_t b = 0; b < graph.border_count(); ++b) active += w.empty() || w[b];
  if (active == 0) fail_validation("no_borders", "Moran's I needs at least one weighted border");

  const double m = values.mean();
  const double ss = (values.array() - m).square().sum();
  if (!(ss > 0.0)) fail_validation("zero_variance", "Moran's I is undefined for constant values");
  const double s0 = 2.0 * static_cast<double>(active);
  return {static_cast<double>(values.size()) / (s0 * ss), m};
}

double cross_sum(const Eigen::VectorXd& values, double m, const AreaGraph& graph, std::span<const std::uint8_t> w) {
  double s = 0.0;
  const auto& borders = graph.borders();
  for (std::size_t b = 0; b < borders.size(); ++b) {
    if (!w.empty() && !w[b]) continue;
    s += (values(static_cast<Eigen::Index>(borders[b].k)) - m) * (values(static_cast<Eigen::Index>(borders[b].j)) - m);
  }
  return 2.0 * s;
}

}  // namespace

double morans_i(const Eigen::VectorXd& values, const AreaGraph& graph, std::span<const std::uint8_t> w) {
  const auto terms = moran_terms(values, graph, w);
  return terms.scale * cross_sum(values, terms.mean, graph, w);
}

MoranResult moran_permutation_test(const Eigen::VectorXd& residuals, const AreaGraph& graph, std::size_t n_permutations,
                                   std::uint64_t seed, std::span<const std::uint8_t> w, std::size_t threads) {
  // Mean and sum of squares are permutation invariant, so only the cross sum
  // needs recomputing.
  const auto terms = moran_terms(residuals, graph, w);
  const double observed = terms.scale * cross_sum(residuals, terms.mean, graph, w);
  const double tolerance = 1e-12 * std::max(1.0, std::abs(observed));

  std::vector<std::uint8_t> exceeds(n_permutations, 0);
  parallel_for(n_permutations, threads, [&](std::size_t p) {
    Rng rng = make_rng(seed, "moran", p);
    Eigen::VectorXd shuffled = residuals;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const double stat = terms.scale * cross_sum(shuffled, terms.mean, graph, w);
    exceeds[p] = stat >= observed - tolerance;
  });

  MoranResult out;
  out.statistic = observed;
  out.n_permutations = n_permutations;
  const auto hits = static_cast<double>(std::accumulate(exceeds.begin(), exceeds.end(), std::size_t{0}));
  out.p_value = (1.0 + hits) / (1.0 + static_cast<double>(n_permutations));
  return out;
}

Eigen::VectorXd pearson_residuals(const ObservedData& data, std::span<const double> risk) {
  if (risk.size() != data.size()) fail_validation("shape_mismatch", "risk length does not match the data");
  Eigen::VectorXd r(static_cast<Eigen::Index>(risk.size()));
  for (std::size_t k = 0; k < risk.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double fitted = data.E(kk) * risk[k];
    if (!(fitted > 0.0)) fail_validation("bad_risk", "fitted means must be positive");
    r(kk) = (data.y(kk) - fitted) / std::sqrt(fitted);
  }
  return r;
}

}  // namespace womble
