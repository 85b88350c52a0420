#include "womble/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "womble/error.hpp"

namespace womble {

double mean(std::span<const double> x) {
  if (x.empty()) fail_validation("empty_sample", "mean of an empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) fail_validation("empty_sample", "variance needs at least two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) fail_validation("empty_sample", "quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) fail_validation("bad_probability", "quantile probability must lie in [0, 1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> x, double p) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  return quantile_sorted(s, p);
}

double median(std::span<const double> x) { return quantile(x, 0.5); }

Interval equal_tailed_interval(std::span<const double> x, double mass) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double tail = (1.0 - mass) / 2.0;
  return {quantile_sorted(s, tail), quantile_sorted(s, 1.0 - tail)};
}

double effective_sample_size(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 4) return static_cast<double>(n);
  const double m = mean(chain);
  std::vector<double> c(chain.begin(), chain.end());
  for (double& v : c) v -= m;
  const double c0 = std::inner_product(c.begin(), c.end(), c.begin(), 0.0) / static_cast<double>(n);
  if (!(c0 > 0.0)) return static_cast<double>(n);

  auto autocorr = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += c[t] * c[t + lag];
    return s / static_cast<double>(n) / c0;
  };

  // Sum paired autocorrelations while the pair sums stay positive.
  double tau = -1.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = autocorr(2 * k) + autocorr(2 * k + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(n)));
  return static_cast<double>(n) / tau;
}

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) fail_validation("too_few_chains", "Gelman-Rubin needs at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 2) fail_validation("empty_sample", "Gelman-Rubin needs at least two draws per chain");
  for (const auto& c : chains)
    if (c.size() != n) fail_validation("shape_mismatch", "Gelman-Rubin chains must have equal length");

  std::vector<double> means(m), vars(m);
  for (std::size_t i = 0; i < m; ++i) {
    means[i] = mean(chains[i]);
    vars[i] = variance(chains[i]);
  }
  const double within = mean(vars);
  const double between = static_cast<double>(n) * variance(means);
  const double nn = static_cast<double>(n);
  const double pooled = (nn - 1.0) / nn * within + between / nn;
  if (!(within > 0.0)) return between > 0.0 ? INFINITY : 1.0;
  return std::sqrt(pooled / within);
}

}  // namespace womble
