#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace womble {

double mean(std::span<const double> x);
/// Sample variance (divisor n - 1).
double variance(std::span<const double> x);

/// Linear-interpolation quantile (R type 7) of unsorted data; p in [0, 1].
double quantile(std::span<const double> x, double p);
double quantile_sorted(std::span<const double> sorted, double p);
double median(std::span<const double> x);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Equal-tailed credible interval from empirical percentiles.
Interval equal_tailed_interval(std::span<const double> x, double mass = 0.95);

/// Effective sample size of one chain using Geyer's initial positive sequence
/// on the autocorrelations.
double effective_sample_size(std::span<const double> chain);

/// Potential scale reduction factor over >= 2 equal-length chains.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

}  // namespace womble
