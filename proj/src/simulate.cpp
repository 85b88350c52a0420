#include "womble/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

#include "womble/boundary.hpp"
#include "womble/error.hpp"
#include "womble/parallel.hpp"
#include "womble/stats.hpp"

namespace womble {

std::vector<std::uint8_t> SimScenario::true_boundaries() const {
  std::vector<std::uint8_t> out;
  out.reserve(graph.border_count());
  for (const auto& b : graph.borders()) out.push_back(groups[b.k] != groups[b.j]);
  return out;
}

void SimScenario::validate() const {
  if (groups.size() != graph.size()) fail_validation("shape_mismatch", "partition must label every area");
  if (static_cast<std::size_t>(expected.size()) != graph.size())
    fail_validation("shape_mismatch", "expected counts must cover every area");
  if ((expected.array() <= 0.0).any()) fail_validation("bad_expected", "expected counts must be positive");
  if (!graph.centroids()) fail_validation("missing_centroids", "simulation needs area centroids");
}

SimScenario lattice_scenario(std::size_t side, double expected) {
  if (side < 4) fail_validation("bad_lattice", "lattice side must be at least 4");
  if (!(expected > 0.0)) fail_validation("bad_expected", "expected counts must be positive");

  const std::size_t n = side * side;
  auto index = [side](std::size_t r, std::size_t c) { return r * side + c; };
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<Point> centroids(n);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      centroids[index(r, c)] = {static_cast<double>(c), static_cast<double>(r)};
      if (c + 1 < side) pairs.emplace_back(index(r, c), index(r, c + 1));
      if (r + 1 < side) pairs.emplace_back(index(r, c), index(r + 1, c));
    }
  }
  std::vector<std::string> ids(n);
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) ids[index(r, c)] = "r" + std::to_string(r) + "c" + std::to_string(c);

  AreaGraph graph(std::move(ids), pairs);
  graph.set_centroids(std::move(centroids));

  // Blocks as (row, col, height, width) on a 16-wide reference lattice,
  // separated so none touch each other or the lattice edge.
  struct Block {
    double row, col, height, width;
  };
  constexpr Block kBlocks[] = {{2, 2, 3, 3}, {2, 9, 3, 2}, {8, 5, 2, 3}, {11, 11, 2, 2}, {12, 2, 2, 2}};
  const double scale = static_cast<double>(side) / 16.0;
  std::vector<int> groups(n, 0);
  int label = 1;
  for (const auto& b : kBlocks) {
    const auto r0 = static_cast<std::size_t>(std::floor(b.row * scale));
    const auto c0 = static_cast<std::size_t>(std::floor(b.col * scale));
    const auto h = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(b.height * scale)));
    const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(b.width * scale)));
    for (std::size_t r = r0; r < std::min(side, r0 + h); ++r)
      for (std::size_t c = c0; c < std::min(side, c0 + w); ++c) groups[index(r, c)] = label;
    ++label;
  }

  return SimScenario{std::move(graph), std::move(groups),
                     Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), expected)};
}

void SimConfig::validate() const {
  if (!(kappa > 0.0)) fail_validation("bad_kappa", "Matern smoothness must be positive");
  if (!(field_sd > 0.0)) fail_validation("bad_field_sd", "field standard deviation must be positive");
  if (!(target_median_correlation > 0.0 && target_median_correlation < 1.0))
    fail_validation("bad_correlation", "target median correlation must lie in (0, 1)");
  if (!(k1 >= 0.0 && k2 >= 0.0)) fail_validation("bad_offset", "k1 and k2 must be non-negative");
  if (replicates == 0) fail_validation("bad_replicates", "at least one replicate is required");
}

double matern_correlation(double distance, double range, double kappa) {
  if (!(distance >= 0.0)) fail_validation("bad_distance", "distance must be non-negative");
  if (!(range > 0.0)) fail_validation("bad_range", "range must be positive");
  if (!(kappa > 0.0)) fail_validation("bad_kappa", "Matern smoothness must be positive");
  if (distance == 0.0) return 1.0;

  const double a = std::sqrt(2.0 * kappa) * distance / range;
  if (kappa == 0.5) return std::exp(-a);
  if (kappa == 1.5) return (1.0 + a) * std::exp(-a);
  if (kappa == 2.5) return (1.0 + a + a * a / 3.0) * std::exp(-a);
  if (a > 700.0) return 0.0;
  return std::pow(2.0, 1.0 - kappa) / std::tgamma(kappa) * std::pow(a, kappa) * std::cyl_bessel_k(kappa, a);
}

double calibrate_range_from_distances(std::vector<double> distances, double target_median, double kappa) {
  if (!(target_median > 0.0 && target_median < 1.0))
    fail_validation("bad_correlation", "target median correlation must lie in (0, 1)");
  std::sort(distances.begin(), distances.end());
  if (distances.empty() || !(distances.back() > 0.0))
    fail_validation("degenerate_centroids", "need at least two distinct centroids");

  // Correlation is decreasing in distance, so the median correlation comes
  // from the middle order statistics of the distances.
  const std::size_t m = distances.size();
  const double d_hi = distances[(m - 1) / 2];  // larger-distance middle -> smaller correlation
  const double d_lo = distances[m / 2];
  auto median_corr = [&](double range) {
    return 0.5 * (matern_correlation(d_hi, range, kappa) + matern_correlation(d_lo, range, kappa));
  };

  const double positive_min = *std::find_if(distances.begin(), distances.end(), [](double d) { return d > 0.0; });
  double lo = 1e-6 * positive_min;
  double hi = 1e6 * distances.back();
  if (median_corr(hi) < target_median)
    fail_validation("range_cap", "target median correlation is unreachable below the range cap");
  if (median_corr(lo) > target_median)
    fail_validation("range_floor", "target median correlation is unreachable above the range floor");

  for (int iter = 0; iter < 300; ++iter) {
    const double mid = std::sqrt(lo * hi);
    if (median_corr(mid) < target_median) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi / lo - 1.0 < 1e-15) break;
  }
  const double range = std::sqrt(lo * hi);
  if (std::abs(median_corr(range) - target_median) > 1e-6)
    fail_numeric("calibration_failed", "range calibration did not converge");
  return range;
}

double calibrate_range(const std::vector<Point>& centroids, double target_median, double kappa) {
  if (centroids.size() < 2) fail_validation("degenerate_centroids", "need at least two centroids");
  std::vector<double> d;
  d.reserve(centroids.size() * (centroids.size() - 1) / 2);
  for (std::size_t a = 0; a < centroids.size(); ++a)
    for (std::size_t b = a + 1; b < centroids.size(); ++b)
      d.push_back(std::hypot(centroids[a].x - centroids[b].x, centroids[a].y - centroids[b].y));
  return calibrate_range_from_distances(std::move(d), target_median, kappa);
}

double calibrate_range_adjacent(const AreaGraph& graph, double target_median, double kappa) {
  if (!graph.centroids()) fail_validation("missing_centroids", "calibration needs area centroids");
  const auto& c = *graph.centroids();
  std::vector<double> d;
  for (const auto& b : graph.borders()) d.push_back(std::hypot(c[b.k].x - c[b.j].x, c[b.k].y - c[b.j].y));
  return calibrate_range_from_distances(std::move(d), target_median, kappa);
}

SurfaceGenerator::SurfaceGenerator(const std::vector<Point>& centroids, double range, double kappa, double sd)
    : sd_(sd) {
  if (!(sd > 0.0)) fail_validation("bad_field_sd", "field standard deviation must be positive");
  const auto n = static_cast<Eigen::Index>(centroids.size());
  correlation_.resize(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    correlation_(a, a) = 1.0;
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const auto& p = centroids[static_cast<std::size_t>(a)];
      const auto& q = centroids[static_cast<std::size_t>(b)];
      const double c = matern_correlation(std::hypot(p.x - q.x, p.y - q.y), range, kappa);
      correlation_(a, b) = c;
      correlation_(b, a) = c;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(correlation_);
  if (llt.info() != Eigen::Success) {
    Eigen::MatrixXd jittered = correlation_;
    jittered.diagonal().array() += 1e-10;
    llt.compute(jittered);
    jittered_ = true;
    if (llt.info() != Eigen::Success)
      fail_numeric("covariance_not_pd", "Matern covariance is not positive definite even with jitter");
  }
  lower_ = llt.matrixL();
}

Eigen::VectorXd SurfaceGenerator::sample(const Eigen::VectorXd& mean, Rng& rng) const {
  if (mean.size() != lower_.rows()) fail_validation("shape_mismatch", "mean length does not match the surface size");
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  const Eigen::VectorXd correlated = lower_.triangularView<Eigen::Lower>() * z;
  return mean + sd_ * correlated;
}

Eigen::VectorXd surface_mean(const std::vector<int>& groups, double k1) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(groups.size()));
  for (std::size_t k = 0; k < groups.size(); ++k) m(static_cast<Eigen::Index>(k)) = groups[k] == 0 ? 0.0 : k1;
  return m;
}

Eigen::VectorXd gen_dissimilarity(const std::vector<std::uint8_t>& true_boundary, double k2, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 0.5);
  Eigen::VectorXd z(static_cast<Eigen::Index>(true_boundary.size()));
  for (std::size_t b = 0; b < true_boundary.size(); ++b)
    z(static_cast<Eigen::Index>(b)) = std::abs(1.0 + (true_boundary[b] ? k2 : 0.0) + normal(rng));
  return z;
}

Eigen::VectorXd gen_counts(const Eigen::VectorXd& risk, const Eigen::VectorXd& expected, Rng& rng) {
  if (risk.size() != expected.size()) fail_validation("shape_mismatch", "risk and expected lengths differ");
  Eigen::VectorXd y(risk.size());
  for (Eigen::Index k = 0; k < risk.size(); ++k) {
    if (!(expected(k) > 0.0)) fail_validation("bad_expected", "expected counts must be positive");
    const double mean = expected(k) * risk(k);
    if (!(mean > 1e-300) || !std::isfinite(mean)) {
      y(k) = 0.0;
      continue;
    }
    std::poisson_distribution<long long> poisson(mean);
    y(k) = static_cast<double>(poisson(rng));
  }
  return y;
}

ReplicateScore score_replicate(const std::vector<std::uint8_t>& truth, const std::vector<std::uint8_t>& detected,
                               const Eigen::VectorXd& true_risk, const std::vector<double>& estimated_risk) {
  if (truth.size() != detected.size()) fail_validation("shape_mismatch", "truth and detection lengths differ");
  if (static_cast<std::size_t>(true_risk.size()) != estimated_risk.size())
    fail_validation("shape_mismatch", "risk lengths differ");

  ReplicateScore s;
  std::size_t hits = 0, intact = 0, negatives = 0;
  for (std::size_t b = 0; b < truth.size(); ++b) {
    s.detected += detected[b];
    if (truth[b]) {
      ++s.true_boundaries;
      hits += detected[b];
    } else {
      ++negatives;
      intact += !detected[b];
    }
  }
  s.ba = s.true_boundaries ? 100.0 * static_cast<double>(hits) / static_cast<double>(s.true_boundaries) : NAN;
  s.nba = negatives ? 100.0 * static_cast<double>(intact) / static_cast<double>(negatives) : NAN;

  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t k = 0; k < estimated_risk.size(); ++k) {
    const double rel = (estimated_risk[k] - true_risk(static_cast<Eigen::Index>(k))) / true_risk(static_cast<Eigen::Index>(k));
    sum += rel;
    sum_sq += rel * rel;
  }
  const double n = static_cast<double>(estimated_risk.size());
  s.bias = 100.0 * sum / n;
  s.rmse = 100.0 * std::sqrt(sum_sq / n);
  return s;
}

StudyResult run_study(const SimScenario& scenario, const SimConfig& config, const ChainConfig& chain_config) {
  config.validate();
  scenario.validate();
  chain_config.validate();

  const auto& centroids = *scenario.graph.centroids();
  const double range = config.pairs == CorrelationPairs::All
                           ? calibrate_range(centroids, config.target_median_correlation, config.kappa)
                           : calibrate_range_adjacent(scenario.graph, config.target_median_correlation, config.kappa);
  const SurfaceGenerator surface(centroids, range, config.kappa, config.field_sd);
  const auto truth = scenario.true_boundaries();
  const Eigen::VectorXd group_mean = surface_mean(scenario.groups, config.k1);

  StudyResult result;
  result.replicates.resize(config.replicates);
  parallel_for(config.replicates, config.threads, [&](std::size_t r) {
    try {
      Rng rng = make_rng(config.seed, "replicate", r);
      const Eigen::VectorXd phi = surface.sample(group_mean, rng);
      const Eigen::VectorXd risk = phi.array().exp();
      Eigen::MatrixXd raw(static_cast<Eigen::Index>(truth.size()), 1);
      raw.col(0) = gen_dissimilarity(truth, config.k2, rng);
      const auto dis = standardize_border_values(scenario.graph, raw, {"z"});
      ObservedData data{gen_counts(risk, scenario.expected, rng), scenario.expected};

      ChainConfig cc = chain_config;
      cc.seed = derive_seed(config.seed, "replicate-chains", r);
      cc.threads = 1;
      const auto samples = run_chains(data, scenario.graph, dis, cc);
      const auto boundaries = classify_boundaries(samples);
      const auto risks = risk_summary(samples);
      auto score = score_replicate(truth, boundaries.is_boundary, risk, risks.median);
      score.replicate = r;
      result.replicates[r] = score;
    } catch (const Error& e) {
      throw Error(e.kind(), e.code(), "replicate " + std::to_string(r) + ": " + e.what());
    }
  });

  auto summarize = [&](auto member, double& value, double& se) {
    std::vector<double> v;
    for (const auto& s : result.replicates) v.push_back(s.*member);
    value = mean(v);
    se = v.size() > 1 ? std::sqrt(variance(v) / static_cast<double>(v.size())) : 0.0;
  };
  auto& sc = result.score;
  sc.k1 = config.k1;
  sc.k2 = config.k2;
  sc.replicates = config.replicates;
  summarize(&ReplicateScore::ba, sc.ba, sc.ba_se);
  summarize(&ReplicateScore::nba, sc.nba, sc.nba_se);
  summarize(&ReplicateScore::bias, sc.bias, sc.bias_se);
  summarize(&ReplicateScore::rmse, sc.rmse, sc.rmse_se);
  // Pooled RMSE over areas and replicates (equal area count per replicate).
  double msq = 0.0;
  for (const auto& s : result.replicates) msq += s.rmse * s.rmse;
  sc.rmse = std::sqrt(msq / static_cast<double>(result.replicates.size()));
  return result;
}

}  // namespace womble
