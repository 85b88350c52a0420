#pragma once

// Synthetic boundary-detection study: Matern-correlated log-risk surfaces with
// piecewise-constant means, Poisson counts, tunable-quality dissimilarity
// metrics, and a BA / NBA / bias / RMSE scorecard.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "womble/graph.hpp"
#include "womble/mcmc.hpp"
#include "womble/rng.hpp"

namespace womble {

/// Which area pairs enter the median-correlation calibration.
enum class CorrelationPairs { All, Adjacent };

/// Study geometry: graph with centroids, true partition and expected counts.
struct SimScenario {
  AreaGraph graph;
  std::vector<int> groups;  ///< group label per area; 0 is the background
  Eigen::VectorXd expected;

  /// A border is a true boundary iff its endpoint labels differ.
  std::vector<std::uint8_t> true_boundaries() const;
  void validate() const;
};

/// side x side unit lattice (rook contiguity) with one background group and
/// five rectangular blocks. At side 16 the blocks carry 48 of 480 borders
/// (10%) as true boundaries.
SimScenario lattice_scenario(std::size_t side = 16, double expected = 100.0);

struct SimConfig {
  double k1 = 0.4;  ///< mean log-risk offset of non-background groups
  double k2 = 3.0;  ///< dissimilarity separation at true boundaries
  double kappa = 2.5;
  double field_sd = 0.3;  ///< marginal standard deviation of the Gaussian field
  double target_median_correlation = 0.5;
  CorrelationPairs pairs = CorrelationPairs::All;
  std::size_t replicates = 20;
  std::uint64_t seed = 1;
  std::size_t threads = 0;

  void validate() const;
};

double matern_correlation(double distance, double range, double kappa = 2.5);

/// Range such that the median Matern correlation over the given distances
/// equals the target (within 1e-6).
double calibrate_range_from_distances(std::vector<double> distances, double target_median, double kappa = 2.5);

double calibrate_range(const std::vector<Point>& centroids, double target_median = 0.5, double kappa = 2.5);

/// Calibration over contiguous pairs only.
double calibrate_range_adjacent(const AreaGraph& graph, double target_median = 0.5, double kappa = 2.5);

/// Draws phi ~ MVN(m, sd^2 C) with C the Matern correlation matrix of the
/// centroids. The Cholesky factor is computed once.
class SurfaceGenerator {
 public:
  SurfaceGenerator(const std::vector<Point>& centroids, double range, double kappa = 2.5, double sd = 1.0);

  Eigen::VectorXd sample(const Eigen::VectorXd& mean, Rng& rng) const;
  const Eigen::MatrixXd& correlation() const noexcept { return correlation_; }
  /// True if the factorization needed the diagonal jitter.
  bool jittered() const noexcept { return jittered_; }

 private:
  Eigen::MatrixXd correlation_;
  Eigen::MatrixXd lower_;
  double sd_ = 1.0;
  bool jittered_ = false;
};

/// Group means: 0 for the background, k1 elsewhere.
Eigen::VectorXd surface_mean(const std::vector<int>& groups, double k1);

/// Raw border metric: |N(1, 0.5^2)| off-boundary, |N(1 + k2, 0.5^2)| on a
/// true boundary.
Eigen::VectorXd gen_dissimilarity(const std::vector<std::uint8_t>& true_boundary, double k2, Rng& rng);

/// y_k ~ Poisson(E_k R_k).
Eigen::VectorXd gen_counts(const Eigen::VectorXd& risk, const Eigen::VectorXd& expected, Rng& rng);

struct ReplicateScore {
  std::size_t replicate = 0;
  double ba = 0.0;    ///< % of true boundaries detected
  double nba = 0.0;   ///< % of true non-boundaries left intact
  double bias = 0.0;  ///< 100 x mean relative error of the risk estimate
  double rmse = 0.0;  ///< 100 x root mean squared relative error
  std::size_t detected = 0;
  std::size_t true_boundaries = 0;
};

struct SimScore {
  double k1 = 0.0;
  double k2 = 0.0;
  double ba = 0.0;
  double nba = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  // Monte-Carlo standard errors over replicates.
  double ba_se = 0.0;
  double nba_se = 0.0;
  double bias_se = 0.0;
  double rmse_se = 0.0;
  std::size_t replicates = 0;
};

struct StudyResult {
  SimScore score;
  std::vector<ReplicateScore> replicates;
};

/// Scores one replicate's classification and risk estimate against truth.
ReplicateScore score_replicate(const std::vector<std::uint8_t>& truth, const std::vector<std::uint8_t>& detected,
                               const Eigen::VectorXd& true_risk, const std::vector<double>& estimated_risk);

StudyResult run_study(const SimScenario& scenario, const SimConfig& config, const ChainConfig& chain_config);

}  // namespace womble
