#pragma once

// Metropolis-within-Gibbs sampler for the Poisson / Leroux-CAR boundary model
// with covariate-driven adjacency, plus multi-chain orchestration and DIC.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "womble/car.hpp"
#include "womble/graph.hpp"
#include "womble/rng.hpp"

namespace womble {

struct ObservedData {
  Eigen::VectorXd y;  ///< non-negative integer counts
  Eigen::VectorXd E;  ///< positive expected counts

  std::size_t size() const noexcept { return static_cast<std::size_t>(y.size()); }
  void validate(std::size_t n_areas) const;
};

struct HyperPriors {
  double mu_variance = 10.0;  ///< mu ~ N(0, mu_variance)
  double tau_max = 10.0;      ///< sqrt(tau2) ~ Uniform(0, tau_max)
};

struct ChainConfig {
  std::size_t n_chains = 5;
  std::size_t burn_in = 40000;
  std::size_t keep = 10000;  ///< post burn-in iterations per chain
  std::size_t thin = 1;
  std::uint64_t seed = 1;

  // Initial random-walk scales; adapted during burn-in.
  double phi_step = 0.1;
  double tau2_step = 0.5;    ///< on log(tau2)
  double alpha_step = 0.1;   ///< as a fraction of M_i
  bool adapt = true;
  std::size_t adapt_window = 50;
  double target_acceptance = 0.44;

  double max_boundary_fraction = 0.5;
  double rho = 0.99;
  HyperPriors priors;
  std::size_t threads = 0;  ///< 0 = hardware concurrency

  // Blocks held fixed at the given value (used for the BLV smoother and for
  // sampler validation). Unset means sampled.
  std::optional<double> fixed_mu;
  std::optional<double> fixed_tau2;
  std::optional<Eigen::VectorXd> fixed_alpha;
  /// When false the Poisson likelihood is dropped and the sampler targets
  /// the prior.
  bool use_likelihood = true;

  void validate() const;
};

/// Read-only inputs shared by every update.
struct ModelContext {
  const AreaGraph& graph;
  const DissimilarityData& dis;
  const PrecisionPattern& pattern;
  const ObservedData& data;
  double rho = 0.99;
  HyperPriors priors;
  Eigen::VectorXd alpha_upper;  ///< M_i per metric
  bool use_likelihood = true;
};

struct ModelState {
  Eigen::VectorXd phi;
  CarParams params;
  AdjacencyState adj;
  PrecisionStructure prec;
  double log_post = 0.0;
};

/// Builds a consistent state (adjacency and precision derived from alpha).
ModelState make_state(const ModelContext& ctx, Eigen::VectorXd phi, CarParams params);

/// Joint log-density of data, phi and hyperparameters (all constants kept).
double log_posterior(const ModelState& state, const ModelContext& ctx);

/// Poisson log-likelihood of all areas, factorials included.
double log_likelihood(const Eigen::VectorXd& phi, const ObservedData& data);

/// -2 x log-likelihood.
double deviance(const Eigen::VectorXd& phi, const ObservedData& data);

/// One sweep of per-area random-walk Metropolis on phi. `accepted[k]` is set
/// to 1 when area k's proposal was accepted. Returns the accepted count.
std::size_t update_phi(ModelState& state, const ModelContext& ctx, const Eigen::VectorXd& steps, Rng& rng,
                       std::vector<std::uint8_t>& accepted);

/// Mean and variance of the Gaussian full conditional of mu.
Conditional mu_conditional(const ModelState& state, const ModelContext& ctx);
/// Exact Gibbs draw of mu.
void update_mu(ModelState& state, const ModelContext& ctx, Rng& rng);

/// Random-walk Metropolis on log(tau2). Returns true if accepted.
bool update_tau2(ModelState& state, const ModelContext& ctx, double step, Rng& rng);

/// Component-wise truncated random-walk Metropolis on alpha. accepted[i] is
/// set per component.
void update_alpha(ModelState& state, const ModelContext& ctx, const Eigen::VectorXd& steps, Rng& rng,
                  std::vector<std::uint8_t>& accepted);

struct AcceptanceReport {
  double phi = 0.0;             ///< mean over areas
  double tau2 = 0.0;
  std::vector<double> alpha;    ///< per metric
};

struct ChainSamples {
  std::size_t chain = 0;
  Eigen::MatrixXd phi;     ///< draws x n
  std::vector<double> mu;
  std::vector<double> tau2;
  Eigen::MatrixXd alpha;   ///< draws x q
  std::vector<std::uint8_t> w;  ///< draws x B, row-major
  std::vector<double> deviance;
  AcceptanceReport acceptance;

  std::size_t draws() const noexcept { return mu.size(); }
};

struct PosteriorSamples {
  std::size_t n_areas = 0;
  std::size_t n_borders = 0;
  std::size_t n_metrics = 0;
  std::vector<ChainSamples> chains;

  std::size_t total_draws() const noexcept;
  std::uint8_t w(std::size_t chain, std::size_t draw, std::size_t border) const {
    return chains[chain].w[draw * n_borders + border];
  }
  /// All chains' draws of one scalar series, concatenated in chain order.
  std::vector<double> pooled_mu() const;
  std::vector<double> pooled_tau2() const;
  std::vector<double> pooled_alpha(std::size_t metric) const;
};

/// Prior upper limits M_i for every metric.
Eigen::VectorXd alpha_upper_limits(const DissimilarityData& dis, double max_boundary_fraction);

/// Runs one chain from the given seed stream index (exposed for tests).
ChainSamples run_chain(const ModelContext& ctx, const ChainConfig& config, std::size_t chain_index);

/// Runs config.n_chains independent chains, concurrently.
PosteriorSamples run_chains(const ObservedData& data, const AreaGraph& graph, const DissimilarityData& dis,
                            const ChainConfig& config);

struct DicResult {
  double dic = 0.0;
  double p_d = 0.0;
  double mean_deviance = 0.0;
};

/// DIC with the plug-in deviance evaluated at the posterior mean of R.
DicResult dic(const PosteriorSamples& samples, const ObservedData& data);

struct RiskSummary {
  std::vector<double> median;
  std::vector<double> mean;
  std::vector<double> lower;  ///< 2.5%
  std::vector<double> upper;  ///< 97.5%
};

/// Per-area summaries of R = exp(phi) over all pooled draws.
RiskSummary risk_summary(const PosteriorSamples& samples);

}  // namespace womble
