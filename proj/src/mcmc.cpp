#include "womble/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "womble/error.hpp"
#include "womble/parallel.hpp"
#include "womble/stats.hpp"

namespace womble {

namespace {

constexpr double kPhiBound = 50.0;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_uniform(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return std::log(u(rng));
}

double log_prior_tau2(double tau2, const HyperPriors& priors) {
  // sqrt(tau2) ~ U(0, tau_max)  =>  p(tau2) = 1 / (2 tau_max sqrt(tau2)).
  if (!(tau2 > 0.0) || tau2 > priors.tau_max * priors.tau_max) return kNegInf;
  return -std::log(2.0 * priors.tau_max) - 0.5 * std::log(tau2);
}

double log_prior_alpha(const Eigen::VectorXd& alpha, const Eigen::VectorXd& upper) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (alpha(i) < 0.0 || alpha(i) > upper(i)) return kNegInf;
    lp -= std::log(upper(i));
  }
  return lp;
}

// One Robbins-Monro step on a log scale, clamped.
double adapt_step(double step, double rate, double target, double gain, double lo, double hi) {
  return std::clamp(step * std::exp(gain * (rate - target)), lo, hi);
}

}  // namespace

void ObservedData::validate(std::size_t n_areas) const {
  if (static_cast<std::size_t>(y.size()) != n_areas || static_cast<std::size_t>(E.size()) != n_areas)
    fail_validation("shape_mismatch", "counts and expected counts must have one entry per area");
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    if (!std::isfinite(y(k)) || y(k) < 0.0 || y(k) != std::floor(y(k)))
      fail_validation("bad_count", "observed counts must be non-negative integers");
    if (!(E(k) > 0.0) || !std::isfinite(E(k)))
      fail_validation("bad_expected", "expected counts must be positive and finite");
  }
}

void ChainConfig::validate() const {
  if (n_chains == 0) fail_validation("bad_chain_config", "at least one chain is required");
  if (keep == 0) fail_validation("bad_chain_config", "keep must be positive (nothing would be retained)");
  if (thin == 0) fail_validation("bad_chain_config", "thin must be at least 1");
  if (keep / thin == 0) fail_validation("bad_chain_config", "keep / thin retains no draws");
  if (adapt_window == 0) fail_validation("bad_chain_config", "adapt_window must be positive");
  if (!(phi_step >= 0.0 && tau2_step >= 0.0 && alpha_step >= 0.0))
    fail_validation("bad_chain_config", "step sizes must be non-negative");
  if (!(rho >= 0.0 && rho < 1.0)) fail_validation("bad_rho", "rho must lie in [0, 1)");
  if (!(max_boundary_fraction > 0.0 && max_boundary_fraction <= 1.0))
    fail_validation("bad_fraction", "max boundary fraction must lie in (0, 1]");
  if (!(priors.mu_variance > 0.0 && priors.tau_max > 0.0))
    fail_validation("bad_prior", "prior scales must be positive");
  if (fixed_tau2 && !(*fixed_tau2 > 0.0)) fail_validation("bad_tau2", "fixed tau2 must be positive");
}

double log_likelihood(const Eigen::VectorXd& phi, const ObservedData& data) {
  double ll = 0.0;
  for (Eigen::Index k = 0; k < phi.size(); ++k) {
    const double y = data.y(k);
    const double mean = data.E(k) * std::exp(phi(k));
    ll += (y > 0.0 ? y * (std::log(data.E(k)) + phi(k)) : 0.0) - mean - std::lgamma(y + 1.0);
  }
  return ll;
}

double deviance(const Eigen::VectorXd& phi, const ObservedData& data) { return -2.0 * log_likelihood(phi, data); }

double log_posterior(const ModelState& state, const ModelContext& ctx) {
  const auto& p = state.params;
  double lp = log_density_phi(state.phi, p, state.prec);
  lp += -0.5 * std::log(2.0 * std::numbers::pi * ctx.priors.mu_variance) - p.mu * p.mu / (2.0 * ctx.priors.mu_variance);
  lp += log_prior_tau2(p.tau2, ctx.priors);
  lp += log_prior_alpha(p.alpha, ctx.alpha_upper);
  if (ctx.use_likelihood) lp += log_likelihood(state.phi, ctx.data);
  return lp;
}

ModelState make_state(const ModelContext& ctx, Eigen::VectorXd phi, CarParams params) {
  params.rho = ctx.rho;
  validate(params);
  if (static_cast<std::size_t>(phi.size()) != ctx.graph.size())
    fail_validation("shape_mismatch", "phi length does not match the area count");
  auto adj = evaluate_w(ctx.graph, ctx.dis, params.alpha);
  PrecisionStructure prec(ctx.pattern, adj, params.rho);
  ModelState state{std::move(phi), std::move(params), std::move(adj), std::move(prec), 0.0};
  state.log_post = log_posterior(state, ctx);
  return state;
}

std::size_t update_phi(ModelState& state, const ModelContext& ctx, const Eigen::VectorXd& steps, Rng& rng,
                       std::vector<std::uint8_t>& accepted) {
  const std::size_t n = ctx.graph.size();
  accepted.assign(n, 0);
  std::normal_distribution<double> normal;
  std::size_t count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double current = state.phi(kk);
    const double proposal = current + steps(kk) * normal(rng);
    if (std::abs(proposal) > kPhiBound) continue;

    const auto cond = full_conditional_phi(k, state.phi, state.params, ctx.graph, state.adj);
    double log_ratio = ((current - cond.mean) * (current - cond.mean) - (proposal - cond.mean) * (proposal - cond.mean)) /
                       (2.0 * cond.variance);
    if (ctx.use_likelihood) {
      const double y = ctx.data.y(kk);
      const double e = ctx.data.E(kk);
      log_ratio += y * (proposal - current) - e * (std::exp(proposal) - std::exp(current));
    }
    if (log_ratio >= 0.0 || log_uniform(rng) < log_ratio) {
      state.phi(kk) = proposal;
      accepted[k] = 1;
      ++count;
    }
  }
  return count;
}

Conditional mu_conditional(const ModelState& state, const ModelContext& ctx) {
  const auto& q = state.prec.matrix();
  const Eigen::VectorXd q_ones = q * Eigen::VectorXd::Ones(q.rows());
  const double precision = q_ones.sum() / state.params.tau2 + 1.0 / ctx.priors.mu_variance;
  const double mean = (q_ones.dot(state.phi) / state.params.tau2) / precision;
  return {mean, 1.0 / precision};
}

void update_mu(ModelState& state, const ModelContext& ctx, Rng& rng) {
  const auto cond = mu_conditional(state, ctx);
  std::normal_distribution<double> normal(cond.mean, std::sqrt(cond.variance));
  state.params.mu = normal(rng);
}

bool update_tau2(ModelState& state, const ModelContext& ctx, double step, Rng& rng) {
  const double n = static_cast<double>(state.phi.size());
  const Eigen::VectorXd centred = state.phi.array() - state.params.mu;
  const double qf = state.prec.quad_form(centred);

  // Target on u = log(tau2): CAR density x prior x Jacobian tau2.
  auto log_target = [&](double tau2) {
    const double lp = log_prior_tau2(tau2, ctx.priors);
    if (!std::isfinite(lp)) return kNegInf;
    return -0.5 * n * std::log(tau2) - qf / (2.0 * tau2) + lp + std::log(tau2);
  };

  std::normal_distribution<double> normal;
  const double current = state.params.tau2;
  const double proposal = std::exp(std::log(current) + step * normal(rng));
  const double lt = log_target(proposal);
  if (!std::isfinite(lt)) return false;
  const double log_ratio = lt - log_target(current);
  if (log_ratio >= 0.0 || log_uniform(rng) < log_ratio) {
    state.params.tau2 = proposal;
    return true;
  }
  return false;
}

void update_alpha(ModelState& state, const ModelContext& ctx, const Eigen::VectorXd& steps, Rng& rng,
                  std::vector<std::uint8_t>& accepted) {
  const auto q = state.params.alpha.size();
  accepted.assign(static_cast<std::size_t>(q), 0);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < q; ++i) {
    const double proposal = state.params.alpha(i) + steps(i) * normal(rng);
    if (proposal < 0.0 || proposal > ctx.alpha_upper(i)) continue;

    CarParams params = state.params;
    params.alpha(i) = proposal;
    auto adj = evaluate_w(ctx.graph, ctx.dis, params.alpha);
    if (adj.w == state.adj.w) {
      // Same w pattern: identical density, uniform prior, symmetric proposal.
      state.params.alpha(i) = proposal;
      accepted[static_cast<std::size_t>(i)] = 1;
      continue;
    }
    PrecisionStructure prec(ctx.pattern, adj, params.rho);
    const double log_ratio = log_density_phi(state.phi, params, prec) -
                             log_density_phi(state.phi, state.params, state.prec);
    if (log_ratio >= 0.0 || log_uniform(rng) < log_ratio) {
      state.params = std::move(params);
      state.adj = std::move(adj);
      state.prec = std::move(prec);
      accepted[static_cast<std::size_t>(i)] = 1;
    }
  }
}

Eigen::VectorXd alpha_upper_limits(const DissimilarityData& dis, double max_boundary_fraction) {
  Eigen::VectorXd upper(static_cast<Eigen::Index>(dis.metric_count()));
  for (std::size_t i = 0; i < dis.metric_count(); ++i)
    upper(static_cast<Eigen::Index>(i)) = alpha_prior_upper(dis, i, max_boundary_fraction).upper;
  return upper;
}

namespace {

ModelState initial_state(const ModelContext& ctx, const ChainConfig& config, Rng& rng) {
  const std::size_t n = ctx.graph.size();
  const auto q = static_cast<Eigen::Index>(ctx.dis.metric_count());
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::VectorXd phi(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      phi(kk) = std::log(ctx.data.y(kk) + 0.5) - std::log(ctx.data.E(kk)) + normal(rng);
    }
    CarParams params;
    params.rho = ctx.rho;
    params.mu = config.fixed_mu ? *config.fixed_mu : std::sqrt(ctx.priors.mu_variance) * normal(rng);
    if (config.fixed_tau2) {
      params.tau2 = *config.fixed_tau2;
    } else {
      const double tau = ctx.priors.tau_max * unit(rng);
      params.tau2 = tau * tau;
    }
    if (config.fixed_alpha) {
      params.alpha = *config.fixed_alpha;
    } else {
      params.alpha.resize(q);
      for (Eigen::Index i = 0; i < q; ++i) params.alpha(i) = ctx.alpha_upper(i) * unit(rng);
    }
    if (!(params.tau2 > 0.0)) continue;
    auto state = make_state(ctx, std::move(phi), std::move(params));
    if (std::isfinite(state.log_post)) return state;
  }
  fail_numeric("init_failed", "could not find a finite log-posterior starting point after 100 draws");
}

}  // namespace

ChainSamples run_chain(const ModelContext& ctx, const ChainConfig& config, std::size_t chain_index) {
  const std::size_t n = ctx.graph.size();
  const std::size_t nb = ctx.graph.border_count();
  const auto q = static_cast<Eigen::Index>(ctx.dis.metric_count());
  Rng rng = make_rng(config.seed, "chain", chain_index);

  ModelState state = initial_state(ctx, config, rng);

  Eigen::VectorXd phi_steps = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), config.phi_step);
  double tau2_step = config.tau2_step;
  Eigen::VectorXd alpha_steps(q);
  for (Eigen::Index i = 0; i < q; ++i) alpha_steps(i) = config.alpha_step * ctx.alpha_upper(i);

  const std::size_t retained = config.keep / config.thin;
  ChainSamples out;
  out.chain = chain_index;
  out.phi.resize(static_cast<Eigen::Index>(retained), static_cast<Eigen::Index>(n));
  out.alpha.resize(static_cast<Eigen::Index>(retained), q);
  out.mu.reserve(retained);
  out.tau2.reserve(retained);
  out.deviance.reserve(retained);
  out.w.reserve(retained * nb);

  // Acceptance counters: window (for adaptation) and post burn-in totals.
  std::vector<std::size_t> phi_window(n, 0);
  std::size_t tau2_window = 0;
  std::vector<std::size_t> alpha_window(static_cast<std::size_t>(q), 0);
  std::size_t phi_total = 0, tau2_total = 0;
  std::vector<std::size_t> alpha_total(static_cast<std::size_t>(q), 0);
  std::size_t batches = 0;

  std::vector<std::uint8_t> phi_accepted, alpha_accepted;
  const bool update_mu_block = !config.fixed_mu;
  const bool update_tau2_block = !config.fixed_tau2;
  const bool update_alpha_block = !config.fixed_alpha && q > 0;

  const std::size_t total = config.burn_in + config.keep;
  for (std::size_t iter = 0; iter < total; ++iter) {
    const bool burning = iter < config.burn_in;

    update_phi(state, ctx, phi_steps, rng, phi_accepted);
    if (update_mu_block) update_mu(state, ctx, rng);
    const bool tau2_ok = update_tau2_block && update_tau2(state, ctx, tau2_step, rng);
    if (update_alpha_block) update_alpha(state, ctx, alpha_steps, rng, alpha_accepted);

    if (burning) {
      for (std::size_t k = 0; k < n; ++k) phi_window[k] += phi_accepted[k];
      tau2_window += tau2_ok;
      if (update_alpha_block)
        for (std::size_t i = 0; i < alpha_window.size(); ++i) alpha_window[i] += alpha_accepted[i];

      if (config.adapt && (iter + 1) % config.adapt_window == 0) {
        ++batches;
        const double gain = 1.0 / std::sqrt(static_cast<double>(batches));
        const double w = static_cast<double>(config.adapt_window);
        const double target = config.target_acceptance;
        for (std::size_t k = 0; k < n; ++k) {
          const auto kk = static_cast<Eigen::Index>(k);
          phi_steps(kk) = adapt_step(phi_steps(kk), static_cast<double>(phi_window[k]) / w, target, gain, 1e-4, 10.0);
        }
        tau2_step = adapt_step(tau2_step, static_cast<double>(tau2_window) / w, target, gain, 1e-3, 10.0);
        for (Eigen::Index i = 0; i < q; ++i) {
          const auto ii = static_cast<std::size_t>(i);
          alpha_steps(i) = adapt_step(alpha_steps(i), static_cast<double>(alpha_window[ii]) / w, target, gain,
                                      1e-6 * ctx.alpha_upper(i), ctx.alpha_upper(i));
        }
      }
      if ((iter + 1) % config.adapt_window == 0) {
        std::fill(phi_window.begin(), phi_window.end(), 0);
        tau2_window = 0;
        std::fill(alpha_window.begin(), alpha_window.end(), 0);
      }
      continue;
    }

    for (std::size_t k = 0; k < n; ++k) phi_total += phi_accepted[k];
    tau2_total += tau2_ok;
    if (update_alpha_block)
      for (std::size_t i = 0; i < alpha_total.size(); ++i) alpha_total[i] += alpha_accepted[i];

    const std::size_t post = iter - config.burn_in + 1;
    if (post % config.thin != 0) continue;
    const auto row = static_cast<Eigen::Index>(out.mu.size());
    out.phi.row(row) = state.phi.transpose();
    out.alpha.row(row) = state.params.alpha.transpose();
    out.mu.push_back(state.params.mu);
    out.tau2.push_back(state.params.tau2);
    out.w.insert(out.w.end(), state.adj.w.begin(), state.adj.w.end());
    out.deviance.push_back(deviance(state.phi, ctx.data));
  }

  const double iters = static_cast<double>(config.keep);
  out.acceptance.phi = static_cast<double>(phi_total) / (iters * static_cast<double>(n));
  out.acceptance.tau2 = update_tau2_block ? static_cast<double>(tau2_total) / iters : 1.0;
  for (std::size_t i = 0; i < alpha_total.size(); ++i)
    out.acceptance.alpha.push_back(update_alpha_block ? static_cast<double>(alpha_total[i]) / iters : 1.0);
  return out;
}

PosteriorSamples run_chains(const ObservedData& data, const AreaGraph& graph, const DissimilarityData& dis,
                            const ChainConfig& config) {
  config.validate();
  data.validate(graph.size());
  if (dis.border_count() != graph.border_count())
    fail_validation("shape_mismatch", "dissimilarity data does not match the graph");

  Eigen::VectorXd upper;
  if (config.fixed_alpha) {
    if (static_cast<std::size_t>(config.fixed_alpha->size()) != dis.metric_count())
      fail_validation("shape_mismatch", "fixed alpha length does not match the metric count");
    upper = config.fixed_alpha->cwiseMax(0.0);
    for (Eigen::Index i = 0; i < upper.size(); ++i) upper(i) = std::max(upper(i), 1.0);
  } else {
    upper = alpha_upper_limits(dis, config.max_boundary_fraction);
  }

  const PrecisionPattern pattern(graph);
  const ModelContext ctx{graph, dis, pattern, data, config.rho, config.priors, upper, config.use_likelihood};

  PosteriorSamples samples;
  samples.n_areas = graph.size();
  samples.n_borders = graph.border_count();
  samples.n_metrics = dis.metric_count();
  samples.chains.resize(config.n_chains);
  parallel_for(config.n_chains, config.threads,
               [&](std::size_t c) { samples.chains[c] = run_chain(ctx, config, c); });
  return samples;
}

std::size_t PosteriorSamples::total_draws() const noexcept {
  std::size_t total = 0;
  for (const auto& c : chains) total += c.draws();
  return total;
}

std::vector<double> PosteriorSamples::pooled_mu() const {
  std::vector<double> out;
  for (const auto& c : chains) out.insert(out.end(), c.mu.begin(), c.mu.end());
  return out;
}

std::vector<double> PosteriorSamples::pooled_tau2() const {
  std::vector<double> out;
  for (const auto& c : chains) out.insert(out.end(), c.tau2.begin(), c.tau2.end());
  return out;
}

std::vector<double> PosteriorSamples::pooled_alpha(std::size_t metric) const {
  std::vector<double> out;
  for (const auto& c : chains) {
    const auto col = c.alpha.col(static_cast<Eigen::Index>(metric));
    out.insert(out.end(), col.begin(), col.end());
  }
  return out;
}

DicResult dic(const PosteriorSamples& samples, const ObservedData& data) {
  const std::size_t total = samples.total_draws();
  if (total == 0) fail_validation("empty_samples", "DIC needs at least one retained draw");

  double sum_d = 0.0;
  Eigen::VectorXd mean_risk = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(samples.n_areas));
  for (const auto& c : samples.chains) {
    if (c.deviance.size() != c.draws()) fail_validation("missing_deviance", "deviance trace is incomplete");
    for (double d : c.deviance) sum_d += d;
    mean_risk += c.phi.array().exp().colwise().sum().transpose().matrix();
  }
  const double n = static_cast<double>(total);
  mean_risk /= n;

  DicResult out;
  out.mean_deviance = sum_d / n;
  const double plug_in = deviance(mean_risk.array().log().matrix(), data);
  out.p_d = out.mean_deviance - plug_in;
  out.dic = out.mean_deviance + out.p_d;
  return out;
}

RiskSummary risk_summary(const PosteriorSamples& samples) {
  const std::size_t total = samples.total_draws();
  if (total == 0) fail_validation("empty_samples", "risk summary needs at least one retained draw");
  RiskSummary out;
  std::vector<double> column;
  column.reserve(total);
  for (std::size_t k = 0; k < samples.n_areas; ++k) {
    column.clear();
    for (const auto& c : samples.chains) {
      const auto col = c.phi.col(static_cast<Eigen::Index>(k));
      for (Eigen::Index t = 0; t < col.size(); ++t) column.push_back(std::exp(col(t)));
    }
    std::sort(column.begin(), column.end());
    out.median.push_back(quantile_sorted(column, 0.5));
    out.lower.push_back(quantile_sorted(column, 0.025));
    out.upper.push_back(quantile_sorted(column, 0.975));
    out.mean.push_back(mean(column));
  }
  return out;
}

}  // namespace womble
