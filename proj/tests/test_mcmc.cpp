#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "womble/boundary.hpp"
#include "womble/error.hpp"
#include "womble/mcmc.hpp"
#include "womble/simulate.hpp"
#include "womble/stats.hpp"

using namespace womble;

namespace {

DissimilarityData no_metrics(const AreaGraph& g) {
  DissimilarityData d;
  d.raw = Eigen::MatrixXd(static_cast<Eigen::Index>(g.size()), 0);
  d.border_metrics = Eigen::MatrixXd(static_cast<Eigen::Index>(g.border_count()), 0);
  d.scales = Eigen::VectorXd(0);
  return d;
}

DissimilarityData direct_metrics(const Eigen::MatrixXd& z) {
  DissimilarityData d;
  d.metric_names.assign(static_cast<std::size_t>(z.cols()), "z");
  d.raw = Eigen::MatrixXd(0, z.cols());
  d.border_metrics = z;
  d.scales = Eigen::VectorXd::Ones(z.cols());
  return d;
}

ChainConfig quick(std::size_t chains, std::size_t burn, std::size_t keep, std::uint64_t seed = 1) {
  ChainConfig c;
  c.n_chains = chains;
  c.burn_in = burn;
  c.keep = keep;
  c.seed = seed;
  c.threads = 1;
  return c;
}

// Test fixture owning everything a ModelContext references.
struct Setup {
  AreaGraph graph;
  DissimilarityData dis;
  ObservedData data;
  PrecisionPattern pattern;
  ModelContext ctx;

  Setup(AreaGraph g, DissimilarityData d, ObservedData y, double rho = 0.99)
      : graph(std::move(g)),
        dis(std::move(d)),
        data(std::move(y)),
        pattern(graph),
        ctx{graph, dis, pattern, data, rho, HyperPriors{}, alpha_upper_limits(dis, 0.5), true} {}
};

ObservedData counts(std::vector<double> y, std::vector<double> e) {
  return {Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())),
          Eigen::Map<Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(e.size()))};
}

}  // namespace

TEST_CASE("data validation") {
  CHECK_THROWS_AS(counts({1, -1}, {1, 1}).validate(2), Error);
  CHECK_THROWS_AS(counts({1, 1.5}, {1, 1}).validate(2), Error);
  CHECK_THROWS_AS(counts({1, 1}, {1, 0}).validate(2), Error);
  CHECK_THROWS_AS(counts({1, 1}, {1, 1}).validate(3), Error);
  CHECK_NOTHROW(counts({0, 3}, {0.5, 2}).validate(2));
}

TEST_CASE("chain config validation") {
  auto c = quick(1, 10, 0);
  CHECK_THROWS_AS(c.validate(), Error);
  c = quick(1, 10, 10);
  c.thin = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = quick(0, 10, 10);
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("phi update with zero step leaves the state unchanged") {
  const auto g = AreaGraph::from_pairs(3, {{0, 1}, {1, 2}});
  Setup s(g, no_metrics(g), counts({1, 2, 3}, {1, 1, 1}));
  Rng rng(1);
  auto state = make_state(s.ctx, Eigen::Vector3d(0.1, 0.2, 0.3), CarParams{0.0, 1.0, 0.99, Eigen::VectorXd(0)});
  std::vector<std::uint8_t> accepted;
  const auto n = update_phi(state, s.ctx, Eigen::VectorXd::Zero(3), rng, accepted);
  CHECK(n == 3);
  CHECK(state.phi == Eigen::Vector3d(0.1, 0.2, 0.3));
}

TEST_CASE("phi drifts down when y = 0 under a flat prior") {
  const auto g = AreaGraph::from_pairs(1, {});
  const auto dis = no_metrics(g);
  auto c = quick(1, 0, 4000);
  c.fixed_mu = 0.0;
  c.fixed_tau2 = 100.0;
  c.adapt = false;
  c.phi_step = 1.0;
  const auto samples = run_chains(counts({0}, {1}), g, dis, c);
  const auto phi = samples.chains[0].phi.col(0);
  CHECK(phi.tail(2000).mean() < -2.0);
  CHECK(phi.maxCoeff() <= 50.0);
  CHECK(phi.minCoeff() >= -50.0);
}

TEST_CASE("single-area posterior mean of R matches a grid oracle") {
  // y = 5, E = 1, mu = 0, tau2 = 100, no neighbours: prior sd of phi is 100.
  const auto g = AreaGraph::from_pairs(1, {});
  const auto dis = no_metrics(g);
  auto c = quick(1, 2000, 20000, 3);
  c.fixed_mu = 0.0;
  c.fixed_tau2 = 100.0;
  const auto samples = run_chains(counts({5}, {1}), g, dis, c);
  const double r_mean = samples.chains[0].phi.col(0).array().exp().mean();

  double num = 0.0, den = 0.0;
  for (double phi = -10.0; phi <= 6.0; phi += 1e-4) {
    const double log_p = 5.0 * phi - std::exp(phi) - phi * phi / (2.0 * 1e4);
    num += std::exp(log_p + phi);
    den += std::exp(log_p);
  }
  const double oracle_mean = num / den;
  CHECK(oracle_mean == doctest::Approx(5.0).epsilon(0.01));
  CHECK(std::abs(r_mean - 5.0) < 0.5);
  CHECK(std::abs(r_mean - oracle_mean) < 0.25);
}

TEST_CASE("mu conditional closed forms") {
  const auto one = AreaGraph::from_pairs(1, {});
  Setup s(one, no_metrics(one), counts({1}, {1}));
  auto state = make_state(s.ctx, Eigen::VectorXd::Constant(1, 2.0), CarParams{0.0, 0.01, 0.99, Eigen::VectorXd(0)});
  auto c = mu_conditional(state, s.ctx);
  CHECK(1.0 / c.variance == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(c.mean == doctest::Approx(2.0 / 1.1).epsilon(1e-12));

  state = make_state(s.ctx, Eigen::VectorXd::Zero(1), CarParams{0.0, 1.0, 0.99, Eigen::VectorXd(0)});
  CHECK(mu_conditional(state, s.ctx).mean == 0.0);

  state = make_state(s.ctx, Eigen::VectorXd::Constant(1, 3.0), CarParams{0.0, 1e12, 0.99, Eigen::VectorXd(0)});
  c = mu_conditional(state, s.ctx);
  CHECK(std::abs(c.mean) < 1e-9);
  CHECK(c.variance == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("mu conditional matches a gridded dense posterior") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 5; ++rep) {
    const std::size_t n = 2 + rng() % 5;
    const auto g = AreaGraph::from_pairs(n, oracle::random_pairs(n, 0.6, rng));
    Setup s(g, no_metrics(g), ObservedData{Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)),
                                            Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n))});
    Eigen::VectorXd phi(static_cast<Eigen::Index>(n));
    for (auto& v : phi) v = 1.0 + z(rng);
    const double tau2 = 0.05;
    const auto state = make_state(s.ctx, phi, CarParams{0.0, tau2, 0.99, Eigen::VectorXd(0)});
    const auto cond = mu_conditional(state, s.ctx);

    const std::vector<std::uint8_t> all(g.border_count(), 1);
    const Eigen::MatrixXd cov = tau2 * oracle::dense_precision(g, all, 0.99).inverse();
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    const double sd = std::sqrt(cond.variance);
    for (double mu = cond.mean - 12 * sd; mu <= cond.mean + 12 * sd; mu += sd * 1e-3) {
      const double lp = oracle::mvn_log_density(phi, Eigen::VectorXd::Constant(phi.size(), mu), cov) - mu * mu / 20.0;
      const double p = std::exp(lp - oracle::mvn_log_density(phi, Eigen::VectorXd::Constant(phi.size(), cond.mean), cov));
      m0 += p;
      m1 += p * mu;
      m2 += p * mu * mu;
    }
    const double gm = m1 / m0;
    CHECK(std::abs(cond.mean - gm) < 1e-6 * std::max(1.0, std::abs(gm)));
    CHECK(cond.variance == doctest::Approx(m2 / m0 - gm * gm).epsilon(1e-5));
  }
}

TEST_CASE("tau2 never leaves its prior support") {
  const auto g = AreaGraph::from_pairs(3, {{0, 1}, {1, 2}});
  Setup s(g, no_metrics(g), counts({1, 1, 1}, {1, 1, 1}));
  Rng rng(4);
  Eigen::VectorXd phi(3);
  phi << -20.0, 20.0, -20.0;  // huge quadratic form pushes tau2 up
  auto state = make_state(s.ctx, phi, CarParams{0.0, 99.0, 0.99, Eigen::VectorXd(0)});
  double highest = 0.0;
  for (int i = 0; i < 5000; ++i) {
    update_tau2(state, s.ctx, 1.0, rng);
    highest = std::max(highest, state.params.tau2);
  }
  CHECK(highest <= 100.0);
  CHECK(highest > 50.0);
}

TEST_CASE("tau2 drifts to zero when phi = mu") {
  const auto g = AreaGraph::from_pairs(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  Setup s(g, no_metrics(g), ObservedData{Eigen::VectorXd::Ones(5), Eigen::VectorXd::Ones(5)});
  Rng rng(6);
  auto state = make_state(s.ctx, Eigen::VectorXd::Constant(5, 0.4), CarParams{0.4, 1.0, 0.99, Eigen::VectorXd(0)});
  for (int i = 0; i < 2000; ++i) update_tau2(state, s.ctx, 1.0, rng);
  CHECK(state.params.tau2 < 1e-3);
}

TEST_CASE("alpha moves that keep w are always accepted") {
  // Every border has z = 1 and M = ln 2, so any alpha in [0, M] keeps all w = 1.
  const auto g = AreaGraph::from_pairs(4, {{0, 1}, {1, 2}, {2, 3}});
  Setup s(g, direct_metrics(Eigen::MatrixXd::Ones(3, 1)), counts({1, 2, 3, 4}, {1, 1, 1, 1}));
  REQUIRE(s.ctx.alpha_upper(0) == doctest::Approx(std::numbers::ln2));
  Rng rng(2);
  auto state = make_state(s.ctx, Eigen::VectorXd::Zero(4),
                          CarParams{0.0, 1.0, 0.99, Eigen::VectorXd::Constant(1, std::numbers::ln2 / 2)});
  std::vector<std::uint8_t> accepted;
  const Eigen::VectorXd steps = Eigen::VectorXd::Constant(1, 0.01 * std::numbers::ln2);
  for (int i = 0; i < 10; ++i) {
    const double before = state.params.alpha(0);
    update_alpha(state, s.ctx, steps, rng, accepted);
    CHECK(accepted[0] == 1);
    CHECK(state.params.alpha(0) != before);
    CHECK(state.adj.boundary_count == 0);
  }
}

TEST_CASE("retained w equals evaluate_w at the retained alpha; alpha stays in [0, M]") {
  const auto sc = lattice_scenario(8, 50.0);
  Rng rng(12);
  const auto truth = sc.true_boundaries();
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(truth.size()), 2);
  raw.col(0) = gen_dissimilarity(truth, 2.0, rng);
  raw.col(1) = gen_dissimilarity(truth, 0.0, rng);
  const auto dis = standardize_border_values(sc.graph, raw);
  const Eigen::VectorXd risk = surface_mean(sc.groups, 0.5).array().exp();
  const ObservedData data{gen_counts(risk, sc.expected, rng), sc.expected};
  const auto samples = run_chains(data, sc.graph, dis, quick(2, 300, 300, 5));
  const auto upper = alpha_upper_limits(dis, 0.5);
  for (const auto& c : samples.chains) {
    REQUIRE(c.draws() == 300);
    for (std::size_t t = 0; t < c.draws(); ++t) {
      const Eigen::VectorXd alpha = c.alpha.row(static_cast<Eigen::Index>(t)).transpose();
      CHECK(alpha.minCoeff() >= 0.0);
      CHECK((alpha.array() <= upper.array()).all());
      const auto adj = evaluate_w(sc.graph, dis, alpha);
      const std::vector<std::uint8_t> rec(c.w.begin() + static_cast<std::ptrdiff_t>(t * samples.n_borders),
                                          c.w.begin() + static_cast<std::ptrdiff_t>((t + 1) * samples.n_borders));
      CHECK(adj.w == rec);
    }
  }
}

TEST_CASE("thinning and determinism across thread counts") {
  const auto sc = lattice_scenario(6, 30.0);
  Rng rng(1);
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(sc.graph.border_count()), 1);
  raw.col(0) = gen_dissimilarity(sc.true_boundaries(), 3.0, rng);
  const auto dis = standardize_border_values(sc.graph, raw);
  const ObservedData data{gen_counts(Eigen::VectorXd::Ones(36), sc.expected, rng), sc.expected};
  auto c = quick(3, 200, 300, 77);
  c.thin = 3;
  const auto a = run_chains(data, sc.graph, dis, c);
  c.threads = 3;
  const auto b = run_chains(data, sc.graph, dis, c);
  REQUIRE(a.chains.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.chains[i].draws() == 100);
    CHECK(a.chains[i].phi == b.chains[i].phi);
    CHECK(a.chains[i].mu == b.chains[i].mu);
    CHECK(a.chains[i].tau2 == b.chains[i].tau2);
    CHECK(a.chains[i].alpha == b.chains[i].alpha);
    CHECK(a.chains[i].w == b.chains[i].w);
  }
  CHECK(a.chains[0].mu != a.chains[1].mu);
}

TEST_CASE("deviance closed form") {
  const auto data = counts({1, 1, 1, 1}, {1, 1, 1, 1});
  CHECK(deviance(Eigen::VectorXd::Zero(4), data) == doctest::Approx(8.0).epsilon(1e-14));
  // Factorials kept: y = 3, E = 1, phi = 0 gives -2 (0 - 1 - ln 6).
  CHECK(deviance(Eigen::VectorXd::Zero(1), counts({3}, {1})) == doctest::Approx(2.0 + 2.0 * std::log(6.0)));
}

TEST_CASE("DIC of a single retained draw has p_D = 0") {
  const auto g = AreaGraph::from_pairs(3, {{0, 1}, {1, 2}});
  const auto data = counts({2, 4, 3}, {2, 3, 3});
  const auto samples = run_chains(data, g, no_metrics(g), quick(1, 50, 1));
  const auto d = dic(samples, data);
  CHECK(std::abs(d.p_d) < 1e-9);
  CHECK(d.dic == doctest::Approx(samples.chains[0].deviance[0]).epsilon(1e-12));
}

TEST_CASE("DIC prefers the true adjacency over all boundaries on correlated data") {
  // Truth: a smooth 8x8 surface with one raised block. Model A keeps exactly
  // the true non-boundaries; model B cuts every border.
  const auto sc = lattice_scenario(8, 50.0);
  const auto truth = sc.true_boundaries();
  const double range = calibrate_range(*sc.graph.centroids(), 0.5);
  const SurfaceGenerator surface(*sc.graph.centroids(), range, 2.5, 0.3);
  const auto mean = surface_mean(sc.groups, 0.4);

  Eigen::MatrixXd truth_metric(static_cast<Eigen::Index>(truth.size()), 1);
  for (std::size_t b = 0; b < truth.size(); ++b) truth_metric(static_cast<Eigen::Index>(b), 0) = truth[b] ? 1.0 : 0.0;
  const auto dis_true = direct_metrics(truth_metric);
  const auto dis_cut = direct_metrics(Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(truth.size()), 1));
  const Eigen::VectorXd cut_all = Eigen::VectorXd::Constant(1, 10.0);

  int wins = 0;
  for (std::size_t r = 0; r < 20; ++r) {
    Rng rng = make_rng(99, "dic-test", r);
    const ObservedData data{gen_counts(surface.sample(mean, rng).array().exp(), sc.expected, rng), sc.expected};
    auto c = quick(1, 1000, 1000, r + 1);
    c.fixed_alpha = cut_all;
    const auto a = dic(run_chains(data, sc.graph, dis_true, c), data);
    const auto b = dic(run_chains(data, sc.graph, dis_cut, c), data);
    wins += a.dic < b.dic;
  }
  CHECK(wins >= 16);
}

TEST_CASE("a near-perfect metric puts alpha above alpha_min") {
  const auto sc = lattice_scenario(16, 100.0);
  const auto truth = sc.true_boundaries();
  const double range = calibrate_range(*sc.graph.centroids(), 0.5);
  const SurfaceGenerator surface(*sc.graph.centroids(), range, 2.5, 0.3);
  Rng rng = make_rng(5, "alpha-test");
  const Eigen::VectorXd phi = surface.sample(surface_mean(sc.groups, 0.4), rng);
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(truth.size()), 1);
  raw.col(0) = gen_dissimilarity(truth, 3.0, rng);
  const auto dis = standardize_border_values(sc.graph, raw);
  const ObservedData data{gen_counts(phi.array().exp(), sc.expected, rng), sc.expected};
  const auto samples = run_chains(data, sc.graph, dis, quick(2, 2000, 1000, 8));
  const auto draws = samples.pooled_alpha(0);
  const double amin = alpha_min(dis, 0);
  const double above = static_cast<double>(std::count_if(draws.begin(), draws.end(), [&](double a) { return a > amin; }));
  CHECK(above / static_cast<double>(draws.size()) >= 0.95);
  CHECK(classify_effect(draws, amin) == Effect::Substantial);
}
