#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "womble/error.hpp"
#include "womble/graph.hpp"

using namespace womble;

namespace {

const double kLn2 = std::numbers::ln2;

// Border-level metrics used as-is (no standardization), for closed-form checks.
DissimilarityData direct_metrics(const Eigen::MatrixXd& z) {
  DissimilarityData d;
  d.metric_names.assign(static_cast<std::size_t>(z.cols()), "z");
  d.raw = Eigen::MatrixXd(0, z.cols());
  d.border_metrics = z;
  d.scales = Eigen::VectorXd::Ones(z.cols());
  return d;
}

template <typename Fn>
void require_error(Fn&& fn, const std::string& code) {
  try {
    fn();
    FAIL("expected error " << code);
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

}  // namespace

TEST_CASE("graph from a 0/1 matrix") {
  const auto g = AreaGraph::from_matrix({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});
  REQUIRE(g.border_count() == 2);
  CHECK(g.border(0) == Border{0, 1});
  CHECK(g.border(1) == Border{1, 2});
  CHECK(g.component_count() == 1);
}

TEST_CASE("graph components") {
  CHECK(AreaGraph::from_pairs(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}).border_count() == 4);
  CHECK(AreaGraph::from_pairs(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}).component_count() == 1);
  CHECK(AreaGraph::from_pairs(4, {{0, 1}, {2, 3}}).component_count() == 2);
  CHECK(AreaGraph::from_pairs(3, {}).component_count() == 3);
}

TEST_CASE("graph normalizes duplicate and reversed pairs") {
  const auto g = AreaGraph::from_pairs(3, {{1, 0}, {0, 1}, {2, 1}, {1, 2}});
  CHECK(g.border_count() == 2);
  CHECK(g.border(0) == Border{0, 1});
  CHECK(g.incident(1).size() == 2);
}

TEST_CASE("graph construction errors") {
  require_error([] { AreaGraph::from_matrix({{0, 1}, {0, 0}}); }, "asymmetric_matrix");
  require_error([] { AreaGraph::from_matrix({{1, 0}, {0, 0}}); }, "self_loop");
  require_error([] { AreaGraph::from_matrix({{0, 2}, {2, 0}}); }, "not_binary");
  require_error([] { AreaGraph::from_matrix({{0, 1}, {1}}); }, "not_square");
  require_error([] { AreaGraph::from_pairs(2, {{0, 2}}); }, "index_out_of_range");
  require_error([] { AreaGraph::from_pairs(2, {{1, 1}}); }, "self_loop");
  require_error([] { AreaGraph::from_pairs(0, {}); }, "empty_graph");
  require_error([] { AreaGraph({"a", "a"}, {}); }, "duplicate_area_id");
}

TEST_CASE("area lookup") {
  const AreaGraph g({"x", "y"}, {{0, 1}});
  CHECK(g.index_of("y") == 1);
  CHECK_FALSE(g.find("z").has_value());
  require_error([&] { (void)g.index_of("z"); }, "unknown_area");
}

TEST_CASE("border metrics use the sample SD over borders") {
  // Path 0-1-2 with covariate 0, 2, 6: raw differences 2 and 4, sample SD sqrt(2).
  const auto g = AreaGraph::from_pairs(3, {{0, 1}, {1, 2}});
  Eigen::MatrixXd cov(3, 1);
  cov << 0, 2, 6;
  const auto d = compute_border_metrics(g, cov, {"x"});
  CHECK(d.scales(0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(d.border_metrics(0, 0) == doctest::Approx(2.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(d.border_metrics(1, 0) == doctest::Approx(4.0 / std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("border metric errors") {
  const auto single = AreaGraph::from_pairs(2, {{0, 1}});
  Eigen::MatrixXd two(2, 1);
  two << 1, 3;
  require_error([&] { compute_border_metrics(single, two); }, "too_few_borders");

  const auto path = AreaGraph::from_pairs(3, {{0, 1}, {1, 2}});
  Eigen::MatrixXd constant(3, 1);
  constant << 0, 1, 2;  // both differences 1: zero spread
  require_error([&] { compute_border_metrics(path, constant, {"flat"}); }, "constant_metric");

  Eigen::MatrixXd missing(3, 1);
  missing << 0, std::nan(""), 2;
  require_error([&] { compute_border_metrics(path, missing); }, "missing_covariate");
  require_error([&] { compute_border_metrics(path, Eigen::MatrixXd(3, 0)); }, "no_metrics");
}

TEST_CASE("identical neighbours get zero dissimilarity") {
  const auto g = AreaGraph::from_pairs(4, {{0, 1}, {1, 2}, {2, 3}});
  Eigen::MatrixXd cov(4, 1);
  cov << 1, 1, 5, 2;
  const auto d = compute_border_metrics(g, cov);
  CHECK(d.border_metrics(0, 0) == 0.0);
  Eigen::VectorXd alpha(1);
  alpha << 1e6;
  CHECK(evaluate_w(g, d, alpha).w[0] == 1);
}

TEST_CASE("evaluate_w thresholds") {
  const auto g = AreaGraph::from_pairs(3, {{0, 1}, {1, 2}});
  Eigen::MatrixXd z(2, 1);
  z << 2.0, 1.0;
  const auto d = direct_metrics(z);

  Eigen::VectorXd alpha(1);
  alpha << 0.0;
  auto adj = evaluate_w(g, d, alpha);
  CHECK(adj.boundary_count == 0);

  // exp(-2 * ln2 / 2) = 0.5 exactly: kept.
  alpha << kLn2 / 2.0;
  adj = evaluate_w(g, d, alpha);
  CHECK(adj.w[0] == 1);
  alpha << std::nextafter(kLn2 / 2.0, 1.0) * (1.0 + 1e-12);
  adj = evaluate_w(g, d, alpha);
  CHECK(adj.w[0] == 0);
  CHECK(adj.w[1] == 1);
  CHECK(adj.boundary_count == 1);
  CHECK(adj.row_sums == std::vector<std::size_t>{0, 1, 1});

  alpha << -0.1;
  require_error([&] { evaluate_w(g, d, alpha); }, "negative_alpha");
}

TEST_CASE("alpha_min closed forms") {
  const auto g = AreaGraph::from_pairs(3, {{0, 1}, {1, 2}});
  Eigen::MatrixXd z(2, 1);
  z << 0.3, kLn2 / 0.131;
  CHECK(alpha_min(direct_metrics(z), 0) == doctest::Approx(0.131).epsilon(1e-12));
  z << 1.0, 0.5;
  CHECK(alpha_min(direct_metrics(z), 0) == doctest::Approx(kLn2).epsilon(1e-14));
  z << 2.0 * kLn2, 0.1;
  CHECK(alpha_min(direct_metrics(z), 0) == doctest::Approx(0.5).epsilon(1e-14));
  z << 0.0, 0.0;
  require_error([&] { alpha_min(direct_metrics(z), 0); }, "zero_metric");
}

TEST_CASE("alpha prior upper bound caps the boundary share") {
  const auto g = AreaGraph::from_pairs(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  Eigen::MatrixXd z(4, 1);
  z << 3, 1, 4, 2;
  const auto d = direct_metrics(z);
  const auto bound = alpha_prior_upper(d, 0, 0.5);
  Eigen::VectorXd alpha(1);
  alpha << bound.upper;
  CHECK(evaluate_w(g, d, alpha).boundary_count <= 2);
  // Every candidate threshold ln2 / z_b that would flag more than two is larger.
  for (double zb : {1.0, 2.0, 3.0, 4.0}) {
    alpha << kLn2 / zb * (1.0 + 1e-9);
    if (evaluate_w(g, d, alpha).boundary_count > 2) CHECK(bound.upper < alpha(0));
  }
  CHECK(bound.natural_limit == doctest::Approx(kLn2));

  const auto all = alpha_prior_upper(d, 0, 1.0);
  CHECK(all.upper == doctest::Approx(kLn2 / 1.0));

  require_error([&] { alpha_prior_upper(d, 0, 0.0); }, "bad_fraction");
  require_error([&] { alpha_prior_upper(d, 0, 1.5); }, "bad_fraction");
}

TEST_CASE("alpha prior upper bound on a single border") {
  const auto g = AreaGraph::from_pairs(2, {{0, 1}});
  Eigen::MatrixXd z(1, 1);
  z << 1.7;
  CHECK(alpha_prior_upper(direct_metrics(z), 0, 1.0).upper == doctest::Approx(kLn2 / 1.7));
}

TEST_CASE("alpha prior upper bound: zero quantile") {
  const auto g = AreaGraph::from_pairs(4, {{0, 1}, {1, 2}, {2, 3}});
  Eigen::MatrixXd z(3, 1);
  z << 0, 0, 1;
  require_error([&] { alpha_prior_upper(direct_metrics(z), 0, 0.5); }, "zero_quantile");
}

TEST_CASE("property: at most the requested fraction is flagged at alpha = M") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 3 + rng() % 10;
    auto pairs = oracle::random_pairs(n, 0.5, rng);
    if (pairs.size() < 2) continue;
    const auto g = AreaGraph::from_pairs(n, pairs);
    Eigen::MatrixXd cov(static_cast<Eigen::Index>(n), 1);
    for (Eigen::Index k = 0; k < cov.rows(); ++k) cov(k, 0) = std::floor(u(rng) * 6.0);  // ties
    DissimilarityData d;
    try {
      d = compute_border_metrics(g, cov);
    } catch (const Error&) {
      continue;
    }
    const double f = 0.05 + 0.95 * u(rng);
    AlphaPriorBound bound;
    try {
      bound = alpha_prior_upper(d, 0, f);
    } catch (const Error& e) {
      CHECK(e.code() == "zero_quantile");
      continue;
    }
    Eigen::VectorXd alpha(1);
    alpha << bound.upper;
    CHECK(static_cast<double>(evaluate_w(g, d, alpha).boundary_count) <= f * static_cast<double>(g.border_count()) + 1e-9);
  }
}

TEST_CASE("property: adjacency bookkeeping") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng() % 8;
    const auto g = AreaGraph::from_pairs(n, oracle::random_pairs(n, 0.6, rng));
    std::vector<std::uint8_t> w(g.border_count());
    for (auto& x : w) x = rng() % 2;
    const auto adj = adjacency_from_w(g, w);
    std::size_t ones = 0;
    std::vector<std::size_t> sums(n, 0);
    for (std::size_t b = 0; b < w.size(); ++b)
      if (w[b]) {
        ++ones;
        ++sums[g.border(b).k];
        ++sums[g.border(b).j];
      }
    CHECK(adj.boundary_count + ones == g.border_count());
    CHECK(adj.row_sums == sums);
  }
}
