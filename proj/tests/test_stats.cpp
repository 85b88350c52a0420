#include <doctest.h>

#include <cmath>
#include <random>

#include "womble/error.hpp"
#include "womble/rng.hpp"
#include "womble/stats.hpp"

using namespace womble;

TEST_CASE("type-7 quantiles") {
  const std::vector<double> x = {4, 1, 3, 2};
  CHECK(quantile(x, 0.0) == 1.0);
  CHECK(quantile(x, 1.0) == 4.0);
  CHECK(quantile(x, 0.5) == 2.5);
  CHECK(quantile(x, 0.25) == doctest::Approx(1.75));
  CHECK(median(std::vector<double>{5.0}) == 5.0);
  CHECK_THROWS_AS(quantile(x, 1.5), Error);
  CHECK_THROWS_AS(quantile(std::vector<double>{}, 0.5), Error);
}

TEST_CASE("mean and sample variance") {
  const std::vector<double> x = {2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(mean(x) == 5.0);
  CHECK(variance(x) == doctest::Approx(32.0 / 7.0));
}

TEST_CASE("effective sample size") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  // A single estimate scatters by several percent; the average over ten
  // independent iid chains should sit near n.
  double total = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> iid(5000);
    for (auto& v : iid) v = z(rng);
    total += effective_sample_size(iid);
  }
  CHECK(total / 10.0 == doctest::Approx(5000.0).epsilon(0.06));

  // AR(1) with coefficient 0.9 has ESS about n (1 - 0.9) / (1 + 0.9).
  std::vector<double> ar(20000);
  double prev = 0.0;
  for (auto& v : ar) v = prev = 0.9 * prev + z(rng);
  CHECK(effective_sample_size(ar) == doctest::Approx(20000.0 * 0.1 / 1.9).epsilon(0.25));
}

TEST_CASE("Gelman-Rubin") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> same(4, std::vector<double>(1000));
  for (auto& c : same)
    for (auto& v : c) v = z(rng);
  CHECK(gelman_rubin(same) < 1.01);
  auto shifted = same;
  for (auto& v : shifted[0]) v += 3.0;
  CHECK(gelman_rubin(shifted) > 1.1);
  CHECK_THROWS_AS(gelman_rubin({same[0]}), Error);
}

TEST_CASE("derived seeds separate streams and indices") {
  CHECK(derive_seed(1, "chain", 0) != derive_seed(1, "chain", 1));
  CHECK(derive_seed(1, "chain", 0) != derive_seed(1, "replicate", 0));
  CHECK(derive_seed(1, "chain", 0) != derive_seed(2, "chain", 0));
  CHECK(derive_seed(7, "moran", 3) == derive_seed(7, "moran", 3));
}
