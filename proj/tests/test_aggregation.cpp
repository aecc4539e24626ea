#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "promil/aggregation.hpp"
#include "promil/error.hpp"

using namespace promil;
using promil::testing::direct_quantile;

TEST_CASE("head names") {
  CHECK(to_string(Head::kPromil) == "promil");
  CHECK(head_from_string("max") == Head::kMax);
  CHECK(head_from_string("mean") == Head::kMean);
  CHECK_THROWS_AS(head_from_string("median"), DomainError);
}

TEST_CASE("promil_score sorts then estimates") {
  const std::vector<double> preds{0.9, 0.1, 0.2};
  const BagScore s = promil_score(preds, 0.25);
  CHECK(s.score == doctest::Approx(0.5875).epsilon(1e-14));
  CHECK(s.permutation == std::vector<std::size_t>{1, 2, 0});
  REQUIRE(s.aux_score.has_value());
  const std::vector<double> sorted{0.1, 0.2, 0.9};
  CHECK(*s.aux_score == doctest::Approx(static_cast<double>(direct_quantile(sorted, 0.75))).epsilon(1e-13));

  CHECK(promil_score(std::vector<double>{0.42}, 0.3).score == doctest::Approx(0.42).epsilon(1e-15));
  CHECK_THROWS_AS(promil_score(std::vector<double>{}, 0.3), DomainError);
  CHECK_THROWS_AS(promil_score(std::vector<double>{1.2}, 0.3), DomainError);
  CHECK_THROWS_AS(promil_score(std::vector<double>{0.2}, 0.0), DomainError);
}

TEST_CASE("baseline heads") {
  const std::vector<double> preds{0.3, 0.8, 0.1, 0.5};
  CHECK(max_score(preds).score == 0.8);
  CHECK(mean_score(preds).score == doctest::Approx(0.425));
  CHECK_FALSE(max_score(preds).aux_score.has_value());
  CHECK_THROWS_AS(max_score(std::vector<double>{}), DomainError);
  CHECK_THROWS_AS(mean_score(std::vector<double>{}), DomainError);
}

TEST_CASE("decide threshold") {
  CHECK_FALSE(decide(0.5));
  CHECK(decide(std::nextafter(0.5, 1.0)));
  CHECK_FALSE(decide(0.2));
  CHECK(decide(0.99));
}

TEST_CASE("scores are invariant to instance order") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> preds(1 + trial % 40);
    for (double& p : preds) p = u(rng);
    const double q = 0.02 + 0.96 * u(rng);
    const double base = promil_score(preds, q).score;
    const double base_max = max_score(preds).score;
    const double base_mean = mean_score(preds).score;
    std::shuffle(preds.begin(), preds.end(), rng);
    REQUIRE(promil_score(preds, q).score == base);
    REQUIRE(max_score(preds).score == base_max);
    REQUIRE(mean_score(preds).score == doctest::Approx(base_mean).epsilon(1e-14));
  }
}

TEST_CASE("small q recovers the max head on standard MIL bags") {
  // One confident positive instance among near-zero negatives.
  std::vector<double> positive_bag(30, 0.02);
  positive_bag[13] = 0.97;
  const std::vector<double> negative_bag(30, 0.02);
  const double q = 1e-4;
  CHECK(promil_score(positive_bag, q).score == doctest::Approx(max_score(positive_bag).score).epsilon(1e-2));
  CHECK(decide(promil_score(positive_bag, q).score));
  CHECK_FALSE(decide(promil_score(negative_bag, q).score));
  // Ranking matches the max head.
  CHECK(promil_score(positive_bag, q).score > promil_score(negative_bag, q).score);
}

TEST_CASE("score is nonincreasing in q") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> preds(25);
  for (double& p : preds) p = u(rng);
  double prev = 1.0;
  for (double q = 0.01; q < 1.0; q += 0.01) {
    const double s = promil_score(preds, q).score;
    REQUIRE(s <= prev * (1.0 + 1e-13));
    prev = s;
  }
}
