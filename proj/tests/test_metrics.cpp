#include <doctest.h>

#include <cmath>
#include <random>

#include "promil/aggregation.hpp"
#include "promil/error.hpp"
#include "promil/metrics.hpp"

using namespace promil;

namespace {

// O(P*N) pairwise count, independent of the rank-based implementation.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

}  // namespace

TEST_CASE("auc examples") {
  CHECK(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75);
  CHECK(auc(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 1}) == 1.0);
  CHECK(auc(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 1}) == 0.0);
  CHECK(auc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{0, 1, 1}) == 0.5);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), DomainError);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), DomainError);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 2}), DomainError);
}

TEST_CASE("auc properties on random data") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + static_cast<std::size_t>(trial % 40);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid so that ties occur.
      s[i] = std::round(u(rng) * 10.0) / 10.0;
      y[i] = i < 2 ? static_cast<int>(i) : (u(rng) < 0.4 ? 1 : 0);
    }
    const double a = auc(s, y);
    REQUIRE(a == doctest::Approx(pairwise_auc(s, y)).epsilon(1e-12));

    // Strictly increasing transform.
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    REQUIRE(auc(t, y) == doctest::Approx(a).epsilon(1e-12));

    std::vector<int> flipped(n);
    for (std::size_t i = 0; i < n; ++i) flipped[i] = 1 - y[i];
    REQUIRE(auc(s, flipped) == doctest::Approx(1.0 - a).epsilon(1e-12));

    // Duplicating every negative leaves the statistic unchanged.
    std::vector<double> s2 = s;
    std::vector<int> y2 = y;
    for (std::size_t i = 0; i < n; ++i) {
      if (y[i] == 0) {
        s2.push_back(s[i]);
        y2.push_back(0);
      }
    }
    REQUIRE(auc(s2, y2) == doctest::Approx(a).epsilon(1e-12));
  }
}

TEST_CASE("balanced accuracy") {
  // 4 of 5 positives right, 3 of 5 negatives right.
  const std::vector<int> y{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  const std::vector<int> p{1, 1, 1, 1, 0, 0, 0, 0, 1, 1};
  CHECK(balanced_accuracy(p, y) == doctest::Approx(0.7));
  const Confusion c = confusion_matrix(p, y);
  CHECK(c.tp == 4);
  CHECK(c.fn == 1);
  CHECK(c.tn == 3);
  CHECK(c.fp == 2);
  CHECK(c.total() == 10);
  CHECK(balanced_accuracy(y, y) == 1.0);
  CHECK(balanced_accuracy(std::vector<int>(10, 1), y) == 0.5);
  CHECK_THROWS_AS(balanced_accuracy(std::vector<int>{1, 1}, std::vector<int>{1, 1}), DomainError);
}

TEST_CASE("evaluate_predictions uses the chosen head") {
  // One bag with a single confident instance and one flat low bag.
  const std::vector<std::vector<double>> preds{{0.05, 0.05, 0.05, 0.95}, {0.1, 0.1, 0.1, 0.1}};
  const std::vector<int> labels{1, 0};
  const EvalResult max_r = evaluate_predictions(preds, labels, Head::kMax, 0.5);
  CHECK(max_r.auc == 1.0);
  CHECK(max_r.balanced_accuracy == 1.0);
  const EvalResult mean_r = evaluate_predictions(preds, labels, Head::kMean, 0.5);
  CHECK(mean_r.auc == 1.0);
  CHECK(mean_r.confusion.tp == 0);
  // At q = 0.5 the quantile head sees mostly the 0.05 instances.
  const EvalResult pr = evaluate_predictions(preds, labels, Head::kPromil, 0.5);
  CHECK(pr.confusion.tp == 0);
  CHECK(pr.n_bags == 2);
  // As q -> 0 it behaves like max.
  const EvalResult pr0 = evaluate_predictions(preds, labels, Head::kPromil, 1e-6);
  CHECK(pr0.confusion.tp == 1);
  CHECK(pr0.balanced_accuracy == 1.0);
  CHECK(score_predictions(preds[0], Head::kPromil, 1e-6) == doctest::Approx(0.95).epsilon(1e-4));

  CHECK_THROWS_AS(evaluate_predictions(preds, std::vector<int>{1}, Head::kMax, 0.5), DomainError);
  CHECK_THROWS_AS(evaluate_predictions({}, std::vector<int>{}, Head::kMax, 0.5), DomainError);
}

TEST_CASE("evaluate runs the network on each bag") {
  Model model;
  model.net = init_params(NetArch{1, {}, Activation::kRelu}, 0);
  model.net.layers[0].weight << 4.0;
  model.net.layers[0].bias << 0.0;
  model.q = QuantileParam::from_q(0.3);
  std::vector<Bag> bags(2);
  bags[0].id = "pos";
  bags[0].label = 1;
  bags[0].instances = InstanceMatrix::Constant(5, 1, 2.0);
  bags[1].id = "neg";
  bags[1].label = 0;
  bags[1].instances = InstanceMatrix::Constant(5, 1, -2.0);
  const EvalResult r = evaluate(model, bags, Head::kPromil);
  CHECK(r.auc == 1.0);
  CHECK(r.balanced_accuracy == 1.0);
  const double expected = 1.0 / (1.0 + std::exp(-8.0));
  CHECK(score_bag(model, bags[0], Head::kPromil) == doctest::Approx(expected).epsilon(1e-12));
}
