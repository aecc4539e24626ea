#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "promil/aggregation.hpp"
#include "promil/bag.hpp"
#include "promil/bernstein_quantile.hpp"
#include "promil/instance_net.hpp"

namespace promil {

// A trained instance network together with its quantile level.
struct Model {
  NetParams net;
  QuantileParam q;
  Head head = Head::kPromil;
};

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

struct EvalResult {
  double auc = 0.0;
  double balanced_accuracy = 0.0;
  Confusion confusion;
  std::size_t n_bags = 0;
};

// Mann-Whitney statistic: P(random positive outscores random negative), ties
// count one half.
double auc(std::span<const double> scores, std::span<const int> labels);

double balanced_accuracy(std::span<const int> predicted, std::span<const int> labels);
double balanced_accuracy(const Confusion& confusion);

Confusion confusion_matrix(std::span<const int> predicted, std::span<const int> labels);

double score_predictions(std::span<const double> predictions, Head head, double q,
                         double eps = kDefaultClampEps);
double score_bag(const Model& model, const Bag& bag, Head head, double eps = kDefaultClampEps);

// Scores for precomputed per-bag instance predictions.
EvalResult evaluate_predictions(const std::vector<std::vector<double>>& predictions,
                                std::span<const int> labels, Head head, double q,
                                double eps = kDefaultClampEps);

EvalResult evaluate(const Model& model, std::span<const Bag> bags, Head head,
                    double eps = kDefaultClampEps);

}  // namespace promil
