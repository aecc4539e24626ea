#include "promil/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "promil/error.hpp"

namespace promil {

namespace {

void require_binary(std::span<const int> labels) {
  for (int y : labels) {
    if (y != 0 && y != 1) throw DomainError("labels must be 0 or 1");
  }
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DomainError("scores and labels differ in length");
  require_binary(labels);
  const std::size_t n = scores.size();
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DomainError("AUC needs both classes present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average 1-based ranks over tie groups.
  double positive_rank_sum = 0.0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    const double avg_rank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t j = start; j < end; ++j) {
      if (labels[order[j]] == 1) positive_rank_sum += avg_rank;
    }
    start = end;
  }
  const double p = static_cast<double>(n_pos);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n_neg));
}

Confusion confusion_matrix(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw DomainError("predictions and labels differ in length");
  require_binary(predicted);
  require_binary(labels);
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      (predicted[i] == 1 ? c.tp : c.fn)++;
    } else {
      (predicted[i] == 1 ? c.fp : c.tn)++;
    }
  }
  return c;
}

double balanced_accuracy(const Confusion& c) {
  if (c.tp + c.fn == 0 || c.tn + c.fp == 0) {
    throw DomainError("balanced accuracy needs both classes present");
  }
  const double sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const double specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return 0.5 * (sensitivity + specificity);
}

double balanced_accuracy(std::span<const int> predicted, std::span<const int> labels) {
  return balanced_accuracy(confusion_matrix(predicted, labels));
}

double score_predictions(std::span<const double> predictions, Head head, double q, double eps) {
  switch (head) {
    case Head::kPromil:
      return promil_score(predictions, q, eps).score;
    case Head::kMax:
      return max_score(predictions).score;
    case Head::kMean:
      return mean_score(predictions).score;
  }
  return 0.0;
}

double score_bag(const Model& model, const Bag& bag, Head head, double eps) {
  const BagForward fwd = forward_bag(model.net, bag);
  return score_predictions(fwd.predictions, head, model.q.q(), eps);
}

EvalResult evaluate_predictions(const std::vector<std::vector<double>>& predictions,
                                std::span<const int> labels, Head head, double q, double eps) {
  if (predictions.size() != labels.size()) throw DomainError("predictions and labels differ in length");
  if (predictions.empty()) throw DomainError("cannot evaluate an empty bag list");
  std::vector<double> scores;
  std::vector<int> decisions;
  scores.reserve(predictions.size());
  for (const auto& bag_predictions : predictions) {
    const double s = score_predictions(bag_predictions, head, q, eps);
    if (!std::isfinite(s)) throw NumericalError("non-finite bag score");
    scores.push_back(s);
    decisions.push_back(decide(s) ? 1 : 0);
  }
  EvalResult result;
  result.n_bags = predictions.size();
  result.confusion = confusion_matrix(decisions, labels);
  result.balanced_accuracy = balanced_accuracy(result.confusion);
  result.auc = auc(scores, labels);
  return result;
}

EvalResult evaluate(const Model& model, std::span<const Bag> bags, Head head, double eps) {
  std::vector<std::vector<double>> predictions;
  std::vector<int> labels;
  predictions.reserve(bags.size());
  for (const Bag& bag : bags) {
    predictions.push_back(forward_bag(model.net, bag).predictions);
    labels.push_back(bag.label);
  }
  return evaluate_predictions(predictions, labels, head, model.q.q(), eps);
}

}  // namespace promil
