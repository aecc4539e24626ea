#include "promil/aggregation.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "promil/error.hpp"

namespace promil {

namespace {

void require_nonempty(std::span<const double> predictions) {
  if (predictions.empty()) throw DomainError("cannot score an empty bag");
}

}  // namespace

std::string_view to_string(Head head) {
  switch (head) {
    case Head::kPromil:
      return "promil";
    case Head::kMax:
      return "max";
    case Head::kMean:
      return "mean";
  }
  return "promil";
}

Head head_from_string(std::string_view name) {
  if (name == "promil") return Head::kPromil;
  if (name == "max") return Head::kMax;
  if (name == "mean") return Head::kMean;
  throw DomainError("unknown head '" + std::string(name) + "' (expected promil, max or mean)");
}

BagScore promil_score(std::span<const double> predictions, double q, double eps) {
  require_nonempty(predictions);
  SortedPredictions sorted = SortedPredictions::from_unsorted(predictions);
  sorted.validate();
  BagScore out;
  out.score = estimate_quantile(sorted.values, q, eps);
  out.aux_score = estimate_quantile(sorted.values, 1.0 - q, eps);
  out.permutation = std::move(sorted.permutation);
  return out;
}

BagScore max_score(std::span<const double> predictions) {
  require_nonempty(predictions);
  return {*std::max_element(predictions.begin(), predictions.end()), std::nullopt, {}};
}

BagScore mean_score(std::span<const double> predictions) {
  require_nonempty(predictions);
  const double sum = std::accumulate(predictions.begin(), predictions.end(), 0.0);
  return {sum / static_cast<double>(predictions.size()), std::nullopt, {}};
}

bool decide(double score) { return score > 0.5; }

}  // namespace promil
