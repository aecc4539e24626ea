#pragma once

// Bag-level scoring heads and the bag decision rule.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "promil/bernstein_quantile.hpp"

namespace promil {

enum class Head { kPromil, kMax, kMean };

std::string_view to_string(Head head);
Head head_from_string(std::string_view name);

struct BagScore {
  double score = 0.0;
  // Estimate at level 1-q on the same sorted list (quantile head only).
  std::optional<double> aux_score;
  // Sorting permutation (quantile head only).
  std::vector<std::size_t> permutation;
};

BagScore promil_score(std::span<const double> predictions, double q,
                      double eps = kDefaultClampEps);
BagScore max_score(std::span<const double> predictions);
BagScore mean_score(std::span<const double> predictions);

// Positive iff score > 0.5; a score of exactly 0.5 is negative.
bool decide(double score);

}  // namespace promil
