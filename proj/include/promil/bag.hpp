#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace promil {

// One row per instance.
using InstanceMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Split { kTrain, kValidation, kTest };

struct Bag {
  std::string id;
  InstanceMatrix instances;
  int label = 0;
  // Diagnostics only. Never read by training.
  std::optional<std::vector<int>> hidden_labels;
  std::optional<double> positive_fraction;

  Eigen::Index size() const { return instances.rows(); }
  Eigen::Index dim() const { return instances.cols(); }

  // Throws DomainError when the bag breaks one of its invariants.
  void validate() const;
};

}  // namespace promil
