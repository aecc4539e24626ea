#pragma once

// generate -> train -> evaluate pipeline shared by the CLI, the acceptance
// suite and the Python module.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promil/io.hpp"

namespace promil {

enum class SweepAxis { kThreshold, kBagSize, kNBags };

std::string_view to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(std::string_view name);

// Generates (or, for the mnist source, assembles) a dataset and tags every bag
// with its split.
DatasetFile build_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

// Trains on the dataset's train split, early-stopping on its validation split.
TrainedModel train_on(const DatasetFile& dataset, const ExperimentConfig& cfg, Head head, std::uint64_t seed);

// Applies one sweep axis value to a copy of the config.
ExperimentConfig with_axis_value(const ExperimentConfig& cfg, SweepAxis axis, double value);

struct SweepRow {
  SweepAxis axis = SweepAxis::kThreshold;
  double value = 0.0;
  Head method = Head::kPromil;
  std::uint64_t seed = 0;
  double auc = 0.0;
  double balanced_accuracy = 0.0;
  std::optional<double> learned_q;
  std::string status = "ok";
};

inline constexpr const char* kSweepCsvHeader = "axis,value,method,seed,auc,balanced_accuracy,learned_q,status";

// One row per (value, method, repeat), ordered by value, method, then seed.
// Seeds are cfg.seed + repeat. A failing cell is recorded in its row.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                                const std::vector<Head>& methods);

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string format_number(double v);

}  // namespace promil
