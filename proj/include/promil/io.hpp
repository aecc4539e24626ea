#pragma once

// Structured-text (JSON) persistence for datasets, models and experiment
// configurations. Every document carries a "schema" field:
//
//   bagdata/1        dataset container (spec, seed, bags with split tags)
//   promil-model/1   architecture, flattened parameters, q, training metadata
//   promil-config/1  experiment configuration
//
// Field names are documented in README.md.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promil/bagdata.hpp"
#include "promil/instance_net.hpp"
#include "promil/metrics.hpp"
#include "promil/training.hpp"

namespace promil {

inline constexpr const char* kDatasetSchema = "bagdata/1";
inline constexpr const char* kModelSchema = "promil-model/1";
inline constexpr const char* kConfigSchema = "promil-config/1";

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

struct DatasetFile {
  std::string source = "synthetic";  // "synthetic" or "mnist"
  std::uint64_t seed = 0;
  SyntheticSpec spec;
  std::vector<Bag> bags;
  std::vector<Split> splits;  // parallel to bags

  DatasetSplit to_split() const;
  static DatasetFile from_split(const DatasetSplit& split, std::string source, std::uint64_t seed,
                                const SyntheticSpec& spec);
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_metric = 0.0;
  ValMetric val_metric = ValMetric::kAuc;
};

struct ModelFile {
  Model model;
  TrainingMetadata metadata;
};

struct MnistPaths {
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  std::size_t n_test_bags = 0;  // 0: a quarter of n_bags
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string source = "synthetic";
  SyntheticSpec data;
  std::array<double, 3> split{0.5, 0.25, 0.25};
  MnistPaths mnist;
  NetArch arch;  // input_dim is taken from the data
  TrainConfig train;
  int repeats = 5;
  std::string dataset_out = "dataset.json";
  std::string model_out = "model.json";
  std::string log_out = "train_log.csv";
  std::string report_out = "report.json";
  std::string sweep_out = "sweep.csv";

  void validate() const;
};

nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DatasetFile& dataset);
DatasetFile dataset_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelFile& model);
ModelFile model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExperimentConfig& cfg);
// Missing fields keep their defaults; unknown fields are rejected. Errors name
// the offending field.
ExperimentConfig config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EvalResult& result, Head head);

// File helpers. Readers throw ParseError on unreadable or malformed input.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
// indent < 0 gives compact single-line output.
std::string dump_json(const nlohmann::json& j, int indent = 2);

DatasetFile load_dataset(const std::filesystem::path& path);
void save_dataset(const DatasetFile& dataset, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);
void save_model(const ModelFile& model, const std::filesystem::path& path);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace promil
