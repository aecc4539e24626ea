#pragma once

// Percentage-labelled bag datasets: a synthetic Gaussian generator, bags built
// from IDX-format digit images, and stratified splitting.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "promil/bag.hpp"

namespace promil {

enum class LabelRule {
  kPercentage,  // positive iff the positive fraction is at least the threshold
  kStandard,    // positive iff any instance is positive
};

std::string_view to_string(LabelRule rule);
LabelRule label_rule_from_string(std::string_view name);

struct SyntheticSpec {
  std::size_t n_bags = 1000;
  double bag_size_mean = 30.0;
  double bag_size_std = 5.0;
  double threshold_qstar = 0.3;
  std::size_t feature_dim = 2;
  // Distance between the positive and negative cluster means.
  double class_separation = 6.0;
  double noise_std = 1.0;
  LabelRule label_rule = LabelRule::kPercentage;
  // Resample bags until the classes are 50/50. Off by default.
  bool rebalance = false;

  void validate() const;
  bool operator==(const SyntheticSpec&) const = default;
};

// Label of a bag with `positives` positive instances out of `size`.
int bag_label(std::size_t positives, std::size_t size, double threshold, LabelRule rule);

std::vector<Bag> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// IDX containers (big-endian). Images are row-major bytes.
struct IdxImages {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::vector<std::uint8_t>> images;
};

struct IdxDataset {
  IdxImages images;
  std::vector<std::uint8_t> labels;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_idx_images(const IdxImages& images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

// Throws ParseError (with byte offset) on bad magic, truncation or a count
// mismatch between the two files.
IdxDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);
void write_idx(const IdxDataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

inline constexpr int kPositiveDigit = 9;

// Bags built like generate_synthetic but from digit images; digit 9 is the
// positive class. Pixels are scaled to [0,1] and flattened. Only
// n_bags, bag_size_*, threshold_qstar, label_rule and rebalance are used.
std::vector<Bag> make_mnist_bags(const IdxDataset& data, const SyntheticSpec& spec, std::uint64_t seed,
                                 std::string_view id_prefix = "mnist");

struct DatasetSplit {
  std::vector<Bag> train;
  std::vector<Bag> validation;
  std::vector<Bag> test;
};

// Seeded split stratified by bag label. Fractions are (train, validation, test)
// and must sum to 1. Throws if a nonempty split would miss a class.
DatasetSplit split_dataset(std::span<const Bag> bags, std::array<double, 3> fractions, std::uint64_t seed);

}  // namespace promil
