#include "promil/bagdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "promil/error.hpp"

namespace promil {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof(buf), "0x%08x", v);
  return buf;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::string bag_id(std::string_view prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "-%06zu", index);
  return std::string(prefix) + buf;
}

std::size_t sample_bag_size(const SyntheticSpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> size_dist(spec.bag_size_mean, spec.bag_size_std);
  const double raw = std::round(size_dist(rng));
  return raw < 2.0 ? 2 : static_cast<std::size_t>(raw);
}

// Hidden instance labels for one bag: floor(pi * size) positives, shuffled.
std::vector<int> sample_hidden_labels(const SyntheticSpec& spec, std::mt19937_64& rng) {
  const std::size_t size = sample_bag_size(spec, rng);
  const double pi = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto positives = static_cast<std::size_t>(std::floor(pi * static_cast<double>(size)));
  std::vector<int> hidden(size, 0);
  std::fill(hidden.begin(), hidden.begin() + static_cast<std::ptrdiff_t>(positives), 1);
  std::shuffle(hidden.begin(), hidden.end(), rng);
  return hidden;
}

template <typename MakeBag>
std::vector<Bag> build_bags(const SyntheticSpec& spec, std::uint64_t seed, MakeBag make_bag) {
  std::vector<Bag> bags;
  bags.reserve(spec.n_bags);
  const std::size_t per_class = spec.n_bags / 2;
  std::size_t counts[2] = {0, 0};
  // Each attempt has its own derived seed so bags can be regenerated
  // independently of one another.
  for (std::uint64_t attempt = 0; bags.size() < spec.n_bags; ++attempt) {
    std::seed_seq seq{seed, attempt, std::uint64_t{0xba9}};
    std::mt19937_64 rng(seq);
    if (attempt > 1000 * spec.n_bags + 1000) {
      throw DomainError("rebalancing failed: one class is (almost) never generated");
    }
    Bag bag = make_bag(rng, bags.size());
    if (spec.rebalance) {
      const std::size_t cap = bag.label == 1 ? spec.n_bags - per_class : per_class;
      if (counts[bag.label] >= cap) continue;
    }
    ++counts[bag.label];
    bags.push_back(std::move(bag));
  }
  return bags;
}

void finish_bag(Bag& bag, const SyntheticSpec& spec) {
  const auto& hidden = *bag.hidden_labels;
  const auto positives = static_cast<std::size_t>(std::count(hidden.begin(), hidden.end(), 1));
  bag.positive_fraction = static_cast<double>(positives) / static_cast<double>(hidden.size());
  bag.label = bag_label(positives, hidden.size(), spec.threshold_qstar, spec.label_rule);
}

}  // namespace

void Bag::validate() const {
  if (instances.rows() == 0) throw DomainError("bag '" + id + "' has no instances");
  if (label != 0 && label != 1) throw DomainError("bag '" + id + "' label must be 0 or 1");
  if (!instances.allFinite()) throw DomainError("bag '" + id + "' has non-finite features");
  if (hidden_labels) {
    if (static_cast<Eigen::Index>(hidden_labels->size()) != instances.rows()) {
      throw DomainError("bag '" + id + "' hidden label count differs from instance count");
    }
    for (int h : *hidden_labels) {
      if (h != 0 && h != 1) throw DomainError("bag '" + id + "' hidden labels must be 0 or 1");
    }
    if (positive_fraction) {
      const auto positives = std::count(hidden_labels->begin(), hidden_labels->end(), 1);
      const double expected = static_cast<double>(positives) / static_cast<double>(hidden_labels->size());
      if (std::abs(expected - *positive_fraction) > 1e-12) {
        throw DomainError("bag '" + id + "' positive_fraction disagrees with hidden labels");
      }
    }
  }
}

std::string_view to_string(LabelRule rule) {
  return rule == LabelRule::kPercentage ? "percentage" : "standard";
}

LabelRule label_rule_from_string(std::string_view name) {
  if (name == "percentage") return LabelRule::kPercentage;
  if (name == "standard") return LabelRule::kStandard;
  throw DomainError("unknown label_rule '" + std::string(name) + "' (expected percentage or standard)");
}

void SyntheticSpec::validate() const {
  if (n_bags < 2) throw DomainError("n_bags must be at least 2");
  if (!(bag_size_mean > 0.0)) throw DomainError("bag_size_mean must be positive");
  if (!(bag_size_std >= 0.0)) throw DomainError("bag_size_std must be nonnegative");
  if (!(threshold_qstar > 0.0 && threshold_qstar < 1.0)) throw DomainError("threshold_qstar must lie in (0,1)");
  if (feature_dim == 0) throw DomainError("feature_dim must be positive");
  if (!(class_separation >= 0.0)) throw DomainError("class_separation must be nonnegative");
  if (!(noise_std > 0.0)) throw DomainError("noise_std must be positive");
}

int bag_label(std::size_t positives, std::size_t size, double threshold, LabelRule rule) {
  if (rule == LabelRule::kStandard) return positives > 0 ? 1 : 0;
  return static_cast<double>(positives) / static_cast<double>(size) >= threshold ? 1 : 0;
}

std::vector<Bag> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto dim = static_cast<Eigen::Index>(spec.feature_dim);
  const double half = 0.5 * spec.class_separation;
  return build_bags(spec, seed, [&](std::mt19937_64& rng, std::size_t index) {
    Bag bag;
    bag.id = bag_id("bag", index);
    bag.hidden_labels = sample_hidden_labels(spec, rng);
    const auto& hidden = *bag.hidden_labels;
    std::normal_distribution<double> noise(0.0, spec.noise_std);
    bag.instances.resize(static_cast<Eigen::Index>(hidden.size()), dim);
    for (Eigen::Index i = 0; i < bag.instances.rows(); ++i) {
      for (Eigen::Index d = 0; d < dim; ++d) bag.instances(i, d) = noise(rng);
      bag.instances(i, 0) += hidden[static_cast<std::size_t>(i)] == 1 ? half : -half;
    }
    finish_bag(bag, spec);
    return bag;
  });
}

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw ParseError("IDX image header truncated", static_cast<std::int64_t>(bytes.size()));
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxImagesMagic) {
    throw ParseError("bad IDX image magic " + hex32(magic) + " at offset 0", 0);
  }
  IdxImages out;
  const std::uint32_t count = read_be32(bytes, 4);
  out.rows = read_be32(bytes, 8);
  out.cols = read_be32(bytes, 12);
  const std::size_t image_bytes = std::size_t{out.rows} * out.cols;
  const std::size_t needed = 16 + image_bytes * count;
  if (bytes.size() < needed) {
    throw ParseError("IDX image data truncated at offset " + std::to_string(bytes.size()) + " (expected " +
                         std::to_string(needed) + " bytes)",
                     static_cast<std::int64_t>(bytes.size()));
  }
  out.images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto begin = bytes.begin() + static_cast<std::ptrdiff_t>(16 + i * image_bytes);
    out.images.emplace_back(begin, begin + static_cast<std::ptrdiff_t>(image_bytes));
  }
  return out;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw ParseError("IDX label header truncated", static_cast<std::int64_t>(bytes.size()));
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxLabelsMagic) {
    throw ParseError("bad IDX label magic " + hex32(magic) + " at offset 0", 0);
  }
  const std::uint32_t count = read_be32(bytes, 4);
  if (bytes.size() < 8 + std::size_t{count}) {
    throw ParseError("IDX label data truncated at offset " + std::to_string(bytes.size()) + " (expected " +
                         std::to_string(8 + std::size_t{count}) + " bytes)",
                     static_cast<std::int64_t>(bytes.size()));
  }
  return {bytes.begin() + 8, bytes.begin() + 8 + count};
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
  std::vector<std::uint8_t> out;
  write_be32(out, kIdxImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(images.images.size()));
  write_be32(out, images.rows);
  write_be32(out, images.cols);
  for (const auto& img : images.images) {
    if (img.size() != std::size_t{images.rows} * images.cols) {
      throw DomainError("image size does not match rows x cols");
    }
    out.insert(out.end(), img.begin(), img.end());
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

IdxDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  IdxDataset data;
  data.images = parse_idx_images(read_file(images_path));
  data.labels = parse_idx_labels(read_file(labels_path));
  if (data.images.images.size() != data.labels.size()) {
    throw ParseError("IDX count mismatch: " + std::to_string(data.images.images.size()) + " images vs " +
                         std::to_string(data.labels.size()) + " labels (count field at offset 4)",
                     4);
  }
  return data;
}

void write_idx(const IdxDataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  write_file(images_path, encode_idx_images(data.images));
  write_file(labels_path, encode_idx_labels(data.labels));
}

std::vector<Bag> make_mnist_bags(const IdxDataset& data, const SyntheticSpec& spec, std::uint64_t seed,
                                 std::string_view id_prefix) {
  spec.validate();
  if (data.images.images.size() != data.labels.size()) throw DomainError("images and labels are not aligned");
  std::vector<std::size_t> positive_pool;
  std::vector<std::size_t> negative_pool;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    (data.labels[i] == kPositiveDigit ? positive_pool : negative_pool).push_back(i);
  }
  if (positive_pool.empty()) throw DomainError("no digit-9 images available for positive instances");
  if (negative_pool.empty()) throw DomainError("no non-9 images available for negative instances");

  const auto dim = static_cast<Eigen::Index>(std::size_t{data.images.rows} * data.images.cols);
  return build_bags(spec, seed, [&](std::mt19937_64& rng, std::size_t index) {
    Bag bag;
    bag.id = bag_id(id_prefix, index);
    bag.hidden_labels = sample_hidden_labels(spec, rng);
    const auto& hidden = *bag.hidden_labels;
    bag.instances.resize(static_cast<Eigen::Index>(hidden.size()), dim);
    for (Eigen::Index i = 0; i < bag.instances.rows(); ++i) {
      const auto& pool = hidden[static_cast<std::size_t>(i)] == 1 ? positive_pool : negative_pool;
      const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng);
      const auto& pixels = data.images.images[pool[pick]];
      for (Eigen::Index d = 0; d < dim; ++d) {
        bag.instances(i, d) = static_cast<double>(pixels[static_cast<std::size_t>(d)]) / 255.0;
      }
    }
    finish_bag(bag, spec);
    return bag;
  });
}

DatasetSplit split_dataset(std::span<const Bag> bags, std::array<double, 3> fractions, std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw DomainError("split fractions must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("split fractions must sum to 1");
  std::set<std::string> ids;
  for (const Bag& bag : bags) {
    if (!ids.insert(bag.id).second) throw DomainError("duplicate bag id '" + bag.id + "'");
  }

  std::seed_seq seq{seed, std::uint64_t{0x5971}};
  std::mt19937_64 rng(seq);
  std::array<std::vector<std::size_t>, 3> assigned;
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < bags.size(); ++i) {
      if (bags[i].label == cls) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    // Largest-remainder apportionment of this class across the three splits.
    const double n = static_cast<double>(members.size());
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainders{};
    std::size_t used = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double exact = fractions[s] * n;
      counts[s] = static_cast<std::size_t>(std::floor(exact));
      remainders[s] = exact - std::floor(exact);
      used += counts[s];
    }
    while (used < members.size()) {
      std::size_t best = 0;
      for (std::size_t s = 1; s < 3; ++s) {
        if (remainders[s] > remainders[best]) best = s;
      }
      ++counts[best];
      remainders[best] = -1.0;
      ++used;
    }
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t j = 0; j < counts[s]; ++j) assigned[s].push_back(members[pos++]);
    }
  }

  DatasetSplit out;
  std::array<std::vector<Bag>*, 3> targets{&out.train, &out.validation, &out.test};
  static constexpr std::array<const char*, 3> kNames{"train", "validation", "test"};
  for (std::size_t s = 0; s < 3; ++s) {
    std::sort(assigned[s].begin(), assigned[s].end());
    int classes_seen[2] = {0, 0};
    for (std::size_t idx : assigned[s]) {
      targets[s]->push_back(bags[idx]);
      classes_seen[bags[idx].label] = 1;
    }
    if (!assigned[s].empty() && (classes_seen[0] == 0 || classes_seen[1] == 0)) {
      throw DomainError(std::string(kNames[s]) + " split would contain only one class");
    }
  }
  return out;
}

}  // namespace promil
