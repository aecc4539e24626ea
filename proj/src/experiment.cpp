#include "promil/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "promil/error.hpp"

namespace promil {

namespace {

std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  }
  return s;
}

}  // namespace

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kThreshold:
      return "threshold";
    case SweepAxis::kBagSize:
      return "bag_size";
    case SweepAxis::kNBags:
      return "n_bags";
  }
  return "threshold";
}

SweepAxis sweep_axis_from_string(std::string_view name) {
  if (name == "threshold") return SweepAxis::kThreshold;
  if (name == "bag_size") return SweepAxis::kBagSize;
  if (name == "n_bags") return SweepAxis::kNBags;
  throw DomainError("unknown sweep axis '" + std::string(name) + "' (expected threshold, bag_size or n_bags)");
}

DatasetFile build_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.source == "synthetic") {
    const std::vector<Bag> bags = generate_synthetic(cfg.data, seed);
    return DatasetFile::from_split(split_dataset(bags, cfg.split, seed), "synthetic", seed, cfg.data);
  }

  // Train/validation bags come from the training images and test bags from
  // the test images, so no digit image crosses the division.
  const IdxDataset train_images = load_idx(cfg.mnist.train_images, cfg.mnist.train_labels);
  const IdxDataset test_images = load_idx(cfg.mnist.test_images, cfg.mnist.test_labels);
  const double fit_total = cfg.split[0] + cfg.split[1];
  if (!(fit_total > 0.0)) throw DomainError("data.split needs a nonzero train or validation fraction");
  const std::vector<Bag> fit_bags = make_mnist_bags(train_images, cfg.data, seed, "mnist-train");
  DatasetSplit split = split_dataset(fit_bags, {cfg.split[0] / fit_total, cfg.split[1] / fit_total, 0.0}, seed);
  SyntheticSpec test_spec = cfg.data;
  test_spec.n_bags = cfg.mnist.n_test_bags > 0 ? cfg.mnist.n_test_bags : std::max<std::size_t>(2, cfg.data.n_bags / 4);
  split.test = make_mnist_bags(test_images, test_spec, seed + 1, "mnist-test");
  SyntheticSpec recorded = cfg.data;
  recorded.feature_dim = std::size_t{train_images.images.rows} * train_images.images.cols;
  return DatasetFile::from_split(split, "mnist", seed, recorded);
}

TrainedModel train_on(const DatasetFile& dataset, const ExperimentConfig& cfg, Head head, std::uint64_t seed) {
  if (dataset.bags.empty()) throw DomainError("dataset has no bags");
  const DatasetSplit split = dataset.to_split();
  NetArch arch = cfg.arch;
  arch.input_dim = static_cast<std::size_t>(dataset.bags.front().dim());
  TrainConfig tc = cfg.train;
  tc.head = head;
  tc.seed = seed;
  return train(init_state(arch, tc), split.train, split.validation, tc);
}

ExperimentConfig with_axis_value(const ExperimentConfig& cfg, SweepAxis axis, double value) {
  ExperimentConfig out = cfg;
  switch (axis) {
    case SweepAxis::kThreshold:
      out.data.threshold_qstar = value;
      break;
    case SweepAxis::kBagSize:
      out.data.bag_size_mean = value;
      break;
    case SweepAxis::kNBags:
      if (!(value >= 2.0) || value != std::floor(value)) throw DomainError("n_bags axis values must be integers >= 2");
      out.data.n_bags = static_cast<std::size_t>(value);
      break;
  }
  out.validate();
  return out;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                                const std::vector<Head>& methods) {
  if (values.empty()) throw DomainError("sweep needs at least one axis value");
  std::vector<SweepRow> rows;
  for (double value : values) {
    // One dataset per (value, repeat), shared by every method.
    std::vector<std::optional<DatasetFile>> datasets;
    std::vector<std::string> dataset_errors;
    std::optional<ExperimentConfig> cell_cfg;
    std::string cfg_error;
    try {
      cell_cfg = with_axis_value(cfg, axis, value);
    } catch (const std::exception& e) {
      cfg_error = e.what();
    }
    for (int r = 0; r < cfg.repeats; ++r) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
      if (!cell_cfg) {
        datasets.emplace_back();
        dataset_errors.push_back(cfg_error);
        continue;
      }
      try {
        datasets.emplace_back(build_dataset(*cell_cfg, seed));
        dataset_errors.emplace_back();
      } catch (const std::exception& e) {
        datasets.emplace_back();
        dataset_errors.emplace_back(e.what());
      }
    }
    for (Head method : methods) {
      for (int r = 0; r < cfg.repeats; ++r) {
        SweepRow row;
        row.axis = axis;
        row.value = value;
        row.method = method;
        row.seed = cfg.seed + static_cast<std::uint64_t>(r);
        if (!datasets[r]) {
          row.status = "error: " + csv_safe(dataset_errors[r]);
          rows.push_back(row);
          continue;
        }
        try {
          const TrainedModel trained = train_on(*datasets[r], *cell_cfg, method, row.seed);
          const DatasetSplit split = datasets[r]->to_split();
          const EvalResult result = evaluate(trained.model, split.test, method, cell_cfg->train.eps_clamp);
          row.auc = result.auc;
          row.balanced_accuracy = result.balanced_accuracy;
          if (method == Head::kPromil) row.learned_q = trained.model.q.q();
        } catch (const std::exception& e) {
          row.status = "error: " + csv_safe(e.what());
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << kSweepCsvHeader << '\n';
  for (const SweepRow& row : rows) {
    const bool ok = row.status == "ok";
    out << to_string(row.axis) << ',' << format_number(row.value) << ',' << to_string(row.method) << ','
        << row.seed << ',' << (ok ? format_number(row.auc) : "") << ','
        << (ok ? format_number(row.balanced_accuracy) : "") << ','
        << (row.learned_q ? format_number(*row.learned_q) : "") << ',' << row.status << '\n';
  }
  return out.str();
}

}  // namespace promil
