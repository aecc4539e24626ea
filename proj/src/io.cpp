#include "promil/io.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "promil/error.hpp"

namespace promil {

using nlohmann::json;

namespace {

void require_schema(const json& j, const char* expected) {
  if (!j.is_object() || !j.contains("schema") || !j["schema"].is_string()) {
    throw ParseError(std::string("missing \"schema\" field (expected \"") + expected + "\")");
  }
  if (j["schema"].get<std::string>() != expected) {
    throw ParseError("unsupported schema \"" + j["schema"].get<std::string>() + "\" (expected \"" + expected +
                     "\")");
  }
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(where + ": missing field \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + "." + key + ": " + e.what());
  }
}

// Walks an object, dispatching each key to its handler and rejecting unknown
// keys. Handler errors are re-thrown with the dotted field path.
using FieldHandlers = std::map<std::string, std::function<void(const json&)>>;

void parse_fields(const json& j, const std::string& where, const FieldHandlers& handlers) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    const auto it = handlers.find(key);
    if (it == handlers.end()) throw ParseError("unknown config field \"" + path + "\"");
    try {
      it->second(value);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError("invalid config field \"" + path + "\": " + e.what());
    }
  }
}

template <typename T>
std::function<void(const json&)> assign(T& target) {
  return [&target](const json& v) { target = v.get<T>(); };
}

json instances_to_json(const InstanceMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index d = 0; d < m.cols(); ++d) row.push_back(m(i, d));
    rows.push_back(std::move(row));
  }
  return rows;
}

InstanceMatrix instances_from_json(const json& rows, const std::string& where) {
  if (!rows.is_array() || rows.empty()) throw ParseError(where + ".instances: expected a nonempty array");
  const std::size_t dim = rows[0].size();
  InstanceMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != dim) {
      throw ParseError(where + ".instances[" + std::to_string(i) + "]: inconsistent dimensionality");
    }
    for (std::size_t d = 0; d < dim; ++d) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rows[i][d].get<double>();
    }
  }
  return m;
}

json arch_to_json(const NetArch& arch) {
  return {{"input_dim", arch.input_dim}, {"hidden_dims", arch.hidden_dims}, {"activation", to_string(arch.activation)}};
}

NetArch arch_from_json(const json& j) {
  NetArch arch;
  arch.input_dim = get_field<std::size_t>(j, "input_dim", "arch");
  arch.hidden_dims = get_field<std::vector<std::size_t>>(j, "hidden_dims", "arch");
  arch.activation = activation_from_string(get_field<std::string>(j, "activation", "arch"));
  arch.validate();
  return arch;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw DomainError("unknown split '" + std::string(name) + "'");
}

DatasetSplit DatasetFile::to_split() const {
  DatasetSplit out;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    switch (splits[i]) {
      case Split::kTrain:
        out.train.push_back(bags[i]);
        break;
      case Split::kValidation:
        out.validation.push_back(bags[i]);
        break;
      case Split::kTest:
        out.test.push_back(bags[i]);
        break;
    }
  }
  return out;
}

DatasetFile DatasetFile::from_split(const DatasetSplit& split, std::string source, std::uint64_t seed,
                                    const SyntheticSpec& spec) {
  DatasetFile file;
  file.source = std::move(source);
  file.seed = seed;
  file.spec = spec;
  const auto add = [&](const std::vector<Bag>& bags, Split tag) {
    for (const Bag& bag : bags) {
      file.bags.push_back(bag);
      file.splits.push_back(tag);
    }
  };
  add(split.train, Split::kTrain);
  add(split.validation, Split::kValidation);
  add(split.test, Split::kTest);
  return file;
}

json to_json(const SyntheticSpec& spec) {
  return {{"n_bags", spec.n_bags},
          {"bag_size_mean", spec.bag_size_mean},
          {"bag_size_std", spec.bag_size_std},
          {"threshold_qstar", spec.threshold_qstar},
          {"feature_dim", spec.feature_dim},
          {"class_separation", spec.class_separation},
          {"noise_std", spec.noise_std},
          {"label_rule", to_string(spec.label_rule)},
          {"rebalance", spec.rebalance}};
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  SyntheticSpec spec;
  spec.n_bags = get_field<std::size_t>(j, "n_bags", "spec");
  spec.bag_size_mean = get_field<double>(j, "bag_size_mean", "spec");
  spec.bag_size_std = get_field<double>(j, "bag_size_std", "spec");
  spec.threshold_qstar = get_field<double>(j, "threshold_qstar", "spec");
  spec.feature_dim = get_field<std::size_t>(j, "feature_dim", "spec");
  spec.class_separation = get_field<double>(j, "class_separation", "spec");
  spec.noise_std = get_field<double>(j, "noise_std", "spec");
  spec.label_rule = label_rule_from_string(get_field<std::string>(j, "label_rule", "spec"));
  spec.rebalance = get_field<bool>(j, "rebalance", "spec");
  return spec;
}

json to_json(const DatasetFile& dataset) {
  json bags = json::array();
  for (std::size_t i = 0; i < dataset.bags.size(); ++i) {
    const Bag& bag = dataset.bags[i];
    json b = {{"id", bag.id},
              {"split", to_string(dataset.splits[i])},
              {"label", bag.label},
              {"instances", instances_to_json(bag.instances)}};
    if (bag.hidden_labels) b["hidden_labels"] = *bag.hidden_labels;
    if (bag.positive_fraction) b["positive_fraction"] = *bag.positive_fraction;
    bags.push_back(std::move(b));
  }
  return {{"schema", kDatasetSchema},
          {"source", dataset.source},
          {"seed", dataset.seed},
          {"feature_dim", dataset.bags.empty() ? 0 : dataset.bags.front().dim()},
          {"spec", to_json(dataset.spec)},
          {"bags", std::move(bags)}};
}

DatasetFile dataset_from_json(const json& j) {
  require_schema(j, kDatasetSchema);
  DatasetFile file;
  file.source = get_field<std::string>(j, "source", "dataset");
  file.seed = get_field<std::uint64_t>(j, "seed", "dataset");
  file.spec = synthetic_spec_from_json(get_field<json>(j, "spec", "dataset"));
  const auto dim = get_field<Eigen::Index>(j, "feature_dim", "dataset");
  const json& bags = j.at("bags");
  if (!bags.is_array()) throw ParseError("dataset.bags: expected an array");
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const json& b = bags[i];
    const std::string where = "bags[" + std::to_string(i) + "]";
    Bag bag;
    bag.id = get_field<std::string>(b, "id", where);
    bag.label = get_field<int>(b, "label", where);
    bag.instances = instances_from_json(b.at("instances"), where);
    if (bag.dim() != dim) throw ParseError(where + ": dimensionality differs from feature_dim");
    if (b.contains("hidden_labels")) bag.hidden_labels = get_field<std::vector<int>>(b, "hidden_labels", where);
    if (b.contains("positive_fraction")) bag.positive_fraction = get_field<double>(b, "positive_fraction", where);
    try {
      bag.validate();
      file.splits.push_back(split_from_string(get_field<std::string>(b, "split", where)));
    } catch (const DomainError& e) {
      throw ParseError(where + ": " + e.what());
    }
    file.bags.push_back(std::move(bag));
  }
  return file;
}

json to_json(const ModelFile& m) {
  return {{"schema", kModelSchema},
          {"arch", arch_to_json(m.model.net.arch)},
          {"params", m.model.net.flatten()},
          {"raw_q", m.model.q.raw()},
          {"q", m.model.q.q()},
          {"head", to_string(m.model.head)},
          {"training",
           {{"seed", m.metadata.seed},
            {"epochs_run", m.metadata.epochs_run},
            {"best_epoch", m.metadata.best_epoch},
            {"best_val_metric", m.metadata.best_val_metric},
            {"val_metric", to_string(m.metadata.val_metric)}}}};
}

ModelFile model_from_json(const json& j) {
  require_schema(j, kModelSchema);
  ModelFile m;
  try {
    const NetArch arch = arch_from_json(get_field<json>(j, "arch", "model"));
    m.model.net = NetParams::unflatten(arch, get_field<std::vector<double>>(j, "params", "model"));
    m.model.net.validate();
    m.model.q = QuantileParam(get_field<double>(j, "raw_q", "model"));
    m.model.head = head_from_string(get_field<std::string>(j, "head", "model"));
    const json t = get_field<json>(j, "training", "model");
    m.metadata.seed = get_field<std::uint64_t>(t, "seed", "training");
    m.metadata.epochs_run = get_field<int>(t, "epochs_run", "training");
    m.metadata.best_epoch = get_field<int>(t, "best_epoch", "training");
    m.metadata.best_val_metric = get_field<double>(t, "best_val_metric", "training");
    m.metadata.val_metric = val_metric_from_string(get_field<std::string>(t, "val_metric", "training"));
  } catch (const DomainError& e) {
    throw ParseError(std::string("model: ") + e.what());
  } catch (const NumericalError& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  return m;
}

void ExperimentConfig::validate() const {
  if (source != "synthetic" && source != "mnist") {
    throw DomainError("data.source must be \"synthetic\" or \"mnist\"");
  }
  data.validate();
  double total = 0.0;
  for (double f : split) {
    if (!(f >= 0.0)) throw DomainError("data.split fractions must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("data.split fractions must sum to 1");
  for (std::size_t h : arch.hidden_dims) {
    if (h == 0) throw DomainError("model.hidden_dims entries must be positive");
  }
  train.validate();
  if (repeats < 1) throw DomainError("sweep.repeats must be at least 1");
  if (source == "mnist" && (mnist.train_images.empty() || mnist.train_labels.empty() ||
                            mnist.test_images.empty() || mnist.test_labels.empty())) {
    throw DomainError("data.mnist needs train_images, train_labels, test_images and test_labels");
  }
}

json to_json(const ExperimentConfig& cfg) {
  json data = to_json(cfg.data);
  data["source"] = cfg.source;
  data["split"] = cfg.split;
  data["mnist"] = {{"train_images", cfg.mnist.train_images},
                   {"train_labels", cfg.mnist.train_labels},
                   {"test_images", cfg.mnist.test_images},
                   {"test_labels", cfg.mnist.test_labels},
                   {"n_test_bags", cfg.mnist.n_test_bags}};
  const TrainConfig& t = cfg.train;
  json train = {{"learning_rate", t.learning_rate},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"adam_eps", t.adam_eps},
                {"weight_decay", t.weight_decay},
                {"max_epochs", t.max_epochs},
                {"patience", t.patience},
                {"eps_clamp", t.eps_clamp},
                {"val_metric", to_string(t.val_metric)},
                {"improvement_threshold", t.improvement_threshold},
                {"head", to_string(t.head)},
                {"negative_branch", to_string(t.negative_branch)}};
  train["q_init"] = t.q_init ? json(*t.q_init) : json("random");
  return {{"schema", kConfigSchema},
          {"seed", cfg.seed},
          {"data", std::move(data)},
          {"model", {{"hidden_dims", cfg.arch.hidden_dims}, {"activation", to_string(cfg.arch.activation)}}},
          {"train", std::move(train)},
          {"sweep", {{"repeats", cfg.repeats}}},
          {"outputs",
           {{"dataset", cfg.dataset_out},
            {"model", cfg.model_out},
            {"log", cfg.log_out},
            {"report", cfg.report_out},
            {"sweep", cfg.sweep_out}}}};
}

ExperimentConfig config_from_json(const json& j) {
  require_schema(j, kConfigSchema);
  ExperimentConfig cfg;
  SyntheticSpec& d = cfg.data;
  TrainConfig& t = cfg.train;
  const FieldHandlers mnist_fields{
      {"train_images", assign(cfg.mnist.train_images)},
      {"train_labels", assign(cfg.mnist.train_labels)},
      {"test_images", assign(cfg.mnist.test_images)},
      {"test_labels", assign(cfg.mnist.test_labels)},
      {"n_test_bags", assign(cfg.mnist.n_test_bags)},
  };
  const FieldHandlers data_fields{
      {"source", assign(cfg.source)},
      {"n_bags", assign(d.n_bags)},
      {"bag_size_mean", assign(d.bag_size_mean)},
      {"bag_size_std", assign(d.bag_size_std)},
      {"threshold_qstar", assign(d.threshold_qstar)},
      {"feature_dim", assign(d.feature_dim)},
      {"class_separation", assign(d.class_separation)},
      {"noise_std", assign(d.noise_std)},
      {"label_rule", [&](const json& v) { d.label_rule = label_rule_from_string(v.get<std::string>()); }},
      {"rebalance", assign(d.rebalance)},
      {"split", assign(cfg.split)},
      {"mnist", [&](const json& v) { parse_fields(v, "data.mnist", mnist_fields); }},
  };
  const FieldHandlers model_fields{
      {"hidden_dims", assign(cfg.arch.hidden_dims)},
      {"activation", [&](const json& v) { cfg.arch.activation = activation_from_string(v.get<std::string>()); }},
  };
  const FieldHandlers train_fields{
      {"learning_rate", assign(t.learning_rate)},
      {"beta1", assign(t.beta1)},
      {"beta2", assign(t.beta2)},
      {"adam_eps", assign(t.adam_eps)},
      {"weight_decay", assign(t.weight_decay)},
      {"max_epochs", assign(t.max_epochs)},
      {"patience", assign(t.patience)},
      {"eps_clamp", assign(t.eps_clamp)},
      {"q_init",
       [&](const json& v) {
         if (v.is_string() && v.get<std::string>() == "random") {
           t.q_init.reset();
         } else if (v.is_number()) {
           t.q_init = v.get<double>();
         } else {
           throw DomainError("expected a number in (0,1) or \"random\"");
         }
       }},
      {"val_metric", [&](const json& v) { t.val_metric = val_metric_from_string(v.get<std::string>()); }},
      {"improvement_threshold", assign(t.improvement_threshold)},
      {"head", [&](const json& v) { t.head = head_from_string(v.get<std::string>()); }},
      {"negative_branch",
       [&](const json& v) { t.negative_branch = negative_branch_from_string(v.get<std::string>()); }},
  };
  const FieldHandlers sweep_fields{{"repeats", assign(cfg.repeats)}};
  const FieldHandlers output_fields{
      {"dataset", assign(cfg.dataset_out)}, {"model", assign(cfg.model_out)},
      {"log", assign(cfg.log_out)},         {"report", assign(cfg.report_out)},
      {"sweep", assign(cfg.sweep_out)},
  };
  const FieldHandlers top{
      {"schema", [](const json&) {}},
      {"seed", assign(cfg.seed)},
      {"data", [&](const json& v) { parse_fields(v, "data", data_fields); }},
      {"model", [&](const json& v) { parse_fields(v, "model", model_fields); }},
      {"train", [&](const json& v) { parse_fields(v, "train", train_fields); }},
      {"sweep", [&](const json& v) { parse_fields(v, "sweep", sweep_fields); }},
      {"outputs", [&](const json& v) { parse_fields(v, "outputs", output_fields); }},
  };
  parse_fields(j, "", top);
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw ParseError(std::string("invalid config field: ") + e.what());
  }
  return cfg;
}

json to_json(const EvalResult& result, Head head) {
  return {{"head", to_string(head)},
          {"auc", result.auc},
          {"balanced_accuracy", result.balanced_accuracy},
          {"n_bags", result.n_bags},
          {"confusion",
           {{"tp", result.confusion.tp},
            {"fp", result.confusion.fp},
            {"tn", result.confusion.tn},
            {"fn", result.confusion.fn}}}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path.string() + "' is not valid JSON: " + e.what(), static_cast<std::int64_t>(e.byte));
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ParseError("write to '" + path.string() + "' failed");
}

std::string dump_json(const json& j, int indent) { return j.dump(indent) + "\n"; }

DatasetFile load_dataset(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  try {
    return dataset_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

void save_dataset(const DatasetFile& dataset, const std::filesystem::path& path) {
  write_text_file(path, dump_json(to_json(dataset), -1));
}

ModelFile load_model(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  try {
    return model_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  write_text_file(path, dump_json(to_json(model)));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path));
}

}  // namespace promil
