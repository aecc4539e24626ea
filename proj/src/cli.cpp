#include "promil/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include "promil/error.hpp"
#include "promil/experiment.hpp"

namespace promil {

namespace {

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

ExperimentConfig base_config(const GlobalFlags& g) {
  ExperimentConfig cfg = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

std::string report_path_for(const std::string& base, Head head) {
  std::filesystem::path p(base);
  const std::string stem = p.stem().string() + "_" + std::string(to_string(head));
  return (p.parent_path() / (stem + p.extension().string())).string();
}

struct GenerateFlags {
  std::optional<double> threshold;
  std::optional<std::size_t> n_bags;
  std::optional<double> bag_size;
  std::optional<std::size_t> feature_dim;
  std::optional<double> separation;
  std::optional<std::string> source;
};

int cmd_generate(const GlobalFlags& g, const GenerateFlags& f, std::ostream& out) {
  ExperimentConfig cfg = base_config(g);
  if (f.threshold) cfg.data.threshold_qstar = *f.threshold;
  if (f.n_bags) cfg.data.n_bags = *f.n_bags;
  if (f.bag_size) cfg.data.bag_size_mean = *f.bag_size;
  if (f.feature_dim) cfg.data.feature_dim = *f.feature_dim;
  if (f.separation) cfg.data.class_separation = *f.separation;
  if (f.source) cfg.source = *f.source;
  cfg.validate();
  const std::string path = g.out.empty() ? cfg.dataset_out : g.out;

  const DatasetFile dataset = build_dataset(cfg, cfg.seed);
  save_dataset(dataset, path);

  const DatasetSplit split = dataset.to_split();
  const auto positives = std::count_if(dataset.bags.begin(), dataset.bags.end(), [](const Bag& b) { return b.label == 1; });
  out << "wrote " << path << "\n";
  out << "bags: " << dataset.bags.size() << " (train " << split.train.size() << ", validation "
      << split.validation.size() << ", test " << split.test.size() << ")\n";
  out << "positive rate: " << format_number(static_cast<double>(positives) / static_cast<double>(dataset.bags.size()))
      << "\n";
  return kExitOk;
}

struct TrainFlags {
  std::string dataset;
  std::string log;
  std::optional<std::string> head;
  std::optional<double> q_init;
  std::optional<int> max_epochs;
  std::optional<int> patience;
  std::optional<double> learning_rate;
};

int cmd_train(const GlobalFlags& g, const TrainFlags& f, std::ostream& out) {
  ExperimentConfig cfg = base_config(g);
  if (f.head) cfg.train.head = head_from_string(*f.head);
  if (f.q_init) cfg.train.q_init = *f.q_init;
  if (f.max_epochs) cfg.train.max_epochs = *f.max_epochs;
  if (f.patience) cfg.train.patience = *f.patience;
  if (f.learning_rate) cfg.train.learning_rate = *f.learning_rate;
  cfg.validate();
  const std::string model_path = g.out.empty() ? cfg.model_out : g.out;
  const std::string log_path = f.log.empty() ? cfg.log_out : f.log;

  const DatasetFile dataset = load_dataset(f.dataset);
  const TrainedModel trained = train_on(dataset, cfg, cfg.train.head, cfg.seed);

  std::ostringstream log;
  log << "epoch,train_cost,val_auc,q\n";
  for (const EpochRecord& rec : trained.history) {
    log << rec.epoch << ',' << format_number(rec.train_cost) << ',' << format_number(rec.val_auc) << ','
        << format_number(rec.q) << '\n';
  }
  write_text_file(log_path, log.str());

  ModelFile file{trained.model,
                 {cfg.seed, trained.epochs_run, trained.best_epoch, trained.best_val_metric, cfg.train.val_metric}};
  save_model(file, model_path);

  out << "epochs run: " << trained.epochs_run << " (best epoch " << trained.best_epoch << ", best validation "
      << to_string(cfg.train.val_metric) << " " << format_number(trained.best_val_metric) << ")\n";
  out << "wrote " << model_path << " and " << log_path << "\n";
  if (cfg.train.head == Head::kPromil) out << "learned q: " << format_number(trained.model.q.q()) << "\n";
  return kExitOk;
}

struct EvalFlags {
  std::string model;
  std::string dataset;
  std::optional<std::string> head;
  std::string split = "test";
};

int cmd_eval(const GlobalFlags& g, const EvalFlags& f, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = base_config(g);
  const ModelFile model = load_model(f.model);
  const DatasetFile dataset = load_dataset(f.dataset);
  const Head head = f.head ? head_from_string(*f.head) : model.model.head;

  std::vector<Bag> bags;
  if (f.split == "all") {
    bags = dataset.bags;
  } else {
    const Split wanted = split_from_string(f.split);
    for (std::size_t i = 0; i < dataset.bags.size(); ++i) {
      if (dataset.splits[i] == wanted) bags.push_back(dataset.bags[i]);
    }
  }
  if (bags.empty()) throw DomainError("split '" + f.split + "' has no bags");
  const auto model_dim = static_cast<Eigen::Index>(model.model.net.arch.input_dim);
  if (bags.front().dim() != model_dim) {
    err << "error: model expects " << model_dim << "-dimensional instances but the dataset has "
        << bags.front().dim() << "\n";
    return kExitIo;
  }

  const EvalResult result = evaluate(model.model, bags, head, cfg.train.eps_clamp);
  nlohmann::json report = to_json(result, head);
  report["split"] = f.split;
  report["model"] = f.model;
  report["dataset"] = f.dataset;
  report["q"] = model.model.q.q();
  const std::string path = g.out.empty() ? report_path_for(cfg.report_out, head) : g.out;
  write_text_file(path, dump_json(report));

  out << dump_json(report);
  out << "head=" << to_string(head) << " split=" << f.split << " bags=" << result.n_bags
      << " auc=" << format_number(result.auc) << " balanced_accuracy=" << format_number(result.balanced_accuracy)
      << " q=" << format_number(model.model.q.q()) << "\n";
  return kExitOk;
}

struct SweepFlags {
  std::string axis;
  std::vector<double> values;
  std::optional<int> repeats;
  std::vector<std::string> methods{"promil", "max", "mean"};
};

int cmd_sweep(const GlobalFlags& g, const SweepFlags& f, std::ostream& out) {
  ExperimentConfig cfg = base_config(g);
  if (f.repeats) cfg.repeats = *f.repeats;
  cfg.validate();
  const SweepAxis axis = sweep_axis_from_string(f.axis);
  std::vector<Head> methods;
  for (const std::string& m : f.methods) methods.push_back(head_from_string(m));
  const std::string path = g.out.empty() ? cfg.sweep_out : g.out;

  const std::vector<SweepRow> rows = run_sweep(cfg, axis, f.values, methods);
  write_text_file(path, sweep_csv(rows));
  const auto failed = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.status != "ok"; });
  out << "wrote " << rows.size() << " rows to " << path << " (" << failed << " failed)\n";
  return kExitOk;
}

struct QuantileFlags {
  std::vector<double> numbers;
  double q = 0.5;
  double eps = kDefaultClampEps;
};

int cmd_quantile(const QuantileFlags& f, std::ostream& out, std::ostream& err) {
  if (f.numbers.empty()) {
    err << "error: quantile needs at least one number\n";
    return kExitUsage;
  }
  if (!(f.q >= 0.0 && f.q <= 1.0)) {
    err << "error: --q must lie in [0,1]\n";
    return kExitUsage;
  }
  for (double v : f.numbers) {
    if (!(v >= 0.0 && v <= 1.0)) {
      err << "error: numbers must lie in [0,1], got " << format_number(v) << "\n";
      return kExitUsage;
    }
  }
  const SortedPredictions sorted = SortedPredictions::from_unsorted(f.numbers);
  const double value = (f.q == 0.0 || f.q == 1.0) ? estimate_quantile_limit(sorted.values, f.q)
                                                  : estimate_quantile(sorted.values, f.q, f.eps);
  out << format_number(value) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Percentage-based multiple instance learning with a trainable Bernstein quantile", "promil"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config_path, "Experiment config file (promil-config/1)");
  app.add_option("--seed", g.seed, "Seed; overrides the config");
  app.add_option("--out", g.out, "Output path for the subcommand's main artifact");

  GenerateFlags gen;
  CLI::App* generate = app.add_subcommand("generate", "Generate a bag dataset (bagdata/1)");
  generate->fallthrough();
  generate->add_option("--threshold", gen.threshold, "Positive-fraction threshold q*");
  generate->add_option("--n-bags", gen.n_bags, "Number of bags");
  generate->add_option("--bag-size", gen.bag_size, "Mean bag size");
  generate->add_option("--feature-dim", gen.feature_dim, "Synthetic feature dimensionality");
  generate->add_option("--separation", gen.separation, "Distance between the class means");
  generate->add_option("--source", gen.source, "synthetic or mnist");

  TrainFlags tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model on a dataset file");
  train_cmd->fallthrough();
  train_cmd->add_option("--dataset", tr.dataset, "Dataset file")->required();
  train_cmd->add_option("--log", tr.log, "Per-epoch CSV log path");
  train_cmd->add_option("--head", tr.head, "promil, max or mean");
  train_cmd->add_option("--q-init", tr.q_init, "Initial q in (0,1)");
  train_cmd->add_option("--max-epochs", tr.max_epochs, "Maximum epochs");
  train_cmd->add_option("--patience", tr.patience, "Early-stopping patience in epochs");
  train_cmd->add_option("--lr", tr.learning_rate, "Adam learning rate");

  EvalFlags ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a dataset split");
  eval_cmd->fallthrough();
  eval_cmd->add_option("--model", ev.model, "Model file")->required();
  eval_cmd->add_option("--dataset", ev.dataset, "Dataset file")->required();
  eval_cmd->add_option("--head", ev.head, "promil, max or mean (default: the model's head)");
  eval_cmd->add_option("--split", ev.split, "train, validation, test or all")->capture_default_str();

  SweepFlags sw;
  CLI::App* sweep = app.add_subcommand("sweep", "Run generate/train/eval over one axis");
  sweep->fallthrough();
  sweep->add_option("--axis", sw.axis, "threshold, bag_size or n_bags")->required();
  sweep->add_option("--values", sw.values, "Comma-separated axis values")->required()->delimiter(',');
  sweep->add_option("--repeats", sw.repeats, "Seeds per cell");
  sweep->add_option("--methods", sw.methods, "Comma-separated heads")->delimiter(',')->capture_default_str();

  QuantileFlags qf;
  CLI::App* quantile = app.add_subcommand("quantile", "Bernstein quantile estimate of a list of numbers");
  quantile->fallthrough();
  quantile->add_option("numbers", qf.numbers, "Values in [0,1]");
  quantile->add_option("--q", qf.q, "Quantile level in [0,1]")->required();
  quantile->add_option("--eps", qf.eps, "Lower clamp before the log")->capture_default_str();

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*generate) return cmd_generate(g, gen, out);
    if (*train_cmd) return cmd_train(g, tr, out);
    if (*eval_cmd) return cmd_eval(g, ev, out, err);
    if (*sweep) return cmd_sweep(g, sw, out);
    if (*quantile) return cmd_quantile(qf, out, err);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace promil
