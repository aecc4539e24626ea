#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "promil/aggregation.hpp"
#include "promil/bagdata.hpp"
#include "promil/bernstein_quantile.hpp"
#include "promil/error.hpp"
#include "promil/experiment.hpp"
#include "promil/instance_net.hpp"
#include "promil/io.hpp"
#include "promil/metrics.hpp"
#include "promil/training.hpp"

namespace py = pybind11;
using namespace promil;

namespace {

std::vector<double> predictions_for(const NetParams& net, const InstanceMatrix& instances) {
  return forward_bag(net, instances).predictions;
}

py::dict eval_to_dict(const EvalResult& r) {
  py::dict d;
  d["auc"] = r.auc;
  d["balanced_accuracy"] = r.balanced_accuracy;
  d["n_bags"] = r.n_bags;
  d["tp"] = r.confusion.tp;
  d["fp"] = r.confusion.fp;
  d["tn"] = r.confusion.tn;
  d["fn"] = r.confusion.fn;
  return d;
}

// generate -> train -> evaluate on the test split for one head.
py::dict run_experiment(const std::string& config_json, const std::string& head_name, std::uint64_t seed) {
  const ExperimentConfig cfg = config_from_json(nlohmann::json::parse(config_json));
  const Head head = head_from_string(head_name);
  const DatasetFile dataset = build_dataset(cfg, seed);
  const TrainedModel trained = train_on(dataset, cfg, head, seed);
  const DatasetSplit split = dataset.to_split();
  py::dict out = eval_to_dict(evaluate(trained.model, split.test, head, cfg.train.eps_clamp));
  out["learned_q"] = trained.model.q.q();
  out["epochs_run"] = trained.epochs_run;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bernstein quantile MIL core";
  m.attr("__version__") = "0.1.0";
  m.attr("DEFAULT_CLAMP_EPS") = kDefaultClampEps;

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("log_binomial", &log_binomial, py::arg("n"), py::arg("k"));
  m.def("bernstein_log_weights", &bernstein_log_weights, py::arg("n"), py::arg("q"));
  m.def(
      "estimate_quantile",
      [](std::vector<double> sorted_values, double q, double eps) { return estimate_quantile(sorted_values, q, eps); },
      py::arg("sorted_values"), py::arg("q"), py::arg("eps") = kDefaultClampEps);
  m.def(
      "quantile_gradients",
      [](std::vector<double> sorted_values, double q, double eps) {
        const QuantileGradients g = quantile_gradients(sorted_values, q, eps);
        return py::make_tuple(g.value, g.d_values, g.d_q);
      },
      py::arg("sorted_values"), py::arg("q"), py::arg("eps") = kDefaultClampEps,
      "Returns (value, d_values, d_q).");
  m.def(
      "estimate_quantile_limit",
      [](std::vector<double> sorted_values, double q) { return estimate_quantile_limit(sorted_values, q); },
      py::arg("sorted_values"), py::arg("q"));

  py::class_<BagScore>(m, "BagScore")
      .def_readonly("score", &BagScore::score)
      .def_readonly("aux_score", &BagScore::aux_score)
      .def_readonly("permutation", &BagScore::permutation);
  m.def(
      "promil_score",
      [](std::vector<double> p, double q, double eps) { return promil_score(p, q, eps); }, py::arg("predictions"),
      py::arg("q"), py::arg("eps") = kDefaultClampEps);
  m.def("max_score", [](std::vector<double> p) { return max_score(p); }, py::arg("predictions"));
  m.def("mean_score", [](std::vector<double> p) { return mean_score(p); }, py::arg("predictions"));
  m.def("decide", &decide, py::arg("score"));

  m.def(
      "auc", [](std::vector<double> s, std::vector<int> y) { return auc(s, y); }, py::arg("scores"),
      py::arg("labels"));
  m.def(
      "balanced_accuracy",
      [](std::vector<int> p, std::vector<int> y) { return balanced_accuracy(std::span<const int>(p), std::span<const int>(y)); },
      py::arg("predicted"), py::arg("labels"));

  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("n_bags", &SyntheticSpec::n_bags)
      .def_readwrite("bag_size_mean", &SyntheticSpec::bag_size_mean)
      .def_readwrite("bag_size_std", &SyntheticSpec::bag_size_std)
      .def_readwrite("threshold_qstar", &SyntheticSpec::threshold_qstar)
      .def_readwrite("feature_dim", &SyntheticSpec::feature_dim)
      .def_readwrite("class_separation", &SyntheticSpec::class_separation)
      .def_readwrite("noise_std", &SyntheticSpec::noise_std)
      .def_property(
          "label_rule", [](const SyntheticSpec& s) { return std::string(to_string(s.label_rule)); },
          [](SyntheticSpec& s, const std::string& v) { s.label_rule = label_rule_from_string(v); })
      .def_readwrite("rebalance", &SyntheticSpec::rebalance);

  py::class_<Bag>(m, "Bag")
      .def_readonly("id", &Bag::id)
      .def_readonly("instances", &Bag::instances)
      .def_readonly("label", &Bag::label)
      .def_readonly("hidden_labels", &Bag::hidden_labels)
      .def_readonly("positive_fraction", &Bag::positive_fraction)
      .def("__len__", [](const Bag& b) { return b.size(); });
  m.def("generate_synthetic", &generate_synthetic, py::arg("spec"), py::arg("seed"));

  py::class_<NetArch>(m, "NetArch")
      .def(py::init([](std::size_t input_dim, std::vector<std::size_t> hidden_dims, const std::string& activation) {
             NetArch a{input_dim, std::move(hidden_dims), activation_from_string(activation)};
             a.validate();
             return a;
           }),
           py::arg("input_dim"), py::arg("hidden_dims") = std::vector<std::size_t>{},
           py::arg("activation") = "relu")
      .def_readonly("input_dim", &NetArch::input_dim)
      .def_readonly("hidden_dims", &NetArch::hidden_dims);
  py::class_<NetParams>(m, "NetParams")
      .def_readonly("arch", &NetParams::arch)
      .def("flatten", &NetParams::flatten)
      .def("parameter_count", &NetParams::parameter_count)
      .def_static("unflatten", [](const NetArch& a, std::vector<double> flat) { return NetParams::unflatten(a, flat); });
  m.def("init_params", &init_params, py::arg("arch"), py::arg("seed"));
  m.def("forward_bag", &predictions_for, py::arg("params"), py::arg("instances"),
        "Per-instance scores in (0,1) for an (n x input_dim) array.");

  m.def("run_experiment", &run_experiment, py::arg("config_json"), py::arg("head") = "promil", py::arg("seed") = 0,
        "Generate a dataset from a promil-config/1 JSON string, train one head and evaluate on the test split.");
}
