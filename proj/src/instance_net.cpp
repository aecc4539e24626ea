#include "promil/instance_net.hpp"

#include <cmath>
#include <random>
#include <string>

#include "promil/bernstein_quantile.hpp"
#include "promil/error.hpp"

namespace promil {

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::kRelu:
      return z.cwiseMax(0.0);
    case Activation::kTanh:
      return z.array().tanh().matrix();
  }
  return z;
}

Eigen::MatrixXd activation_derivative(const Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::kRelu:
      return (z.array() > 0.0).cast<double>().matrix();
    case Activation::kTanh:
      return (1.0 - z.array().tanh().square()).matrix();
  }
  return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

std::vector<std::size_t> layer_widths(const NetArch& arch) {
  std::vector<std::size_t> widths{arch.input_dim};
  widths.insert(widths.end(), arch.hidden_dims.begin(), arch.hidden_dims.end());
  widths.push_back(1);
  return widths;
}

}  // namespace

std::string_view to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw DomainError("unknown activation '" + std::string(name) + "'");
}

void NetArch::validate() const {
  if (input_dim == 0) throw DomainError("input_dim must be positive");
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw DomainError("hidden layer widths must be positive");
  }
}

std::size_t NetParams::parameter_count() const {
  std::size_t count = 0;
  for (const Layer& layer : layers) count += layer.weight.size() + layer.bias.size();
  return count;
}

std::vector<double> NetParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const Layer& layer : layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) flat.push_back(layer.weight(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) flat.push_back(layer.bias(r));
  }
  return flat;
}

NetParams NetParams::unflatten(const NetArch& arch, std::span<const double> flat) {
  arch.validate();
  NetParams params{arch, {}};
  const auto widths = layer_widths(arch);
  std::size_t pos = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(widths[l]);
    const auto fan_out = static_cast<Eigen::Index>(widths[l + 1]);
    const auto needed = static_cast<std::size_t>(fan_out * fan_in + fan_out);
    if (pos + needed > flat.size()) {
      throw DomainError("flattened parameter vector is too short for the architecture");
    }
    Layer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd(fan_out)};
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weight(r, c) = flat[pos++];
    }
    for (Eigen::Index r = 0; r < fan_out; ++r) layer.bias(r) = flat[pos++];
    params.layers.push_back(std::move(layer));
  }
  if (pos != flat.size()) {
    throw DomainError("flattened parameter vector is too long for the architecture");
  }
  return params;
}

void NetParams::validate() const {
  arch.validate();
  const auto widths = layer_widths(arch);
  if (layers.size() + 1 != widths.size()) throw DomainError("layer count does not match arch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    if (layer.weight.rows() != static_cast<Eigen::Index>(widths[l + 1]) ||
        layer.weight.cols() != static_cast<Eigen::Index>(widths[l]) ||
        layer.bias.size() != static_cast<Eigen::Index>(widths[l + 1])) {
      throw DomainError("layer " + std::to_string(l) + " has the wrong shape");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw NumericalError("non-finite parameter in layer " + std::to_string(l));
    }
  }
}

NetGrads NetGrads::zeros_like(const NetParams& params) {
  NetGrads grads;
  for (const Layer& layer : params.layers) {
    grads.layers.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                            Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return grads;
}

std::vector<double> NetGrads::flatten() const {
  NetParams view;
  view.layers = layers;
  return view.flatten();
}

NetParams init_params(const NetArch& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  NetParams params{arch, {}};
  const auto widths = layer_widths(arch);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(widths[l]);
    const auto fan_out = static_cast<Eigen::Index>(widths[l + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weight(r, c) = dist(rng);
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

double forward_instance(const NetParams& params, std::span<const double> x) {
  if (x.size() != params.arch.input_dim) {
    throw DomainError("instance has dimension " + std::to_string(x.size()) + ", network expects " +
                      std::to_string(params.arch.input_dim));
  }
  Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Eigen::VectorXd z = params.layers[l].weight * h + params.layers[l].bias;
    if (l + 1 == params.layers.size()) return logistic(z(0));
    h = activate(z, params.arch.activation);
  }
  return 0.5;  // unreachable: the output layer always exists
}

BagForward forward_bag(const NetParams& params, const InstanceMatrix& instances) {
  if (instances.rows() == 0) throw DomainError("forward pass on an empty bag");
  if (instances.cols() != static_cast<Eigen::Index>(params.arch.input_dim)) {
    throw DomainError("bag has dimension " + std::to_string(instances.cols()) +
                      ", network expects " + std::to_string(params.arch.input_dim));
  }
  BagForward out;
  Eigen::MatrixXd h = instances;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Layer& layer = params.layers[l];
    Eigen::MatrixXd z = (h * layer.weight.transpose()).rowwise() + layer.bias.transpose();
    out.trace.layer_inputs.push_back(std::move(h));
    if (l + 1 == params.layers.size()) {
      out.trace.outputs.resize(z.rows());
      for (Eigen::Index i = 0; i < z.rows(); ++i) out.trace.outputs(i) = logistic(z(i, 0));
    } else {
      h = activate(z, params.arch.activation);
      out.trace.pre_activations.push_back(std::move(z));
    }
  }
  out.predictions.assign(out.trace.outputs.data(), out.trace.outputs.data() + out.trace.outputs.size());
  return out;
}

BagForward forward_bag(const NetParams& params, const Bag& bag) {
  return forward_bag(params, bag.instances);
}

NetGrads backward_bag(const NetParams& params, const BagForwardTrace& trace,
                      std::span<const double> upstream) {
  if (trace.layer_inputs.size() != params.layers.size() ||
      trace.pre_activations.size() + 1 != params.layers.size()) {
    throw DomainError("forward trace does not match the network");
  }
  if (upstream.size() != static_cast<std::size_t>(trace.size())) {
    throw DomainError("upstream gradient length differs from bag size");
  }
  NetGrads grads = NetGrads::zeros_like(params);
  const Eigen::Index n = trace.size();

  Eigen::MatrixXd delta(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = trace.outputs(i);
    delta(i, 0) = upstream[static_cast<std::size_t>(i)] * c * (1.0 - c);
  }
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    grads.layers[l].weight = delta.transpose() * trace.layer_inputs[l];
    grads.layers[l].bias = delta.colwise().sum().transpose();
    if (l == 0) break;
    delta = (delta * params.layers[l].weight).cwiseProduct(
        activation_derivative(trace.pre_activations[l - 1], params.arch.activation));
  }
  return grads;
}

}  // namespace promil
