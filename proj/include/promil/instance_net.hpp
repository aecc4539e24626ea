#pragma once

// Instance classifier: a small MLP ending in one logistic unit.

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "promil/bag.hpp"

namespace promil {

enum class Activation { kRelu, kTanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct NetArch {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;  // empty: logistic regression
  Activation activation = Activation::kRelu;

  void validate() const;
  bool operator==(const NetArch&) const = default;
};

// weight is (fan_out x fan_in).
struct Layer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct NetParams {
  NetArch arch;
  std::vector<Layer> layers;

  std::size_t parameter_count() const;
  // Layer by layer: weight (row-major) then bias.
  std::vector<double> flatten() const;
  static NetParams unflatten(const NetArch& arch, std::span<const double> flat);
  // Shapes match arch and every entry is finite.
  void validate() const;
};

// Same layout as NetParams, holding d cost / d parameter.
struct NetGrads {
  std::vector<Layer> layers;

  static NetGrads zeros_like(const NetParams& params);
  std::vector<double> flatten() const;
};

struct BagForwardTrace {
  // layer_inputs[l] is the (n x fan_in) input of layer l.
  std::vector<Eigen::MatrixXd> layer_inputs;
  // Hidden-layer pre-activations, needed for relu/tanh derivatives.
  std::vector<Eigen::MatrixXd> pre_activations;
  Eigen::VectorXd outputs;

  Eigen::Index size() const { return outputs.size(); }
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
NetParams init_params(const NetArch& arch, std::uint64_t seed);

double forward_instance(const NetParams& params, std::span<const double> x);

struct BagForward {
  std::vector<double> predictions;
  BagForwardTrace trace;
};

BagForward forward_bag(const NetParams& params, const InstanceMatrix& instances);
BagForward forward_bag(const NetParams& params, const Bag& bag);

// Gradient of sum_i upstream[i] * c_i, summed over the bag.
NetGrads backward_bag(const NetParams& params, const BagForwardTrace& trace,
                      std::span<const double> upstream);

}  // namespace promil
