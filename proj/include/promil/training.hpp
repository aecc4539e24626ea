#pragma once

// Bag cost, its gradients, Adam, and the per-bag training loop that updates the
// instance network and the quantile level together.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "promil/aggregation.hpp"
#include "promil/bag.hpp"
#include "promil/bernstein_quantile.hpp"
#include "promil/instance_net.hpp"
#include "promil/metrics.hpp"

namespace promil {

enum class ValMetric { kAuc, kLoss };

// Which list the negative-class term is evaluated on.
//   kComplement: the level-(1-q) estimate over the complemented predictions
//                {1 - c_i}, which equals 1 - c_q. The cost is then ordinary BCE
//                on c_q.
//   kSameList:   the level-(1-q) estimate over the predictions themselves. Every
//                bag reaches zero cost when all predictions equal 1, so this
//                variant cannot learn; it is kept for comparison.
enum class NegativeBranch { kComplement, kSameList };

std::string_view to_string(ValMetric m);
ValMetric val_metric_from_string(std::string_view name);
std::string_view to_string(NegativeBranch b);
NegativeBranch negative_branch_from_string(std::string_view name);

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.99;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-5;
  int max_epochs = 100;
  int patience = 15;
  double eps_clamp = kDefaultClampEps;
  std::optional<double> q_init;  // unset: Uniform[0.1, 0.5]
  std::uint64_t seed = 0;
  ValMetric val_metric = ValMetric::kAuc;
  double improvement_threshold = 1e-4;
  Head head = Head::kPromil;
  NegativeBranch negative_branch = NegativeBranch::kComplement;

  void validate() const;
};

// -y log(c_q) - (1-y) log(c_1mq). Arguments above 1 are clamped to 1.
double promil_cost(double c_q, double c_1mq, int y);

struct CostGradients {
  double d_cq = 0.0;
  double d_c1mq = 0.0;
};
CostGradients cost_gradients(double c_q, double c_1mq, int y);

// Bias-corrected Adam step at step t >= 1. Decoupled weight decay
// (p -= lr * weight_decay * p) is applied only when `decay` is set.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> first_moment,
                 std::span<double> second_moment, const TrainConfig& cfg, std::int64_t t, bool decay);

struct TrainState {
  NetParams net;
  QuantileParam q;
  NetGrads first_moment;
  NetGrads second_moment;
  double q_first_moment = 0.0;
  double q_second_moment = 0.0;
  std::int64_t step = 0;
  int epoch = 0;
};

TrainState init_state(const NetArch& arch, const TrainConfig& cfg);

struct BagGradients {
  double cost = 0.0;
  double score = 0.0;      // c_q, or the max / mean score
  double aux_score = 0.0;  // c_1mq (quantile head only)
  std::vector<double> d_predictions;  // per instance, original bag order
  NetGrads net;
  double d_raw_q = 0.0;
};

// Cost of one bag given its instance predictions, for the configured head.
double bag_cost(std::span<const double> predictions, int label, double q, const TrainConfig& cfg);

BagGradients bag_gradients(const NetParams& net, const QuantileParam& q, const Bag& bag,
                           const TrainConfig& cfg);

// One forward/backward/update on a single bag. Returns the bag cost.
double bag_step(TrainState& state, const Bag& bag, const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double train_cost = 0.0;
  double val_auc = 0.0;
  double val_loss = 0.0;
  double q = 0.0;
  bool improved = false;
};

struct TrainedModel {
  Model model;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_metric = 0.0;
  std::vector<EpochRecord> history;
};

TrainedModel train(TrainState state, std::span<const Bag> train_bags, std::span<const Bag> val_bags,
                   const TrainConfig& cfg);

}  // namespace promil
