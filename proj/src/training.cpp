#include "promil/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "promil/error.hpp"

namespace promil {

namespace {

std::span<double> as_span(Eigen::MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> as_span(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

void require_label(int y) {
  if (y != 0 && y != 1) throw DomainError("bag label must be 0 or 1, got " + std::to_string(y));
}

// Score and d score / d prediction for the two instance baselines, trained with
// plain BCE on the aggregated score.
struct BaselineEval {
  double score;
  std::vector<double> d_score;
};

BaselineEval baseline_score(std::span<const double> predictions, Head head) {
  BaselineEval out{0.0, std::vector<double>(predictions.size(), 0.0)};
  if (head == Head::kMax) {
    const auto it = std::max_element(predictions.begin(), predictions.end());
    out.score = *it;
    out.d_score[static_cast<std::size_t>(it - predictions.begin())] = 1.0;
  } else {
    const double inv_n = 1.0 / static_cast<double>(predictions.size());
    out.score = mean_score(predictions).score;
    std::fill(out.d_score.begin(), out.d_score.end(), inv_n);
  }
  return out;
}

double baseline_cost(double score, int y, double eps) {
  const double s = std::clamp(score, eps, 1.0 - eps);
  return y == 1 ? -std::log(s) : -std::log1p(-s);
}

double baseline_cost_derivative(double score, int y, double eps) {
  if (score < eps || score > 1.0 - eps) return 0.0;
  return y == 1 ? -1.0 / score : 1.0 / (1.0 - score);
}

struct QuantileBranches {
  SortedPredictions sorted;
  QuantileGradients at_q;
  // Level 1-q branch with gradients already mapped back onto sorted positions
  // and onto q (sign of the level flip included).
  double aux_value = 0.0;
  std::vector<double> aux_d_values;
  double aux_d_q = 0.0;
};

QuantileBranches quantile_branches(std::span<const double> predictions, double q, const TrainConfig& cfg) {
  QuantileBranches b;
  b.sorted = SortedPredictions::from_unsorted(predictions);
  b.at_q = quantile_gradients(b.sorted.values, q, cfg.eps_clamp);
  const std::size_t n = b.sorted.size();
  b.aux_d_values.assign(n, 0.0);
  if (cfg.negative_branch == NegativeBranch::kSameList) {
    const QuantileGradients g = quantile_gradients(b.sorted.values, 1.0 - q, cfg.eps_clamp);
    b.aux_value = g.value;
    b.aux_d_values = g.d_values;
    b.aux_d_q = -g.d_q;
  } else {
    // Ascending complement: position j holds 1 - values[n-1-j].
    std::vector<double> complement(n);
    for (std::size_t j = 0; j < n; ++j) complement[j] = 1.0 - b.sorted.values[n - 1 - j];
    const QuantileGradients g = quantile_gradients(complement, 1.0 - q, cfg.eps_clamp);
    b.aux_value = g.value;
    for (std::size_t j = 0; j < n; ++j) b.aux_d_values[n - 1 - j] = -g.d_values[j];
    b.aux_d_q = -g.d_q;
  }
  return b;
}

}  // namespace

std::string_view to_string(ValMetric m) { return m == ValMetric::kAuc ? "auc" : "loss"; }

ValMetric val_metric_from_string(std::string_view name) {
  if (name == "auc") return ValMetric::kAuc;
  if (name == "loss") return ValMetric::kLoss;
  throw DomainError("unknown validation metric '" + std::string(name) + "' (expected auc or loss)");
}

std::string_view to_string(NegativeBranch b) {
  return b == NegativeBranch::kComplement ? "complement" : "same_list";
}

NegativeBranch negative_branch_from_string(std::string_view name) {
  if (name == "complement") return NegativeBranch::kComplement;
  if (name == "same_list") return NegativeBranch::kSameList;
  throw DomainError("unknown negative branch '" + std::string(name) +
                    "' (expected complement or same_list)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw DomainError("beta1 must lie in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw DomainError("beta2 must lie in [0,1)");
  if (!(adam_eps > 0.0)) throw DomainError("adam_eps must be positive");
  if (!(weight_decay >= 0.0)) throw DomainError("weight_decay must be nonnegative");
  if (max_epochs < 1) throw DomainError("max_epochs must be at least 1");
  if (patience < 0 || patience > max_epochs) throw DomainError("patience must lie in [0, max_epochs]");
  if (!(eps_clamp > 0.0 && eps_clamp < 0.5)) throw DomainError("eps_clamp must lie in (0, 0.5)");
  if (q_init && !(*q_init > 0.0 && *q_init < 1.0)) throw DomainError("q_init must lie in (0,1)");
  if (!(improvement_threshold >= 0.0)) throw DomainError("improvement_threshold must be nonnegative");
}

double promil_cost(double c_q, double c_1mq, int y) {
  require_label(y);
  if (!(c_q > 0.0) || !(c_1mq > 0.0)) throw DomainError("cost arguments must be positive");
  return y == 1 ? -std::log(std::min(c_q, 1.0)) : -std::log(std::min(c_1mq, 1.0));
}

CostGradients cost_gradients(double c_q, double c_1mq, int y) {
  require_label(y);
  if (!(c_q > 0.0) || !(c_1mq > 0.0)) throw DomainError("cost arguments must be positive");
  return {-static_cast<double>(y) / c_q, -static_cast<double>(1 - y) / c_1mq};
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> first_moment,
                 std::span<double> second_moment, const TrainConfig& cfg, std::int64_t t, bool decay) {
  if (t < 1) throw DomainError("Adam step counter starts at 1");
  if (grad.size() != param.size() || first_moment.size() != param.size() ||
      second_moment.size() != param.size()) {
    throw DomainError("Adam buffers do not match the parameter shape");
  }
  const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    first_moment[i] = cfg.beta1 * first_moment[i] + (1.0 - cfg.beta1) * grad[i];
    second_moment[i] = cfg.beta2 * second_moment[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = first_moment[i] / correction1;
    const double v_hat = second_moment[i] / correction2;
    double update = m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    if (decay) update += cfg.weight_decay * param[i];
    param[i] -= cfg.learning_rate * update;
  }
}

TrainState init_state(const NetArch& arch, const TrainConfig& cfg) {
  cfg.validate();
  TrainState state;
  state.net = init_params(arch, cfg.seed);
  state.first_moment = NetGrads::zeros_like(state.net);
  state.second_moment = NetGrads::zeros_like(state.net);
  double q0 = 0.0;
  if (cfg.q_init) {
    q0 = *cfg.q_init;
  } else {
    std::seed_seq seq{cfg.seed, std::uint64_t{0x71}};
    std::mt19937_64 rng(seq);
    q0 = std::uniform_real_distribution<double>(0.1, 0.5)(rng);
  }
  state.q = QuantileParam::from_q(q0);
  return state;
}

double bag_cost(std::span<const double> predictions, int label, double q, const TrainConfig& cfg) {
  require_label(label);
  if (predictions.empty()) throw DomainError("cannot score an empty bag");
  if (cfg.head != Head::kPromil) {
    return baseline_cost(baseline_score(predictions, cfg.head).score, label, cfg.eps_clamp);
  }
  const SortedPredictions sorted = SortedPredictions::from_unsorted(predictions);
  const double c_q = estimate_quantile(sorted.values, q, cfg.eps_clamp);
  double c_1mq = 0.0;
  if (cfg.negative_branch == NegativeBranch::kSameList) {
    c_1mq = estimate_quantile(sorted.values, 1.0 - q, cfg.eps_clamp);
  } else {
    std::vector<double> complement(sorted.values.rbegin(), sorted.values.rend());
    for (double& v : complement) v = 1.0 - v;
    c_1mq = estimate_quantile(complement, 1.0 - q, cfg.eps_clamp);
  }
  return promil_cost(c_q, c_1mq, label);
}

BagGradients bag_gradients(const NetParams& net, const QuantileParam& q, const Bag& bag,
                           const TrainConfig& cfg) {
  require_label(bag.label);
  const BagForward fwd = forward_bag(net, bag);
  const std::size_t n = fwd.predictions.size();

  BagGradients out;
  out.d_predictions.assign(n, 0.0);
  if (cfg.head == Head::kPromil) {
    const double level = q.q();
    const QuantileBranches b = quantile_branches(fwd.predictions, level, cfg);
    out.score = b.at_q.value;
    out.aux_score = b.aux_value;
    out.cost = promil_cost(out.score, out.aux_score, bag.label);
    const CostGradients dc = cost_gradients(out.score, out.aux_score, bag.label);
    for (std::size_t k = 0; k < n; ++k) {
      const double d_sorted = dc.d_cq * b.at_q.d_values[k] + dc.d_c1mq * b.aux_d_values[k];
      out.d_predictions[b.sorted.permutation[k]] = d_sorted;
    }
    const double d_level = dc.d_cq * b.at_q.d_q + dc.d_c1mq * b.aux_d_q;
    out.d_raw_q = d_level * q.dq_draw();
  } else {
    const BaselineEval s = baseline_score(fwd.predictions, cfg.head);
    out.score = s.score;
    out.cost = baseline_cost(s.score, bag.label, cfg.eps_clamp);
    const double d_score = baseline_cost_derivative(s.score, bag.label, cfg.eps_clamp);
    for (std::size_t i = 0; i < n; ++i) out.d_predictions[i] = d_score * s.d_score[i];
  }
  out.net = backward_bag(net, fwd.trace, out.d_predictions);
  return out;
}

double bag_step(TrainState& state, const Bag& bag, const TrainConfig& cfg) {
  BagGradients g = bag_gradients(state.net, state.q, bag, cfg);
  if (!std::isfinite(g.cost) || !std::isfinite(g.d_raw_q)) {
    throw NumericalError("non-finite cost or gradient on bag '" + bag.id + "'");
  }
  ++state.step;
  for (std::size_t l = 0; l < state.net.layers.size(); ++l) {
    Layer& layer = state.net.layers[l];
    adam_update(as_span(layer.weight), as_span(g.net.layers[l].weight),
                as_span(state.first_moment.layers[l].weight), as_span(state.second_moment.layers[l].weight),
                cfg, state.step, true);
    adam_update(as_span(layer.bias), as_span(g.net.layers[l].bias), as_span(state.first_moment.layers[l].bias),
                as_span(state.second_moment.layers[l].bias), cfg, state.step, false);
  }
  if (cfg.head == Head::kPromil) {
    double& raw = state.q.raw();
    adam_update({&raw, 1}, {&g.d_raw_q, 1}, {&state.q_first_moment, 1}, {&state.q_second_moment, 1}, cfg,
                state.step, false);
    const double level = state.q.q();
    if (!(level > 0.0 && level < 1.0)) throw NumericalError("quantile level left (0,1)");
  }
  return g.cost;
}

TrainedModel train(TrainState state, std::span<const Bag> train_bags, std::span<const Bag> val_bags,
                   const TrainConfig& cfg) {
  cfg.validate();
  if (train_bags.empty()) throw DomainError("training split is empty");
  if (val_bags.empty()) throw DomainError("validation split is empty");
  std::vector<int> val_labels;
  for (const Bag& bag : val_bags) val_labels.push_back(bag.label);
  const bool val_has_both = std::count(val_labels.begin(), val_labels.end(), 1) > 0 &&
                            std::count(val_labels.begin(), val_labels.end(), 0) > 0;
  if (cfg.val_metric == ValMetric::kAuc && !val_has_both) {
    throw DomainError("validation split needs both classes for AUC early stopping");
  }

  std::seed_seq seq{cfg.seed, std::uint64_t{0x5bd1}};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(train_bags.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainedModel best;
  best.model = {state.net, state.q, cfg.head};
  int since_improvement = 0;
  bool have_best = false;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double cost_sum = 0.0;
    for (std::size_t idx : order) cost_sum += bag_step(state, train_bags[idx], cfg);
    state.epoch = epoch;

    const double level = state.q.q();
    std::vector<double> val_scores;
    double val_loss = 0.0;
    for (const Bag& bag : val_bags) {
      const std::vector<double> preds = forward_bag(state.net, bag).predictions;
      val_scores.push_back(score_predictions(preds, cfg.head, level, cfg.eps_clamp));
      val_loss += bag_cost(preds, bag.label, level, cfg);
    }
    val_loss /= static_cast<double>(val_bags.size());
    if (!std::isfinite(val_loss) || !std::isfinite(cost_sum)) {
      throw NumericalError("non-finite cost at epoch " + std::to_string(epoch));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_cost = cost_sum / static_cast<double>(train_bags.size());
    rec.val_auc = val_has_both ? auc(val_scores, val_labels) : std::nan("");
    rec.val_loss = val_loss;
    rec.q = level;

    const double metric = cfg.val_metric == ValMetric::kAuc ? rec.val_auc : -val_loss;
    if (!have_best || metric > best.best_val_metric + cfg.improvement_threshold) {
      have_best = true;
      rec.improved = true;
      since_improvement = 0;
      best.model = {state.net, state.q, cfg.head};
      best.best_epoch = epoch;
      best.best_val_metric = metric;
    } else {
      ++since_improvement;
    }
    best.history.push_back(rec);
    best.epochs_run = epoch;
    if (since_improvement >= cfg.patience) break;
  }
  if (cfg.val_metric == ValMetric::kLoss) best.best_val_metric = -best.best_val_metric;
  return best;
}

}  // namespace promil
