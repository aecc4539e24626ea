#include "promil/bernstein_quantile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "promil/error.hpp"

namespace promil {

namespace {

void require_interior(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw DomainError("quantile level must lie in (0,1), got " + std::to_string(q));
  }
}

void require_ascending(std::span<const double> values) {
  if (values.empty()) throw DomainError("quantile of an empty list");
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (std::isnan(values[k])) throw DomainError("NaN in prediction list");
    if (k > 0 && values[k] < values[k - 1]) {
      throw DomainError("predictions are not sorted ascending at index " +
                        std::to_string(k));
    }
  }
}

}  // namespace

SortedPredictions SortedPredictions::from_unsorted(std::span<const double> predictions) {
  SortedPredictions out;
  out.permutation.resize(predictions.size());
  std::iota(out.permutation.begin(), out.permutation.end(), std::size_t{0});
  std::stable_sort(out.permutation.begin(), out.permutation.end(),
                   [&](std::size_t a, std::size_t b) { return predictions[a] < predictions[b]; });
  out.values.reserve(predictions.size());
  for (std::size_t idx : out.permutation) out.values.push_back(predictions[idx]);
  return out;
}

void SortedPredictions::validate() const {
  require_ascending(values);
  if (permutation.size() != values.size()) {
    throw DomainError("permutation length differs from value count");
  }
  std::vector<bool> seen(values.size(), false);
  for (std::size_t idx : permutation) {
    if (idx >= values.size() || seen[idx]) throw DomainError("permutation is not a bijection");
    seen[idx] = true;
  }
  for (double v : values) {
    if (v < 0.0 || v > 1.0) throw DomainError("prediction outside [0,1]");
  }
}

QuantileParam QuantileParam::from_q(double q) {
  require_interior(q);
  return QuantileParam(std::log(q) - std::log1p(-q));
}

double QuantileParam::q() const { return logistic(raw_); }

double QuantileParam::dq_draw() const {
  const double q = logistic(raw_);
  return q * (1.0 - q);
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logsumexp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(xs.begin(), xs.end());
  if (std::isinf(peak)) return peak;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - peak);
  return peak + std::log(acc);
}

double log_binomial(std::int64_t n, std::int64_t k) {
  if (n < 0 || k < 0 || k > n) {
    throw DomainError("log_binomial requires 0 <= k <= n, got n=" + std::to_string(n) +
                      " k=" + std::to_string(k));
  }
  if (k == 0 || k == n) return 0.0;
  const double nd = static_cast<double>(n);
  const double kd = static_cast<double>(k);
  return std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0);
}

std::vector<double> bernstein_log_weights(std::size_t n, double q) {
  require_interior(q);
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  std::vector<double> log_w(n + 1);
  const auto n_signed = static_cast<std::int64_t>(n);
  for (std::int64_t k = 0; k <= n_signed; ++k) {
    log_w[k] = log_binomial(n_signed, k) + static_cast<double>(n_signed - k) * log_q +
               static_cast<double>(k) * log_1mq;
  }
  return log_w;
}

double estimate_quantile(std::span<const double> sorted_values, double q, double eps) {
  require_ascending(sorted_values);
  require_interior(q);
  if (!(eps > 0.0)) throw DomainError("clamp eps must be positive");
  std::vector<double> terms = bernstein_log_weights(sorted_values.size() - 1, q);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    terms[k] += std::log(std::max(sorted_values[k], eps));
  }
  return std::exp(logsumexp(terms));
}

QuantileGradients quantile_gradients(std::span<const double> sorted_values, double q,
                                     double eps) {
  QuantileGradients out;
  out.value = estimate_quantile(sorted_values, q, eps);
  const std::size_t n = sorted_values.size() - 1;

  const std::vector<double> log_w = bernstein_log_weights(n, q);
  out.d_values.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    out.d_values[k] = sorted_values[k] > eps ? std::exp(log_w[k]) : 0.0;
  }
  if (n == 0) return out;

  // Derivative of a degree-n Bernstein polynomial is n times the degree-(n-1)
  // polynomial of forward differences. Differences are nonnegative, so the sum
  // has no cancellation even when n is large.
  const std::vector<double> log_w_lower = bernstein_log_weights(n - 1, q);
  std::vector<double> terms;
  terms.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double diff = std::max(sorted_values[k + 1], eps) - std::max(sorted_values[k], eps);
    if (diff > 0.0) terms.push_back(log_w_lower[k] + std::log(diff));
  }
  out.d_q = terms.empty() ? 0.0 : -static_cast<double>(n) * std::exp(logsumexp(terms));
  return out;
}

double estimate_quantile_limit(std::span<const double> sorted_values, double q) {
  require_ascending(sorted_values);
  if (q == 0.0) return sorted_values.back();
  if (q == 1.0) return sorted_values.front();
  throw DomainError("boundary estimate requires q exactly 0 or 1");
}

}  // namespace promil
