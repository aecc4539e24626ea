#pragma once

// Bernstein polynomial quantile estimator over an ascending list of scores.
//
// For sorted p_0 <= ... <= p_n the estimate at level q is
//
//   sum_k C(n,k) q^(n-k) (1-q)^k p_k
//
// i.e. the index K follows Binomial(n, 1-q) and the estimate is E[p_K]. Small q
// moves the mass toward the maximum, large q toward the minimum. Everything is
// evaluated in the log domain so that n in the thousands stays finite.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace promil {

inline constexpr double kDefaultClampEps = 1e-7;

// Ascending values plus the permutation that produced them:
// values[j] == original[permutation[j]].
struct SortedPredictions {
  std::vector<double> values;
  std::vector<std::size_t> permutation;

  // Stable ascending sort; ties keep their original relative order.
  static SortedPredictions from_unsorted(std::span<const double> predictions);

  // Checks ordering, range [0,1] and that permutation is a bijection.
  void validate() const;
  std::size_t size() const { return values.size(); }
};

// Trainable quantile level stored as an unconstrained real; q = logistic(raw).
class QuantileParam {
 public:
  QuantileParam() = default;
  explicit QuantileParam(double raw) : raw_(raw) {}
  static QuantileParam from_q(double q);

  double raw() const { return raw_; }
  double& raw() { return raw_; }
  double q() const;
  // dq/draw = q (1 - q)
  double dq_draw() const;

 private:
  double raw_ = 0.0;
};

double logistic(double x);
double logsumexp(std::span<const double> xs);

// log C(n, k) through log-gamma.
double log_binomial(std::int64_t n, std::int64_t k);

// log of the n+1 estimator weights at level q in (0,1).
std::vector<double> bernstein_log_weights(std::size_t n, double q);

// Values are clamped below at eps before the log. Requires ascending input.
double estimate_quantile(std::span<const double> sorted_values, double q,
                         double eps = kDefaultClampEps);

struct QuantileGradients {
  double value = 0.0;
  std::vector<double> d_values;  // w_k, or 0 where the value was clamped
  double d_q = 0.0;
};

QuantileGradients quantile_gradients(std::span<const double> sorted_values,
                                     double q, double eps = kDefaultClampEps);

// q == 0 gives the maximum and q == 1 the minimum (0^0 = 1).
double estimate_quantile_limit(std::span<const double> sorted_values, double q);

}  // namespace promil
