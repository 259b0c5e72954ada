#pragma once

#include <span>
#include <vector>

namespace psmatch {

/// Standard normal CDF.
double normal_cdf(double x);

/// Two-sided normal tail probability of |z|.
double two_sided_p(double z);

struct WeightedMoments {
  double weight_total = 0.0;
  double mean = 0.0;
  double sd = 0.0;  // denominator (sum of weights - 1); 0 when that is <= 0
};

/// Weighted mean and SD over the rows selected by `select`.
WeightedMoments weighted_moments(std::span<const double> values,
                                 std::span<const double> weights,
                                 std::span<const std::size_t> select);

/// Linear-interpolation quantile of an already sorted vector (R type 7).
double sorted_quantile(std::span<const double> sorted, double q);

}  // namespace psmatch
