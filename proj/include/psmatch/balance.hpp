#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "psmatch/dataset.hpp"
#include "psmatch/matching.hpp"

namespace psmatch {

/// Standardized absolute mean difference, in percent. Infinite imbalance
/// (zero pooled variance, unequal location) comes back as +infinity.
double smd_continuous(double mean1, double sd1, double mean0, double sd0);
double smd_binary(double p1, double p0);

/// Mahalanobis SMD over the non-reference level proportions (first level is
/// the reference). Falls back to the pseudo-inverse when the pooled
/// covariance is singular; a gap outside its span is infinite imbalance.
double smd_categorical(std::span<const double> props1,
                       std::span<const double> props0);

struct BalanceRow {
  std::string variable;
  VariableKind kind = VariableKind::continuous;
  double smd_percent = 0.0;
  bool flagged = false;  // smd_percent >= 10
  ArmSummary control, treated;
  std::vector<std::string> level_names;  // categorical only
};

struct BalanceTable {
  double n_control = 0.0, n_treated = 0.0;  // per-arm weight totals
  std::vector<BalanceRow> rows;
};

/// One row per covariate, plus a trailing propensity-score row when scores
/// are supplied. With a match result the moments are weighted by the
/// pair-expanded sample; otherwise they describe the raw table.
BalanceTable balance_table(const ObservationTable& table,
                           const MatchResult* match = nullptr,
                           std::span<const double> scores = {});

struct HistogramSeries {
  std::vector<double> bin_edges;          // bins + 1 edges spanning [0, 1]
  std::vector<double> counts_control;     // weighted counts per bin
  std::vector<double> counts_treated;
};

/// Equal-width histogram of scores on [0, 1], right-open bins except the
/// last, counted per arm with optional unit weights.
HistogramSeries ps_histogram(std::span<const double> scores,
                             const std::vector<int>& z,
                             std::span<const double> weights = {},
                             std::size_t bins = 30);

}  // namespace psmatch
