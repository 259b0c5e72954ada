#include "psmatch/balance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "psmatch/stats.hpp"

namespace psmatch {
namespace {

constexpr double kFlagThreshold = 10.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double smd_continuous(double mean1, double sd1, double mean0, double sd0) {
  if (sd1 < 0 || sd0 < 0)
    throw std::invalid_argument("standard deviations must be nonnegative");
  double gap = std::abs(mean1 - mean0);
  double pooled = std::sqrt((sd1 * sd1 + sd0 * sd0) / 2.0);
  if (pooled == 0.0) return gap == 0.0 ? 0.0 : kInf;
  return 100.0 * gap / pooled;
}

double smd_binary(double p1, double p0) {
  if (p1 < 0 || p1 > 1 || p0 < 0 || p0 > 1)
    throw std::invalid_argument("proportions must lie in [0, 1]");
  double gap = std::abs(p1 - p0);
  double pooled = std::sqrt((p1 * (1 - p1) + p0 * (1 - p0)) / 2.0);
  if (pooled == 0.0) return gap == 0.0 ? 0.0 : kInf;
  return 100.0 * gap / pooled;
}

double smd_categorical(std::span<const double> props1,
                       std::span<const double> props0) {
  if (props1.size() != props0.size())
    throw std::invalid_argument("proportion vectors differ in length");
  auto check = [](std::span<const double> p) {
    double total = 0.0;
    for (double v : p) {
      if (v < 0 || v > 1)
        throw std::invalid_argument("proportions must lie in [0, 1]");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("proportions must sum to 1");
  };
  check(props1);
  check(props0);

  const std::size_t k = props1.size();
  if (k < 2) return 0.0;
  const Eigen::Index m = static_cast<Eigen::Index>(k - 1);

  Eigen::VectorXd d(m);
  for (Eigen::Index j = 0; j < m; ++j)
    d[j] = props1[static_cast<std::size_t>(j) + 1] -
           props0[static_cast<std::size_t>(j) + 1];

  Eigen::MatrixXd s(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    double pa1 = props1[static_cast<std::size_t>(a) + 1];
    double pa0 = props0[static_cast<std::size_t>(a) + 1];
    for (Eigen::Index b = 0; b < m; ++b) {
      double pb1 = props1[static_cast<std::size_t>(b) + 1];
      double pb0 = props0[static_cast<std::size_t>(b) + 1];
      double delta = a == b ? 1.0 : 0.0;
      s(a, b) = (pa1 * (delta - pb1) + pa0 * (delta - pb0)) / 2.0;
    }
  }

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(s);
  Eigen::VectorXd x = cod.solve(d);
  double gap_norm = d.cwiseAbs().maxCoeff();
  if (gap_norm > 0) {
    // A component of the gap outside the covariance span means the pooled
    // variability in that direction is zero: infinite imbalance.
    double residual = (s * x - d).cwiseAbs().maxCoeff();
    if (residual > 1e-8 * std::max(1.0, gap_norm)) return kInf;
  }
  double q = d.dot(x);
  return 100.0 * std::sqrt(std::max(q, 0.0));
}

BalanceTable balance_table(const ObservationTable& table,
                           const MatchResult* match,
                           std::span<const double> scores) {
  std::vector<double> weights;
  if (match != nullptr) {
    if (match->n_units != table.n())
      throw std::invalid_argument("match result does not fit the table");
    weights = expand_matched_sample(*match);
  }
  TableSummary summary = descriptive_summary(table, weights);

  BalanceTable out;
  out.n_control = summary.n_control;
  out.n_treated = summary.n_treated;

  for (const auto& var : summary.variables) {
    BalanceRow row;
    row.variable = var.name;
    row.kind = var.kind;
    row.control = var.control;
    row.treated = var.treated;
    row.level_names = var.levels;
    switch (var.kind) {
      case VariableKind::continuous:
        row.smd_percent = smd_continuous(var.treated.mean, var.treated.sd,
                                         var.control.mean, var.control.sd);
        break;
      case VariableKind::binary:
        row.smd_percent = smd_binary(var.treated.mean, var.control.mean);
        break;
      case VariableKind::categorical: {
        std::vector<double> p1, p0;
        for (const auto& lv : var.treated.levels)
          p1.push_back(lv.percent / 100.0);
        for (const auto& lv : var.control.levels)
          p0.push_back(lv.percent / 100.0);
        row.smd_percent = smd_categorical(p1, p0);
        break;
      }
    }
    row.flagged = row.smd_percent >= kFlagThreshold;
    out.rows.push_back(std::move(row));
  }

  if (!scores.empty()) {
    if (scores.size() != table.n())
      throw std::invalid_argument("scores do not fit the table");
    if (weights.empty()) weights.assign(table.n(), 1.0);
    auto arm_moments = [&](int arm) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < table.n(); ++i)
        if (table.z[i] == arm) idx.push_back(i);
      return weighted_moments(scores, weights, idx);
    };
    WeightedMoments m0 = arm_moments(0), m1 = arm_moments(1);
    BalanceRow row;
    row.variable = "propensity score";
    row.kind = VariableKind::continuous;
    row.control = {m0.weight_total, m0.mean, m0.sd, {}};
    row.treated = {m1.weight_total, m1.mean, m1.sd, {}};
    row.smd_percent = smd_continuous(m1.mean, m1.sd, m0.mean, m0.sd);
    row.flagged = row.smd_percent >= kFlagThreshold;
    out.rows.push_back(std::move(row));
  }
  return out;
}

HistogramSeries ps_histogram(std::span<const double> scores,
                             const std::vector<int>& z,
                             std::span<const double> weights,
                             std::size_t bins) {
  if (scores.size() != z.size())
    throw std::invalid_argument("scores and treatment differ in length");
  if (!weights.empty() && weights.size() != scores.size())
    throw std::invalid_argument("weights do not fit the scores");
  if (bins == 0) throw std::invalid_argument("need at least one bin");

  HistogramSeries h;
  h.bin_edges.resize(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k)
    h.bin_edges[k] = static_cast<double>(k) / static_cast<double>(bins);
  h.counts_control.assign(bins, 0.0);
  h.counts_treated.assign(bins, 0.0);

  for (std::size_t i = 0; i < scores.size(); ++i) {
    double s = scores[i];
    if (!(s >= 0.0 && s <= 1.0))
      throw std::invalid_argument("scores must lie in [0, 1]");
    auto bin = static_cast<std::size_t>(s * static_cast<double>(bins));
    if (bin >= bins) bin = bins - 1;
    double w = weights.empty() ? 1.0 : weights[i];
    (z[i] ? h.counts_treated : h.counts_control)[bin] += w;
  }
  return h;
}

}  // namespace psmatch
