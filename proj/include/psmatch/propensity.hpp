#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "psmatch/dataset.hpp"

namespace psmatch {

/// Reference-coded design: intercept first, then covariates in schema order,
/// categoricals expanding to one indicator per non-reference level in
/// declared order.
struct DesignMatrix {
  std::vector<std::string> column_names;
  Eigen::MatrixXd values;  // N x p
  std::vector<std::string> flags;  // constant columns, never-observed levels

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

DesignMatrix encode_design(const ObservationTable& table);

struct PropensityModel {
  std::vector<std::string> terms;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;  // inverse Fisher information at the solution
  std::vector<double> scores;  // fitted probabilities, strictly inside (0,1)
  double deviance = 0.0;
  std::vector<double> deviance_path;  // one entry per iteration, non-increasing
  int iterations = 0;
  bool converged = false;
  std::string note;  // reason when not converged
};

/// Maximum-likelihood logistic fit by iteratively reweighted least squares
/// with step halving. Converges when the deviance change drops below 1e-8
/// (25 iterations max). Complete separation is reported as non-convergence
/// with partial results; a rank-deficient design throws.
PropensityModel fit_logistic(const DesignMatrix& design, const std::vector<int>& z);

struct CoefficientStat {
  std::string term;
  double estimate = 0.0;
  double std_error = 0.0;
  double p_value = 1.0;
};

/// Wald table (normal reference). Refuses a non-converged model.
std::vector<CoefficientStat> wald_inference(const PropensityModel& model);

/// Scores for new rows; clamped to [1e-12, 1 - 1e-12].
std::vector<double> predict_scores(const PropensityModel& model,
                                   const DesignMatrix& design);

struct ArmOverlap {
  std::size_t n = 0;
  std::size_t below_lo = 0, above_hi = 0;
  double score_min = 0, q25 = 0, median = 0, q75 = 0, score_max = 0;
};

struct OverlapReport {
  double lo = 0.01, hi = 0.99;
  ArmOverlap control, treated;
  bool poor_overlap = false;  // some arm has > 5% of units outside [lo, hi]
};

OverlapReport overlap_report(std::span<const double> scores,
                             const std::vector<int>& z, double lo = 0.01,
                             double hi = 0.99);

}  // namespace psmatch
