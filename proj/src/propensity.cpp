#include "psmatch/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "psmatch/stats.hpp"

namespace psmatch {
namespace {

constexpr double kScoreFloor = 1e-12;
constexpr double kDevianceTol = 1e-8;
constexpr int kMaxIterations = 25;
constexpr double kSeparationBound = 30.0;

double logistic(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  double e = std::exp(eta);
  return e / (1.0 + e);
}

// -2 log likelihood, computed from the linear predictor so that extreme
// fitted probabilities do not underflow the log terms.
double binomial_deviance(const Eigen::VectorXd& eta, const std::vector<int>& z) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // log(1 + exp(eta)) without overflow.
    double lse = eta[i] > 0 ? eta[i] + std::log1p(std::exp(-eta[i]))
                            : std::log1p(std::exp(eta[i]));
    dev += 2.0 * (lse - (z[static_cast<std::size_t>(i)] ? eta[i] : 0.0));
  }
  return dev;
}

}  // namespace

DesignMatrix encode_design(const ObservationTable& table) {
  const std::size_t n = table.n();
  DesignMatrix design;
  design.column_names.push_back("(intercept)");
  for (const auto& col : table.covariates) {
    if (col.spec.kind == VariableKind::categorical) {
      for (std::size_t k = 1; k < col.spec.levels.size(); ++k)
        design.column_names.push_back(col.spec.name + "=" + col.spec.levels[k]);
    } else {
      design.column_names.push_back(col.spec.name);
    }
  }

  design.values.resize(static_cast<Eigen::Index>(n),
                       static_cast<Eigen::Index>(design.column_names.size()));
  design.values.col(0).setOnes();

  Eigen::Index j = 1;
  std::set<std::string> dead_levels;  // their columns are constant by definition
  for (const auto& col : table.covariates) {
    if (col.spec.kind == VariableKind::categorical) {
      const std::size_t m = col.spec.levels.size();
      std::vector<std::size_t> seen(m, 0);
      for (std::size_t i = 0; i < n; ++i) ++seen[col.level[i]];
      for (std::size_t k = 1; k < m; ++k, ++j) {
        for (std::size_t i = 0; i < n; ++i)
          design.values(static_cast<Eigen::Index>(i), j) =
              static_cast<std::size_t>(col.level[i]) == k ? 1.0 : 0.0;
        if (seen[k] == 0) {
          design.flags.push_back("level never observed: " + col.spec.name +
                                 "=" + col.spec.levels[k]);
          dead_levels.insert(col.spec.name + "=" + col.spec.levels[k]);
        }
      }
      if (seen[0] == 0)
        design.flags.push_back("level never observed: " + col.spec.name + "=" +
                               col.spec.levels[0]);
    } else {
      for (std::size_t i = 0; i < n; ++i)
        design.values(static_cast<Eigen::Index>(i), j) = col.numeric[i];
      ++j;
    }
  }

  for (Eigen::Index c = 1; c < design.values.cols(); ++c) {
    const std::string& name = design.column_names[static_cast<std::size_t>(c)];
    if (dead_levels.count(name)) continue;
    double lo = design.values.col(c).minCoeff();
    double hi = design.values.col(c).maxCoeff();
    if (lo == hi) design.flags.push_back("constant column: " + name);
  }
  return design;
}

PropensityModel fit_logistic(const DesignMatrix& design,
                             const std::vector<int>& z) {
  const Eigen::Index n = design.values.rows();
  const Eigen::Index p = design.values.cols();
  if (static_cast<std::size_t>(n) != z.size())
    throw std::invalid_argument("design rows do not match treatment length");
  if (n == 0) throw std::invalid_argument("empty design");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.values);
  if (qr.rank() < p) {
    std::string culprit;
    // The first column the pivoting pushed past the rank boundary is the
    // most useful name to report.
    auto perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p; ++k) {
      if (!culprit.empty()) culprit += ", ";
      culprit += design.column_names[static_cast<std::size_t>(perm[k])];
    }
    throw std::runtime_error("design matrix is rank deficient (" + culprit +
                             ")");
  }

  PropensityModel model;
  model.terms = design.column_names;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  double dev = binomial_deviance(eta, z);
  model.deviance_path.push_back(dev);

  Eigen::VectorXd mu(n), w(n), resid(n);
  bool separated = false;
  std::string note;

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = logistic(eta[i]);
      w[i] = std::max(mu[i] * (1.0 - mu[i]), kScoreFloor);
      resid[i] = z[static_cast<std::size_t>(i)] - mu[i];
    }
    Eigen::MatrixXd xtwx =
        design.values.transpose() * w.asDiagonal() * design.values;
    Eigen::VectorXd score = design.values.transpose() * resid;
    Eigen::VectorXd step = xtwx.ldlt().solve(score);

    // Step halving keeps the deviance monotone (up to the convergence
    // tolerance) when the full Newton step overshoots.
    double scale = 1.0;
    Eigen::VectorXd beta_new, eta_new;
    double dev_new = dev;
    bool improved = false;
    for (int h = 0; h < 12; ++h) {
      beta_new = beta + scale * step;
      eta_new = design.values * beta_new;
      dev_new = binomial_deviance(eta_new, z);
      if (dev_new <= dev + kDevianceTol) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) {
      note = "deviance could not be decreased";
      separated = true;
      break;
    }

    beta = beta_new;
    eta = eta_new;
    model.iterations = iter + 1;
    model.deviance_path.push_back(dev_new);
    double drop = std::abs(dev - dev_new);
    dev = dev_new;

    if (beta.cwiseAbs().maxCoeff() > kSeparationBound) {
      note = "separation suspected: |coefficient| exceeds " +
             std::to_string(static_cast<int>(kSeparationBound));
      separated = true;
      break;
    }
    if (drop < kDevianceTol) {
      model.converged = true;
      break;
    }
  }
  if (!model.converged && !separated)
    note = "iteration limit reached";

  model.coefficients = beta;
  model.deviance = dev;
  model.note = note;

  for (Eigen::Index i = 0; i < n; ++i) {
    mu[i] = logistic(eta[i]);
    w[i] = std::max(mu[i] * (1.0 - mu[i]), kScoreFloor);
  }
  Eigen::MatrixXd fisher =
      design.values.transpose() * w.asDiagonal() * design.values;
  model.covariance = fisher.ldlt().solve(
      Eigen::MatrixXd::Identity(p, p));

  model.scores.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    model.scores[static_cast<std::size_t>(i)] =
        std::clamp(mu[i], kScoreFloor, 1.0 - kScoreFloor);
  return model;
}

std::vector<CoefficientStat> wald_inference(const PropensityModel& model) {
  if (!model.converged)
    throw std::runtime_error("wald inference requires a converged fit (" +
                             model.note + ")");
  std::vector<CoefficientStat> out;
  out.reserve(model.terms.size());
  for (std::size_t j = 0; j < model.terms.size(); ++j) {
    CoefficientStat s;
    s.term = model.terms[j];
    s.estimate = model.coefficients[static_cast<Eigen::Index>(j)];
    double var = model.covariance(static_cast<Eigen::Index>(j),
                                  static_cast<Eigen::Index>(j));
    s.std_error = var > 0 ? std::sqrt(var) : 0.0;
    s.p_value = s.std_error > 0 ? two_sided_p(s.estimate / s.std_error) : 0.0;
    out.push_back(s);
  }
  return out;
}

std::vector<double> predict_scores(const PropensityModel& model,
                                   const DesignMatrix& design) {
  if (design.column_names != model.terms)
    throw std::invalid_argument(
        "design columns do not match the fitted model terms");
  Eigen::VectorXd eta = design.values * model.coefficients;
  std::vector<double> scores(static_cast<std::size_t>(eta.size()));
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    scores[static_cast<std::size_t>(i)] =
        std::clamp(logistic(eta[i]), kScoreFloor, 1.0 - kScoreFloor);
  return scores;
}

OverlapReport overlap_report(std::span<const double> scores,
                             const std::vector<int>& z, double lo, double hi) {
  if (scores.size() != z.size())
    throw std::invalid_argument("scores and treatment differ in length");
  if (!(lo < hi) || lo <= 0 || hi >= 1)
    throw std::invalid_argument("overlap thresholds must satisfy 0 < lo < hi < 1");

  OverlapReport rep;
  rep.lo = lo;
  rep.hi = hi;
  std::vector<double> by_arm[2];
  for (std::size_t i = 0; i < scores.size(); ++i)
    by_arm[z[i] ? 1 : 0].push_back(scores[i]);

  for (int arm = 0; arm < 2; ++arm) {
    ArmOverlap& a = arm ? rep.treated : rep.control;
    auto& v = by_arm[arm];
    a.n = v.size();
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    for (double s : v) {
      if (s < lo) ++a.below_lo;
      if (s > hi) ++a.above_hi;
    }
    a.score_min = v.front();
    a.score_max = v.back();
    a.q25 = sorted_quantile(v, 0.25);
    a.median = sorted_quantile(v, 0.5);
    a.q75 = sorted_quantile(v, 0.75);
    double frac_outside =
        static_cast<double>(a.below_lo + a.above_hi) / static_cast<double>(a.n);
    if (frac_outside > 0.05) rep.poor_overlap = true;
  }
  return rep;
}

}  // namespace psmatch
