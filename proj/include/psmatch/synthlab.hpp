#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "psmatch/dataset.hpp"

namespace psmatch {

struct CovariateGen {
  std::string name;
  VariableKind kind = VariableKind::continuous;
  double mu = 0.0, sigma = 1.0;     // continuous: normal(mu, sigma)
  double p = 0.5;                   // binary: bernoulli(p)
  std::vector<std::string> labels;  // categorical
  std::vector<double> probs;
};

enum class NoiseKind { gaussian, bernoulli };

/// Data-generating recipe with known counterfactuals. The treatment-effect
/// function is tau(X) = tau0 + tau1 * e(X); a nonzero tau1 concentrates the
/// effect where treatment is likely, separating ATT from ATE.
struct Scenario {
  std::string name;
  std::size_t n = 0;
  std::vector<CovariateGen> covariates;
  std::vector<double> ps_coefficients;   // logit scale, intercept first
  std::vector<double> outcome_baseline;  // same design order
  double tau0 = 0.0, tau1 = 0.0;
  NoiseKind noise = NoiseKind::gaussian;
  double noise_sigma = 1.0;  // gaussian only
  std::uint64_t seed = 0;
};

void check_scenario(const Scenario& scenario);

struct SyntheticUnit {
  double e_true = 0.0;
  int z = 0;
  double y0 = 0.0, y1 = 0.0;
  double y = 0.0;  // z * y1 + (1 - z) * y0, exactly
};

struct SyntheticData {
  ObservationTable table;
  std::vector<SyntheticUnit> units;
  std::size_t clamped = 0;  // outcome probabilities clipped into [0, 1]
};

/// Deterministic in the scenario seed. Gaussian outcomes share one noise
/// draw across both potential outcomes, so y1 - y0 equals tau(X) exactly;
/// bernoulli outcomes draw the two arms independently.
SyntheticData generate(const Scenario& scenario);

struct TrueEstimands {
  double ate = 0.0, att = 0.0, atnt = 0.0;
};

/// Finite-sample truths averaged over the generated counterfactuals.
TrueEstimands true_estimands(std::span<const SyntheticUnit> units);

/// Named, fully seeded standard scenarios: tiny, null_effect, homogeneous,
/// heterogeneous, strong_confounding, weak_overlap.
std::vector<Scenario> scenario_suite();
Scenario find_scenario(const std::string& name);

/// Key=value scenario file, e.g.
///   n = 2000
///   seed = 42
///   covariate dist = normal(0, 1)
///   covariate warn = bernoulli(0.25)
///   covariate pos = categorical(Fwd: 0.3, Mid: 0.45, Def: 0.25)
///   ps_coefficients = -0.4, 0.9, 0.5, 0.3, 0.2
///   outcome_baseline = 0.2, 0.1, 0.05, 0, 0
///   tau0 = 0.1
///   tau1 = 0.6
///   noise = gaussian(0.25)
Scenario load_scenario(const std::string& path);

}  // namespace psmatch
