#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "psmatch/dataset.hpp"
#include "psmatch/matching.hpp"

namespace psmatch {

struct UnitEffect {
  std::size_t unit_id = 0;
  int z = 0;
  double tau = 0.0;  // signed toward Y(1) - Y(0) regardless of arm
};

/// Per-focal-unit effect: the counterfactual outcome is the weighted mean of
/// the matched outcomes. Caliper-dropped focal units are absent.
std::vector<UnitEffect> unit_effects(const MatchResult& match,
                                     std::span<const double> y,
                                     const std::vector<int>& z);

/// Mean effect over the focal set the estimand asks for (ATE all units, ATT
/// treated, ATNT controls).
double point_estimate(std::span<const UnitEffect> effects, Estimand estimand);

/// Matching-estimator standard error combining effect dispersion with a
/// match-reuse correction: sigma_i^2 = (Y_i - Y_nearest_same_arm)^2 / 2,
/// reuse term K(K-1) * sigma^2 (zero when K <= 1). Requires matching with
/// replacement.
double ai_standard_error(const MatchResult& match, std::span<const double> y,
                         const std::vector<int>& z,
                         std::span<const double> scores);

struct BootstrapOptions {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0 = hardware concurrency
};

struct BootstrapResult {
  double se = 0.0;
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

/// Resamples rows with replacement and reruns the whole pipeline (refit,
/// rematch, re-estimate) per replicate. Replicate b draws from a generator
/// derived from (seed, b), so the result does not depend on the worker
/// count. Replicates whose fit or match fails are dropped; more than 5%
/// dropped is an error.
BootstrapResult bootstrap_standard_error(const ObservationTable& table,
                                         const MatchSpec& spec,
                                         Estimand estimand,
                                         const BootstrapOptions& options);

struct EffectEstimate {
  Estimand estimand = Estimand::ate;
  double tau_hat = 0.0;
  double ai_se = 0.0;
  std::optional<double> bootstrap_se;
  std::size_t n_focal = 0;  // focal units with at least one match
  std::size_t bootstrap_replicates = 0;
  std::size_t dropped_replicates = 0;
  std::uint64_t seed = 0;
};

/// Point estimate and both standard errors from an already-fitted score
/// vector (no bootstrap; that needs the raw table to refit).
EffectEstimate estimate_with_scores(std::span<const double> scores,
                                    std::span<const double> y,
                                    const std::vector<int>& z,
                                    const MatchSpec& spec, Estimand estimand);

/// Full estimation pass over a table: fit propensity model, match, estimate,
/// plus the bootstrap when options are given.
EffectEstimate estimate(const ObservationTable& table, const MatchSpec& spec,
                        Estimand estimand,
                        const std::optional<BootstrapOptions>& bootstrap = {});

}  // namespace psmatch
