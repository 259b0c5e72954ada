#include "psmatch/effects.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "psmatch/propensity.hpp"
#include "psmatch/rng.hpp"

namespace psmatch {
namespace {

// Nearest same-arm neighbor outcomes drive the reuse-correction variance
// sigma_i^2 = (Y_i - Y_l(i))^2 / 2. Built lazily: only units with K > 1 need
// it, and a single-unit arm is only an error if a unit there is reused.
class SameArmNeighbors {
 public:
  SameArmNeighbors(std::span<const double> scores, const std::vector<int>& z)
      : scores_(scores), z_(z) {}

  std::size_t nearest(std::size_t i) {
    int arm = z_[i] ? 1 : 0;
    auto& items = sorted_[arm];
    if (items.empty()) {
      for (std::size_t u = 0; u < z_.size(); ++u)
        if ((z_[u] ? 1 : 0) == arm) items.push_back({scores_[u], u});
      std::sort(items.begin(), items.end());
    }
    if (items.size() < 2)
      throw std::runtime_error(
          "match-reuse variance needs at least two units in arm " +
          std::to_string(arm));

    auto pos = static_cast<std::size_t>(
        std::lower_bound(items.begin(), items.end(),
                         std::make_pair(scores_[i], i)) -
        items.begin());
    double s = scores_[i];
    double dl = pos > 0 ? s - items[pos - 1].first
                        : std::numeric_limits<double>::infinity();
    double dr = pos + 1 < items.size() ? items[pos + 1].first - s
                                       : std::numeric_limits<double>::infinity();
    double d = std::min(dl, dr);

    std::size_t best = z_.size();
    for (std::size_t q = pos; q-- > 0 && s - items[q].first <= d;)
      best = std::min(best, items[q].second);
    for (std::size_t q = pos + 1; q < items.size() && items[q].first - s <= d;
         ++q)
      best = std::min(best, items[q].second);
    return best;
  }

 private:
  std::span<const double> scores_;
  const std::vector<int>& z_;
  std::vector<std::pair<double, std::size_t>> sorted_[2];
};

// One bootstrap replicate, or the point path of estimate(): refit the
// propensity model and re-estimate on the given table.
double pipeline_tau(const ObservationTable& table, const MatchSpec& spec,
                    Estimand estimand) {
  DesignMatrix design = encode_design(table);
  PropensityModel model = fit_logistic(design, table.z);
  if (!model.converged)
    throw std::runtime_error("propensity fit did not converge (" + model.note +
                             ")");
  MatchResult match = nearest_neighbor_match(model.scores, table.z, spec, estimand);
  std::vector<UnitEffect> effects = unit_effects(match, table.y, table.z);
  return point_estimate(effects, estimand);
}

}  // namespace

std::vector<UnitEffect> unit_effects(const MatchResult& match,
                                     std::span<const double> y,
                                     const std::vector<int>& z) {
  if (y.size() != z.size() || match.n_units != z.size())
    throw std::invalid_argument("match result does not fit the outcome data");

  std::vector<UnitEffect> out;
  std::size_t p = 0;
  while (p < match.pairs.size()) {
    std::size_t i = match.pairs[p].focal_id;
    double imputed = 0.0;
    for (; p < match.pairs.size() && match.pairs[p].focal_id == i; ++p)
      imputed += match.pairs[p].weight * y[match.pairs[p].match_id];
    double own = y[i];
    out.push_back({i, z[i], z[i] ? own - imputed : imputed - own});
  }
  return out;
}

double point_estimate(std::span<const UnitEffect> effects, Estimand estimand) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& e : effects) {
    if (estimand == Estimand::att && e.z != 1) continue;
    if (estimand == Estimand::atnt && e.z != 0) continue;
    total += e.tau;
    ++n;
  }
  if (n == 0)
    throw std::runtime_error("no matched focal units for estimand " +
                             to_string(estimand));
  return total / static_cast<double>(n);
}

double ai_standard_error(const MatchResult& match, std::span<const double> y,
                         const std::vector<int>& z,
                         std::span<const double> scores) {
  if (!match.with_replacement)
    throw std::invalid_argument(
        "the matching standard error is defined for matching with replacement");
  if (scores.size() != z.size())
    throw std::invalid_argument("scores do not fit the treatment vector");

  std::vector<UnitEffect> effects = unit_effects(match, y, z);
  double tau = point_estimate(effects, match.estimand);

  double dispersion = 0.0;
  for (const auto& e : effects) dispersion += (e.tau - tau) * (e.tau - tau);

  SameArmNeighbors neighbors(scores, z);
  double reuse = 0.0;
  for (std::size_t j = 0; j < match.k_counts.size(); ++j) {
    double k = match.k_counts[j];
    double kk = k * (k - 1.0);
    if (kk <= 0.0) continue;
    double gap = y[j] - y[neighbors.nearest(j)];
    reuse += kk * gap * gap / 2.0;
  }

  auto n = static_cast<double>(effects.size());
  return std::sqrt((dispersion + reuse) / (n * n));
}

BootstrapResult bootstrap_standard_error(const ObservationTable& table,
                                         const MatchSpec& spec,
                                         Estimand estimand,
                                         const BootstrapOptions& options) {
  const std::size_t B = options.replicates;
  if (B < 2) throw std::invalid_argument("bootstrap needs at least 2 replicates");
  const std::size_t n = table.n();
  if (n == 0) throw std::invalid_argument("empty table");

  std::vector<double> taus(B, 0.0);
  std::vector<char> ok(B, 0);

  unsigned workers = options.workers
                         ? options.workers
                         : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(B));

  std::atomic<std::size_t> cursor{0};
  auto run = [&]() {
    std::vector<std::size_t> rows(n);
    for (std::size_t b = cursor.fetch_add(1); b < B; b = cursor.fetch_add(1)) {
      Rng rng = Rng::derived(options.seed, b + 1);
      for (std::size_t i = 0; i < n; ++i) rows[i] = rng.uniform_index(n);
      try {
        ObservationTable resampled = resample_rows(table, rows);
        if (resampled.arm_count(0) == 0 || resampled.arm_count(1) == 0)
          throw std::runtime_error("resample lost an arm");
        taus[b] = pipeline_tau(resampled, spec, estimand);
        ok[b] = 1;
      } catch (...) {
        ok[b] = 0;
      }
    }
  };

  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }

  // Aggregate in replicate order so the result is identical for any worker
  // count.
  std::vector<double> kept;
  kept.reserve(B);
  for (std::size_t b = 0; b < B; ++b)
    if (ok[b]) kept.push_back(taus[b]);

  std::size_t dropped = B - kept.size();
  if (static_cast<double>(dropped) > 0.05 * static_cast<double>(B))
    throw std::runtime_error(
        std::to_string(dropped) + " of " + std::to_string(B) +
        " bootstrap replicates failed (more than the 5% budget)");

  double mean = 0.0;
  for (double t : kept) mean += t;
  mean /= static_cast<double>(kept.size());
  double ss = 0.0;
  for (double t : kept) ss += (t - mean) * (t - mean);

  BootstrapResult result;
  result.kept = kept.size();
  result.dropped = dropped;
  result.se = kept.size() > 1
                  ? std::sqrt(ss / static_cast<double>(kept.size() - 1))
                  : 0.0;
  return result;
}

EffectEstimate estimate_with_scores(std::span<const double> scores,
                                    std::span<const double> y,
                                    const std::vector<int>& z,
                                    const MatchSpec& spec, Estimand estimand) {
  MatchResult match = nearest_neighbor_match(scores, z, spec, estimand);
  std::vector<UnitEffect> effects = unit_effects(match, y, z);

  EffectEstimate est;
  est.estimand = estimand;
  est.tau_hat = point_estimate(effects, estimand);
  est.n_focal = effects.size();
  if (spec.with_replacement) {
    est.ai_se = ai_standard_error(match, y, z, scores);
  } else {
    // Without replacement nothing is reused, so only the dispersion term
    // remains.
    double ss = 0.0;
    for (const auto& e : effects)
      ss += (e.tau - est.tau_hat) * (e.tau - est.tau_hat);
    auto n = static_cast<double>(effects.size());
    est.ai_se = std::sqrt(ss) / n;
  }
  return est;
}

EffectEstimate estimate(const ObservationTable& table, const MatchSpec& spec,
                        Estimand estimand,
                        const std::optional<BootstrapOptions>& bootstrap) {
  DesignMatrix design = encode_design(table);
  PropensityModel model = fit_logistic(design, table.z);
  if (!model.converged)
    throw std::runtime_error("propensity fit did not converge (" + model.note +
                             ")");

  EffectEstimate est =
      estimate_with_scores(model.scores, table.y, table.z, spec, estimand);
  if (bootstrap) {
    BootstrapResult br =
        bootstrap_standard_error(table, spec, estimand, *bootstrap);
    est.bootstrap_se = br.se;
    est.bootstrap_replicates = bootstrap->replicates;
    est.dropped_replicates = br.dropped;
    est.seed = bootstrap->seed;
  }
  return est;
}

}  // namespace psmatch
