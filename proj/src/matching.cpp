#include "psmatch/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace psmatch {

std::string to_string(Estimand e) {
  switch (e) {
    case Estimand::ate: return "ate";
    case Estimand::att: return "att";
    case Estimand::atnt: return "atnt";
  }
  return "ate";
}

Estimand parse_estimand(const std::string& text) {
  if (text == "ate") return Estimand::ate;
  if (text == "att") return Estimand::att;
  if (text == "atnt") return Estimand::atnt;
  throw std::invalid_argument("unknown estimand '" + text +
                              "' (expected ate, att or atnt)");
}

namespace {

struct Candidate {
  double score;
  std::size_t id;
};

// Candidates of one arm sorted by (score, id), searchable for the nearest
// neighbors of a query score.
struct SortedArm {
  std::vector<Candidate> items;

  explicit SortedArm(std::span<const double> scores, const std::vector<int>& z,
                     int arm) {
    for (std::size_t i = 0; i < z.size(); ++i)
      if (z[i] == arm) items.push_back({scores[i], i});
    std::sort(items.begin(), items.end(), [](const Candidate& a, const Candidate& b) {
      return a.score != b.score ? a.score < b.score : a.id < b.id;
    });
  }

  std::size_t lower_bound(double s) const {
    std::size_t lo = 0, hi = items.size();
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (items[mid].score < s)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }

  double min_distance(double s) const {
    std::size_t pos = lower_bound(s);
    double best = std::numeric_limits<double>::infinity();
    if (pos < items.size()) best = std::min(best, std::abs(s - items[pos].score));
    if (pos > 0) best = std::min(best, std::abs(s - items[pos - 1].score));
    return best;
  }

  // All ids with |s - score| <= limit, walking outward from the insertion
  // point; the two sides are each monotone in distance.
  std::vector<std::size_t> within(double s, double limit) const {
    std::vector<std::size_t> ids;
    std::size_t pos = lower_bound(s);
    for (std::size_t r = pos; r < items.size(); ++r) {
      if (items[r].score - s > limit) break;
      ids.push_back(items[r].id);
    }
    for (std::size_t l = pos; l-- > 0;) {
      if (s - items[l].score > limit) break;
      ids.push_back(items[l].id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }
};

void validate_inputs(std::span<const double> scores, const std::vector<int>& z,
                     const MatchSpec& spec) {
  if (scores.size() != z.size())
    throw std::invalid_argument("scores and treatment differ in length");
  if (spec.tie_tolerance < 0)
    throw std::invalid_argument("tie tolerance must be nonnegative");
  if (spec.caliper && *spec.caliper <= 0)
    throw std::invalid_argument("caliper must be positive");
  std::size_t arm_n[2] = {0, 0};
  for (std::size_t i = 0; i < z.size(); ++i) {
    ++arm_n[z[i] ? 1 : 0];
    if (!(scores[i] > 0.0 && scores[i] < 1.0))
      throw std::invalid_argument("scores must lie strictly inside (0, 1)");
  }
  if (arm_n[0] == 0 || arm_n[1] == 0)
    throw std::invalid_argument("both treatment arms must be non-empty");
}

std::vector<std::size_t> focal_ids(const std::vector<int>& z, Estimand estimand) {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < z.size(); ++i) {
    bool focal = estimand == Estimand::ate ||
                 (estimand == Estimand::att && z[i] == 1) ||
                 (estimand == Estimand::atnt && z[i] == 0);
    if (focal) ids.push_back(i);
  }
  return ids;
}

void match_with_replacement(std::span<const double> scores,
                            const std::vector<int>& z, const MatchSpec& spec,
                            const std::vector<std::size_t>& focal,
                            const SortedArm arms[2], MatchResult& out) {
  for (std::size_t i : focal) {
    const SortedArm& cand = arms[z[i] ? 0 : 1];
    double d = cand.min_distance(scores[i]);
    if (spec.caliper && d > *spec.caliper) {
      out.unmatched.push_back(i);
      continue;
    }
    std::vector<std::size_t> ids =
        cand.within(scores[i], spec.allow_ties ? d + spec.tie_tolerance : d);
    if (!spec.allow_ties) ids.resize(1);  // lowest id at the exact minimum
    double w = 1.0 / static_cast<double>(ids.size());
    for (std::size_t j : ids)
      out.pairs.push_back({i, j, w, std::abs(scores[i] - scores[j])});
  }
}

// Greedy matching without replacement over one direction: focal units in
// ascending order of their initial minimum distance, each candidate usable
// once, ties broken toward the lowest unit id.
void match_greedy_direction(std::span<const double> scores,
                            const std::vector<int>& z, const MatchSpec& spec,
                            int focal_arm, MatchResult& out) {
  std::vector<std::size_t> focal;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z[i] == focal_arm) focal.push_back(i);
  SortedArm cand(scores, z, focal_arm ? 0 : 1);

  if (focal.size() > cand.items.size())
    throw std::runtime_error(
        "matching without replacement needs the focal arm (" +
        std::to_string(focal.size()) + " units, arm " +
        std::to_string(focal_arm) + ") to be no larger than the candidate arm (" +
        std::to_string(cand.items.size()) + " units)");

  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(focal.size());
  for (std::size_t i : focal) order.emplace_back(cand.min_distance(scores[i]), i);
  std::sort(order.begin(), order.end());

  std::set<std::pair<double, std::size_t>> live;  // (score, id)
  for (const auto& c : cand.items) live.emplace(c.score, c.id);

  // Lowest live id at exactly this score.
  auto first_at = [&live](double score) {
    return live.lower_bound({score, 0});
  };

  for (const auto& [d0, i] : order) {
    const double s = scores[i];
    auto right = live.lower_bound({s, 0});
    double dr = right != live.end() ? right->first - s
                                    : std::numeric_limits<double>::infinity();
    auto left = right != live.begin() ? std::prev(right) : live.end();
    double dl = left != live.end() ? s - left->first
                                   : std::numeric_limits<double>::infinity();

    std::set<std::pair<double, std::size_t>>::iterator chosen;
    double best;
    if (dl < dr) {
      chosen = first_at(left->first);
      best = dl;
    } else if (dr < dl) {
      chosen = right;
      best = dr;
    } else {
      auto left_first = first_at(left->first);
      chosen = left_first->second < right->second ? left_first : right;
      best = dr;
    }

    if (spec.caliper && best > *spec.caliper) {
      out.unmatched.push_back(i);
      continue;
    }
    out.pairs.push_back({i, chosen->second, 1.0, best});
    live.erase(chosen);
  }
}

}  // namespace

MatchResult nearest_neighbor_match(std::span<const double> scores,
                                   const std::vector<int>& z,
                                   const MatchSpec& spec, Estimand estimand) {
  validate_inputs(scores, z, spec);

  MatchResult out;
  out.estimand = estimand;
  out.with_replacement = spec.with_replacement;
  out.n_units = z.size();

  std::vector<std::size_t> focal = focal_ids(z, estimand);
  out.n_focal = focal.size();

  if (spec.with_replacement) {
    SortedArm arms[2] = {SortedArm(scores, z, 0), SortedArm(scores, z, 1)};
    match_with_replacement(scores, z, spec, focal, arms, out);
  } else {
    if (estimand == Estimand::att || estimand == Estimand::ate)
      match_greedy_direction(scores, z, spec, 1, out);
    if (estimand == Estimand::atnt || estimand == Estimand::ate)
      match_greedy_direction(scores, z, spec, 0, out);
  }

  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const MatchedPair& a, const MatchedPair& b) {
              return a.focal_id != b.focal_id ? a.focal_id < b.focal_id
                                              : a.match_id < b.match_id;
            });
  std::sort(out.unmatched.begin(), out.unmatched.end());
  out.k_counts = compute_k_counts(out.pairs, out.n_units);
  return out;
}

std::vector<double> compute_k_counts(const std::vector<MatchedPair>& pairs,
                                     std::size_t n) {
  std::vector<double> k(n, 0.0);
  for (const auto& p : pairs) {
    if (p.match_id >= n || p.focal_id >= n)
      throw std::invalid_argument("pair references a unit id out of range");
    k[p.match_id] += p.weight;
  }
  return k;
}

std::vector<double> expand_matched_sample(const MatchResult& result) {
  std::vector<double> w(result.n_units, 0.0);
  for (const auto& p : result.pairs) {
    w[p.focal_id] += p.weight;
    w[p.match_id] += p.weight;
  }
  return w;
}

}  // namespace psmatch
