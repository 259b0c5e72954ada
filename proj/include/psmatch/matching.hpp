#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psmatch/dataset.hpp"

namespace psmatch {

enum class Estimand { ate, att, atnt };

std::string to_string(Estimand e);
Estimand parse_estimand(const std::string& text);

struct MatchSpec {
  bool with_replacement = true;
  bool allow_ties = true;        // ignored (off) without replacement
  double tie_tolerance = 1e-8;   // absolute, on score distance
  std::optional<double> caliper; // absolute score-distance cap
};

struct MatchedPair {
  std::size_t focal_id = 0;
  std::size_t match_id = 0;
  double weight = 1.0;
  double distance = 0.0;
};

struct MatchResult {
  Estimand estimand = Estimand::ate;
  bool with_replacement = true;
  std::vector<MatchedPair> pairs;     // sorted by (focal_id, match_id)
  std::vector<double> k_counts;       // per unit, total weight as a match
  std::vector<std::size_t> unmatched; // focal ids dropped by the caliper
  std::size_t n_units = 0;
  std::size_t n_focal = 0;            // size of the focal set before drops
};

/// One-to-one nearest-neighbor matching on |e_i - e_j|. The focal set is all
/// units (ATE), the treated (ATT) or the controls (ATNT); candidates are the
/// opposite arm. With ties enabled every candidate within tie_tolerance of
/// the minimum distance is kept at weight 1/m. Without replacement the match
/// is greedy in ascending order of each focal unit's minimum distance and
/// ties are disabled.
MatchResult nearest_neighbor_match(std::span<const double> scores,
                                   const std::vector<int>& z,
                                   const MatchSpec& spec, Estimand estimand);

std::vector<double> compute_k_counts(const std::vector<MatchedPair>& pairs,
                                     std::size_t n);

/// Per-unit weights of the pair-expanded matched sample: each pair (i, j, w)
/// adds w to both i and j. Arm weight totals come out equal to the matched
/// focal count on each side.
std::vector<double> expand_matched_sample(const MatchResult& result);

}  // namespace psmatch
