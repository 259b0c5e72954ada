#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "oracles.hpp"
#include "psmatch/matching.hpp"
#include "psmatch/rng.hpp"

using namespace psmatch;

namespace {

oracle::Estimand to_oracle(Estimand e) {
  switch (e) {
    case Estimand::ate: return oracle::Estimand::ate;
    case Estimand::att: return oracle::Estimand::att;
    default: return oracle::Estimand::atnt;
  }
}

void check_against_oracle(const std::vector<double>& scores,
                          const std::vector<int>& z, const MatchSpec& spec,
                          Estimand estimand) {
  const MatchResult got = nearest_neighbor_match(scores, z, spec, estimand);
  const oracle::MatchOut want =
      oracle::match(scores, z, spec.with_replacement, spec.allow_ties,
                    spec.tie_tolerance, spec.caliper, to_oracle(estimand));
  REQUIRE(got.pairs.size() == want.pairs.size());
  for (std::size_t k = 0; k < want.pairs.size(); ++k) {
    CHECK(got.pairs[k].focal_id == want.pairs[k].focal);
    CHECK(got.pairs[k].match_id == want.pairs[k].match);
    CHECK(got.pairs[k].weight == want.pairs[k].weight);
    CHECK(got.pairs[k].distance == want.pairs[k].distance);
  }
  REQUIRE(got.unmatched.size() == want.unmatched.size());
  for (std::size_t k = 0; k < want.unmatched.size(); ++k)
    CHECK(got.unmatched[k] == want.unmatched[k]);
}

// random instance; score rounding forces exact ties at coarse grids
void random_instance(Rng& rng, std::size_t n, int decimals,
                     std::vector<double>& scores, std::vector<int>& z) {
  scores.clear();
  z.clear();
  const double grid = std::pow(10.0, decimals);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.02 + 0.96 * rng.uniform01();
    if (decimals > 0) s = std::round(s * grid) / grid;
    scores.push_back(s);
    z.push_back(rng.bernoulli(0.4));
  }
  // both arms must be inhabited
  z[0] = 0;
  z[n - 1] = 1;
}

}  // namespace

TEST_CASE("estimand names round-trip and reject junk") {
  CHECK(to_string(Estimand::ate) == "ate");
  CHECK(to_string(Estimand::att) == "att");
  CHECK(to_string(Estimand::atnt) == "atnt");
  CHECK(parse_estimand("ate") == Estimand::ate);
  CHECK(parse_estimand("att") == Estimand::att);
  CHECK(parse_estimand("atnt") == Estimand::atnt);
  CHECK_THROWS(parse_estimand("atet"));
}

TEST_CASE("unique nearest neighbor wins") {
  const std::vector<double> scores{0.80, 0.50, 0.79, 0.91};
  const std::vector<int> z{1, 0, 0, 0};
  const MatchResult r = nearest_neighbor_match(scores, z, {}, Estimand::att);
  REQUIRE(r.pairs.size() == 1);
  CHECK(r.pairs[0].focal_id == 0);
  CHECK(r.pairs[0].match_id == 2);
  CHECK(r.pairs[0].weight == 1.0);
  CHECK(r.pairs[0].distance == doctest::Approx(0.01));
  CHECK(r.n_focal == 1);
  CHECK(r.unmatched.empty());
}

TEST_CASE("equidistant candidates split the weight") {
  const std::vector<double> scores{0.80, 0.78, 0.82};
  const std::vector<int> z{1, 0, 0};
  const MatchResult r = nearest_neighbor_match(scores, z, {}, Estimand::att);
  REQUIRE(r.pairs.size() == 2);
  CHECK(r.pairs[0].match_id == 1);
  CHECK(r.pairs[0].weight == doctest::Approx(0.5));
  CHECK(r.pairs[1].match_id == 2);
  CHECK(r.pairs[1].weight == doctest::Approx(0.5));
  CHECK(r.k_counts[1] == doctest::Approx(0.5));
  CHECK(r.k_counts[2] == doctest::Approx(0.5));
  CHECK(r.k_counts[0] == 0.0);

  // dyadic scores make the two distances exactly equal
  const std::vector<double> exact{0.5, 0.375, 0.625};
  MatchSpec no_ties;
  no_ties.allow_ties = false;
  const MatchResult single = nearest_neighbor_match(exact, z, no_ties, Estimand::att);
  REQUIRE(single.pairs.size() == 1);
  CHECK(single.pairs[0].match_id == 1);  // lowest unit id
  CHECK(single.pairs[0].weight == 1.0);
  CHECK(single.pairs[0].distance == 0.125);
}

TEST_CASE("near ties within tolerance are kept, outside are not") {
  const std::vector<double> scores{0.500, 0.499, 0.501 + 5e-9, 0.52};
  const std::vector<int> z{1, 0, 0, 0};
  MatchSpec spec;  // tie_tolerance 1e-8
  const MatchResult r = nearest_neighbor_match(scores, z, spec, Estimand::att);
  REQUIRE(r.pairs.size() == 2);  // 0.499 and 0.501+5e-9 tie, 0.52 does not
  CHECK(r.pairs[0].match_id == 1);
  CHECK(r.pairs[1].match_id == 2);

  spec.tie_tolerance = 0.0;
  const MatchResult exact = nearest_neighbor_match(scores, z, spec, Estimand::att);
  REQUIRE(exact.pairs.size() == 1);
  CHECK(exact.pairs[0].match_id == 1);
}

TEST_CASE("estimand selects the focal set") {
  const std::vector<double> scores{0.3, 0.4, 0.6, 0.7};
  const std::vector<int> z{0, 1, 0, 1};
  const MatchResult att = nearest_neighbor_match(scores, z, {}, Estimand::att);
  const MatchResult atnt = nearest_neighbor_match(scores, z, {}, Estimand::atnt);
  const MatchResult ate = nearest_neighbor_match(scores, z, {}, Estimand::ate);
  CHECK(att.n_focal == 2);
  CHECK(atnt.n_focal == 2);
  CHECK(ate.n_focal == 4);
  for (const auto& p : att.pairs) CHECK(z[p.focal_id] == 1);
  for (const auto& p : atnt.pairs) CHECK(z[p.focal_id] == 0);

  // ATE pairs restricted to treated focal units equal the ATT pairs
  std::vector<MatchedPair> restricted;
  for (const auto& p : ate.pairs)
    if (z[p.focal_id] == 1) restricted.push_back(p);
  REQUIRE(restricted.size() == att.pairs.size());
  for (std::size_t k = 0; k < restricted.size(); ++k) {
    CHECK(restricted[k].focal_id == att.pairs[k].focal_id);
    CHECK(restricted[k].match_id == att.pairs[k].match_id);
    CHECK(restricted[k].weight == att.pairs[k].weight);
  }
}

TEST_CASE("caliper drops focal units whose nearest candidate is too far") {
  const std::vector<double> scores{0.50, 0.40, 0.90, 0.88};
  const std::vector<int> z{1, 0, 1, 0};
  MatchSpec spec;
  spec.caliper = 0.05;
  const MatchResult r = nearest_neighbor_match(scores, z, spec, Estimand::att);
  REQUIRE(r.pairs.size() == 1);
  CHECK(r.pairs[0].focal_id == 2);
  CHECK(r.pairs[0].match_id == 3);
  REQUIRE(r.unmatched.size() == 1);
  CHECK(r.unmatched[0] == 0);

  spec.caliper = 0.2;
  CHECK(nearest_neighbor_match(scores, z, spec, Estimand::att).unmatched.empty());
}

TEST_CASE("input validation") {
  const std::vector<double> scores{0.3, 0.6};
  const std::vector<int> z{0, 1};
  MatchSpec spec;
  spec.caliper = 0.0;
  CHECK_THROWS(nearest_neighbor_match(scores, z, spec, Estimand::att));
  spec = {};
  spec.tie_tolerance = -1e-9;
  CHECK_THROWS(nearest_neighbor_match(scores, z, spec, Estimand::att));
  spec = {};
  CHECK_THROWS(nearest_neighbor_match(std::vector<double>{0.3, 1.0}, z, spec,
                                      Estimand::att));
  CHECK_THROWS(nearest_neighbor_match(std::vector<double>{0.3}, z, spec,
                                      Estimand::att));
  CHECK_THROWS(nearest_neighbor_match(scores, std::vector<int>{1, 1}, spec,
                                      Estimand::att));
}

TEST_CASE("without replacement: greedy consumption in min-distance order") {
  // one candidate sits between two focal units; nearest focal wins it
  const std::vector<double> scores{0.30, 0.33, 0.32, 0.60};
  const std::vector<int> z{1, 1, 0, 0};
  MatchSpec spec;
  spec.with_replacement = false;
  const MatchResult r = nearest_neighbor_match(scores, z, spec, Estimand::att);
  REQUIRE(r.pairs.size() == 2);
  CHECK_FALSE(r.with_replacement);
  // focal 1 (d=0.01 to unit 2) goes first, focal 0 is left with unit 3
  CHECK(r.pairs[0].focal_id == 0);
  CHECK(r.pairs[0].match_id == 3);
  CHECK(r.pairs[1].focal_id == 1);
  CHECK(r.pairs[1].match_id == 2);
  for (const auto& p : r.pairs) CHECK(p.weight == 1.0);

  // more focal units than candidates
  const std::vector<int> z_bad{1, 1, 1, 0};
  CHECK_THROWS_WITH_AS(
      nearest_neighbor_match(scores, z_bad, spec, Estimand::att),
      doctest::Contains("without replacement"), std::runtime_error);
  // ...but the other direction still works
  CHECK_NOTHROW(nearest_neighbor_match(scores, z_bad, spec, Estimand::atnt));
}

TEST_CASE("match results satisfy the conservation invariants") {
  Rng rng(2718);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> scores;
    std::vector<int> z;
    random_instance(rng, 120, rep % 2 ? 2 : 0, scores, z);
    for (Estimand e : {Estimand::ate, Estimand::att, Estimand::atnt}) {
      const MatchResult r = nearest_neighbor_match(scores, z, {}, e);

      // per focal unit the weights sum to one
      std::map<std::size_t, double> weight_by_focal;
      for (const auto& p : r.pairs) {
        CHECK(z[p.focal_id] != z[p.match_id]);
        weight_by_focal[p.focal_id] += p.weight;
        CHECK(p.weight > 0.0);
        CHECK(p.weight <= 1.0);
      }
      for (const auto& [id, w] : weight_by_focal) {
        (void)id;
        CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
      }

      // sum of k_counts equals the number of matched focal units
      double k_total = 0.0;
      for (double k : r.k_counts) k_total += k;
      CHECK(k_total == doctest::Approx(static_cast<double>(weight_by_focal.size())));
      CHECK(weight_by_focal.size() == r.n_focal - r.unmatched.size());

      // every pair's distance is the true candidate minimum
      for (const auto& p : r.pairs) {
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < z.size(); ++j)
          if (z[j] != z[p.focal_id])
            dmin = std::min(dmin, std::abs(scores[p.focal_id] - scores[j]));
        CHECK(p.distance == doctest::Approx(dmin).epsilon(1e-15));
      }

      // pairs arrive sorted by (focal, match)
      for (std::size_t k = 1; k < r.pairs.size(); ++k) {
        const auto& a = r.pairs[k - 1];
        const auto& b = r.pairs[k];
        CHECK((a.focal_id < b.focal_id ||
               (a.focal_id == b.focal_id && a.match_id < b.match_id)));
      }
    }
  }
}

TEST_CASE("adding a constant to every score changes nothing") {
  Rng rng(31);
  std::vector<double> scores;
  std::vector<int> z;
  random_instance(rng, 80, 2, scores, z);
  std::vector<double> shifted = scores;
  for (double& s : shifted) s += 0.015;

  for (Estimand e : {Estimand::ate, Estimand::att, Estimand::atnt}) {
    const MatchResult a = nearest_neighbor_match(scores, z, {}, e);
    const MatchResult b = nearest_neighbor_match(shifted, z, {}, e);
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (std::size_t k = 0; k < a.pairs.size(); ++k) {
      CHECK(a.pairs[k].focal_id == b.pairs[k].focal_id);
      CHECK(a.pairs[k].match_id == b.pairs[k].match_id);
      CHECK(a.pairs[k].weight == b.pairs[k].weight);
    }
  }
}

TEST_CASE("identical inputs give identical results") {
  Rng rng(5150);
  std::vector<double> scores;
  std::vector<int> z;
  random_instance(rng, 200, 2, scores, z);
  const MatchResult a = nearest_neighbor_match(scores, z, {}, Estimand::ate);
  const MatchResult b = nearest_neighbor_match(scores, z, {}, Estimand::ate);
  REQUIRE(a.pairs.size() == b.pairs.size());
  for (std::size_t k = 0; k < a.pairs.size(); ++k) {
    CHECK(a.pairs[k].focal_id == b.pairs[k].focal_id);
    CHECK(a.pairs[k].match_id == b.pairs[k].match_id);
    CHECK(a.pairs[k].weight == b.pairs[k].weight);
    CHECK(a.pairs[k].distance == b.pairs[k].distance);
  }
  CHECK(a.k_counts == b.k_counts);
}

TEST_CASE("library matcher agrees with the exhaustive oracle") {
  Rng rng(99);
  for (int rep = 0; rep < 12; ++rep) {
    const std::size_t n = 20 + 30 * static_cast<std::size_t>(rep);
    std::vector<double> scores;
    std::vector<int> z;
    random_instance(rng, n, rep % 3 == 0 ? 0 : 2, scores, z);
    for (Estimand e : {Estimand::ate, Estimand::att, Estimand::atnt}) {
      MatchSpec spec;
      check_against_oracle(scores, z, spec, e);
      spec.allow_ties = false;
      check_against_oracle(scores, z, spec, e);
      spec = {};
      spec.caliper = 0.01;
      check_against_oracle(scores, z, spec, e);
    }
    // without replacement needs candidates >= focal in each direction tried
    std::size_t n1 = 0;
    for (int zi : z) n1 += static_cast<std::size_t>(zi);
    MatchSpec greedy;
    greedy.with_replacement = false;
    if (n1 <= z.size() - n1) {
      check_against_oracle(scores, z, greedy, Estimand::att);
      greedy.caliper = 0.02;
      check_against_oracle(scores, z, greedy, Estimand::att);
    } else {
      check_against_oracle(scores, z, greedy, Estimand::atnt);
    }
  }
}

TEST_CASE("compute_k_counts accumulates match weights") {
  std::vector<MatchedPair> pairs{{0, 3, 1.0, 0.0}, {1, 3, 1.0, 0.0}, {2, 3, 1.0, 0.0}};
  const auto k = compute_k_counts(pairs, 4);
  REQUIRE(k.size() == 4);
  CHECK(k[3] == doctest::Approx(3.0));
  CHECK(k[0] == 0.0);
}

TEST_CASE("expand_matched_sample balances per-arm weight totals") {
  // two units, one per arm: ATE expansion puts weight 2 in each arm
  const std::vector<double> two_scores{0.4, 0.6};
  const std::vector<int> two_z{0, 1};
  const MatchResult two = nearest_neighbor_match(two_scores, two_z, {}, Estimand::ate);
  const auto w2 = expand_matched_sample(two);
  REQUIRE(w2.size() == 2);
  CHECK(w2[0] + w2[1] == doctest::Approx(4.0));
  CHECK(w2[0] == doctest::Approx(2.0));

  Rng rng(808);
  std::vector<double> scores;
  std::vector<int> z;
  random_instance(rng, 90, 2, scores, z);
  for (Estimand e : {Estimand::ate, Estimand::att, Estimand::atnt}) {
    const MatchResult r = nearest_neighbor_match(scores, z, {}, e);
    const auto w = expand_matched_sample(r);
    double arm0 = 0.0, arm1 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) (z[i] ? arm1 : arm0) += w[i];
    CHECK(arm0 == doctest::Approx(arm1));
    CHECK(arm0 == doctest::Approx(static_cast<double>(r.n_focal - r.unmatched.size())));
  }
}
