#include <cmath>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "psmatch/balance.hpp"
#include "psmatch/propensity.hpp"
#include "psmatch/rng.hpp"
#include "psmatch/synthlab.hpp"

using namespace psmatch;

TEST_CASE("continuous smd on published-style moments") {
  CHECK(smd_continuous(3.93, 2.28, 2.49, 1.78) ==
        doctest::Approx(70.40407486).epsilon(1e-8));
  CHECK(smd_continuous(5, 2, 5, 2) == 0.0);
  const double fwd = smd_continuous(23.21, 8.82, 14.29, 8.61);
  const double rev = smd_continuous(14.29, 8.61, 23.21, 8.82);
  CHECK(fwd == doctest::Approx(102.34483834).epsilon(1e-8));
  CHECK(fwd == rev);
  CHECK(std::isinf(smd_continuous(1.0, 0.0, 2.0, 0.0)));
  CHECK(smd_continuous(1.0, 0.0, 1.0, 0.0) == 0.0);
  CHECK_THROWS(smd_continuous(0, -1, 0, 1));
}

TEST_CASE("continuous smd is symmetric and scale invariant") {
  Rng rng(404);
  for (int i = 0; i < 50; ++i) {
    const double m1 = rng.normal(0, 5), m0 = rng.normal(0, 5);
    const double s1 = 0.1 + 3 * rng.uniform01(), s0 = 0.1 + 3 * rng.uniform01();
    const double a = smd_continuous(m1, s1, m0, s0);
    CHECK(a == doctest::Approx(smd_continuous(m0, s0, m1, s1)).epsilon(1e-12));
    const double scale = 0.25 + 4 * rng.uniform01();
    CHECK(a == doctest::Approx(smd_continuous(scale * m1, scale * s1, scale * m0,
                                              scale * s0))
                   .epsilon(1e-9));
    CHECK(a >= 0.0);
  }
}

TEST_CASE("binary smd") {
  CHECK(smd_binary(0.29, 0.23) == doctest::Approx(13.71092835).epsilon(1e-8));
  CHECK(smd_binary(0.6, 0.6) == 0.0);
  CHECK(std::isinf(smd_binary(1.0, 0.0)));
  CHECK(smd_binary(0.0, 0.0) == 0.0);
  CHECK(smd_binary(1.0, 1.0) == 0.0);
  CHECK(smd_binary(0.23, 0.29) == smd_binary(0.29, 0.23));
  CHECK_THROWS(smd_binary(1.2, 0.5));
}

TEST_CASE("categorical smd reproduces the three-level example") {
  const std::vector<double> cross{0.160, 0.467, 0.373};
  const std::vector<double> nocross{0.327, 0.436, 0.237};
  const double got = smd_categorical(cross, nocross);
  CHECK(got == doctest::Approx(43.07304923).epsilon(1e-8));

  // cross-check through an explicit solve of the 2x2 pooled-covariance system
  const double d1 = cross[1] - nocross[1], d2 = cross[2] - nocross[2];
  auto sij = [&](std::size_t a, std::size_t b) {
    const double delta = a == b ? 1.0 : 0.0;
    return (cross[a] * (delta - cross[b]) + nocross[a] * (delta - nocross[b])) / 2.0;
  };
  const auto x = oracle::solve_dense({{sij(1, 1), sij(1, 2)}, {sij(2, 1), sij(2, 2)}},
                                     {d1, d2});
  const double want = 100.0 * std::sqrt(d1 * x[0] + d2 * x[1]);
  CHECK(got == doctest::Approx(want).epsilon(1e-10));

  CHECK(smd_categorical(cross, cross) == 0.0);
  CHECK(smd_categorical(nocross, cross) == doctest::Approx(got).epsilon(1e-12));
}

TEST_CASE("two-level categorical reduces to the binary smd") {
  Rng rng(17);
  for (int i = 0; i < 40; ++i) {
    const double p1 = 0.05 + 0.9 * rng.uniform01();
    const double p0 = 0.05 + 0.9 * rng.uniform01();
    const std::vector<double> a{1.0 - p1, p1}, b{1.0 - p0, p0};
    CHECK(std::abs(smd_categorical(a, b) - smd_binary(p1, p0)) < 1e-9);
  }
}

TEST_CASE("categorical smd input validation and degenerate cases") {
  const std::vector<double> ok{0.2, 0.8};
  CHECK_THROWS(smd_categorical(ok, std::vector<double>{0.2, 0.3, 0.5}));
  CHECK_THROWS(smd_categorical(std::vector<double>{0.7, 0.7},
                               std::vector<double>{0.5, 0.5}));
  CHECK_THROWS(smd_categorical(std::vector<double>{-0.1, 1.1}, ok));

  // a level dead in both arms contributes nothing; pseudo-inverse path
  const std::vector<double> a{0.3, 0.7, 0.0}, b{0.6, 0.4, 0.0};
  const double with_dead = smd_categorical(a, b);
  CHECK(std::isfinite(with_dead));
  CHECK(with_dead ==
        doctest::Approx(smd_categorical(std::vector<double>{0.3, 0.7},
                                        std::vector<double>{0.6, 0.4}))
            .epsilon(1e-9));

  // reference level dead in both arms: pooled covariance is singular but the
  // gap stays inside its span
  const std::vector<double> c{0.0, 0.3, 0.7}, d{0.0, 0.55, 0.45};
  CHECK(std::isfinite(smd_categorical(c, d)));

  // all mass on a single, different level per arm: no pooled variability in
  // the gap direction
  const std::vector<double> e{1.0, 0.0}, f{0.0, 1.0};
  CHECK(std::isinf(smd_categorical(e, f)));
}

TEST_CASE("balance_table flags imbalance on the raw table") {
  const ObservationTable t = th::small_table();
  const BalanceTable b = balance_table(t);
  CHECK(b.n_control == doctest::Approx(5.0));
  CHECK(b.n_treated == doctest::Approx(5.0));
  REQUIRE(b.rows.size() == 3);

  const auto& x = b.rows[0];
  CHECK(x.variable == "x");
  // arm means 6 vs 5, sds sqrt(10): 100/sqrt(10) = 31.62...
  CHECK(x.smd_percent == doctest::Approx(100.0 / std::sqrt(10.0)).epsilon(1e-9));
  CHECK(x.flagged);
  CHECK(x.control.mean == doctest::Approx(5.0));
  CHECK(x.treated.mean == doctest::Approx(6.0));

  const auto& f = b.rows[1];
  CHECK(f.kind == VariableKind::binary);
  CHECK(f.smd_percent == doctest::Approx(smd_binary(0.8, 0.2)).epsilon(1e-12));
  CHECK(f.flagged);

  const auto& p = b.rows[2];
  CHECK(p.kind == VariableKind::categorical);
  CHECK(p.level_names == std::vector<std::string>{"a", "b", "c"});
  CHECK(p.smd_percent >= 0.0);
}

TEST_CASE("a table matched to clones balances perfectly") {
  // duplicate every unit into the opposite arm: exact clone matches exist
  const ObservationTable base = th::small_table();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < base.n(); ++i) rows.push_back(i);
  for (std::size_t i = 0; i < base.n(); ++i) rows.push_back(i);
  ObservationTable doubled = resample_rows(base, rows);
  for (std::size_t i = 0; i < base.n(); ++i) doubled.z[base.n() + i] = 1 - base.z[i];

  // give clones identical scores so each unit's nearest neighbor is its twin
  std::vector<double> scores;
  for (std::size_t i = 0; i < doubled.n(); ++i)
    scores.push_back(0.1 + 0.04 * static_cast<double>(i % base.n()));
  MatchSpec spec;
  spec.tie_tolerance = 0.0;
  const MatchResult m =
      nearest_neighbor_match(scores, doubled.z, spec, Estimand::ate);
  const BalanceTable b = balance_table(doubled, &m);
  for (const auto& row : b.rows) {
    CHECK(row.smd_percent < 1e-9);
    CHECK_FALSE(row.flagged);
  }
  CHECK(b.n_control == doctest::Approx(b.n_treated));
}

TEST_CASE("balance_table appends a propensity-score row when scores are given") {
  const ObservationTable t = th::small_table();
  std::vector<double> scores;
  for (std::size_t i = 0; i < t.n(); ++i)
    scores.push_back(0.2 + 0.05 * static_cast<double>(i));
  const BalanceTable b = balance_table(t, nullptr, scores);
  REQUIRE(b.rows.size() == 4);
  const auto& ps = b.rows.back();
  CHECK(ps.variable == "propensity score");
  CHECK(ps.kind == VariableKind::continuous);
  // arm 1 rows are odd indices: scores .25 .35 .45 .55 .65, mean .45
  CHECK(ps.treated.mean == doctest::Approx(0.45));
  CHECK(ps.control.mean == doctest::Approx(0.40));
  CHECK(ps.smd_percent > 0.0);

  CHECK_THROWS(balance_table(t, nullptr, std::vector<double>{0.5}));
}

TEST_CASE("matching a well-overlapped scenario removes the imbalance") {
  const Scenario sc = find_scenario("strong_confounding");
  const SyntheticData data = generate(sc);
  const DesignMatrix design = encode_design(data.table);
  const PropensityModel model = fit_logistic(design, data.table.z);
  REQUIRE(model.converged);

  const BalanceTable pre = balance_table(data.table, nullptr, model.scores);
  const MatchResult m =
      nearest_neighbor_match(model.scores, data.table.z, {}, Estimand::att);
  const BalanceTable post = balance_table(data.table, &m, model.scores);

  REQUIRE(pre.rows.size() == post.rows.size());
  bool any_flagged_pre = false;
  for (const auto& row : pre.rows) any_flagged_pre |= row.flagged;
  CHECK(any_flagged_pre);
  for (std::size_t i = 0; i < post.rows.size(); ++i) {
    CHECK(post.rows[i].smd_percent < 10.0);
    if (pre.rows[i].flagged)
      CHECK(post.rows[i].smd_percent < pre.rows[i].smd_percent);
  }
}

TEST_CASE("histogram puts all mass of 0.5 in bin 15 and conserves weight") {
  const std::vector<double> scores(7, 0.5);
  const std::vector<int> z{0, 0, 0, 0, 1, 1, 1};
  const HistogramSeries h = ps_histogram(scores, z);
  REQUIRE(h.bin_edges.size() == 31);
  CHECK(h.bin_edges.front() == 0.0);
  CHECK(h.bin_edges.back() == 1.0);
  CHECK(h.counts_control[15] == doctest::Approx(4.0));
  CHECK(h.counts_treated[15] == doctest::Approx(3.0));
  double total = 0.0;
  for (double c : h.counts_control) total += c;
  for (double c : h.counts_treated) total += c;
  CHECK(total == doctest::Approx(7.0));
}

TEST_CASE("histogram handles edges, weights and bad input") {
  const std::vector<double> scores{0.0, 1.0, 0.999, 0.05, 0.5};
  const std::vector<int> z{0, 1, 1, 0, 0};
  const std::vector<double> w{2.0, 1.0, 1.0, 1.0, 3.0};
  const HistogramSeries h = ps_histogram(scores, z, w);
  CHECK(h.counts_control[0] == doctest::Approx(2.0));
  CHECK(h.counts_treated[29] == doctest::Approx(2.0));  // 1.0 and 0.999
  CHECK(h.counts_control[1] == doctest::Approx(1.0));   // 0.05 -> second bin
  CHECK(h.counts_control[15] == doctest::Approx(3.0));

  double c0 = 0.0, c1 = 0.0;
  for (double c : h.counts_control) c0 += c;
  for (double c : h.counts_treated) c1 += c;
  CHECK(c0 == doctest::Approx(6.0));
  CHECK(c1 == doctest::Approx(2.0));

  CHECK_THROWS(ps_histogram(std::vector<double>{1.5}, std::vector<int>{0}));
  CHECK_THROWS(ps_histogram(scores, std::vector<int>{0, 1}));
  CHECK_THROWS(ps_histogram(scores, z, std::vector<double>{1.0}));
  CHECK_THROWS(ps_histogram(scores, z, w, 0));
}

TEST_CASE("matching raises the overlap coefficient of the score histograms") {
  const Scenario sc = find_scenario("strong_confounding");
  const SyntheticData data = generate(sc);
  const DesignMatrix design = encode_design(data.table);
  const PropensityModel model = fit_logistic(design, data.table.z);

  auto overlap_coef = [](const HistogramSeries& h) {
    double n0 = 0.0, n1 = 0.0;
    for (double c : h.counts_control) n0 += c;
    for (double c : h.counts_treated) n1 += c;
    double o = 0.0;
    for (std::size_t k = 0; k < h.counts_control.size(); ++k)
      o += std::min(h.counts_control[k] / n0, h.counts_treated[k] / n1);
    return o;
  };

  const HistogramSeries pre = ps_histogram(model.scores, data.table.z);
  const MatchResult m =
      nearest_neighbor_match(model.scores, data.table.z, {}, Estimand::ate);
  const auto weights = expand_matched_sample(m);
  const HistogramSeries post = ps_histogram(model.scores, data.table.z, weights);
  CHECK(overlap_coef(post) > overlap_coef(pre));
}
