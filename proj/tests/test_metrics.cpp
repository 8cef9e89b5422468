#include <doctest.h>

#include <cmath>
#include <random>

#include "ebr/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ebr;
using namespace ebr::metrics;
namespace oracle = ebr::testing::oracle;

TEST_CASE("mae") {
  CHECK(mae({{1, 2, 3}, {1, 2, 3}}) == 0.0);
  CHECK(mae({{10, 20}, {20, 40}}) == 15.0);
  CHECK(mae({{0}, {100}}) == 100.0);
  CHECK_THROWS_AS(mae({}), MetricError);
}

TEST_CASE("kendall tau-b: fixed cases") {
  CHECK(kendall_tau_b({{1, 2, 3}, {1, 2, 3}}).tau == doctest::Approx(1.0));
  CHECK(kendall_tau_b({{1, 2, 3}, {3, 2, 1}}).tau == doctest::Approx(-1.0));

  const PairedScores tied{{1, 2, 2, 3}, {1, 3, 2, 3}};
  const auto tau = kendall_tau_b(tied);
  CHECK(tau.tau == doctest::Approx(oracle::brute_force_tau_b(tied.x, tied.y)).epsilon(1e-12));
  CHECK(tau.tau == doctest::Approx(0.8).epsilon(1e-12));
  // p-values pinned against scipy.stats.kendalltau (asymptotic, variant b)
  CHECK(tau.p_value == doctest::Approx(0.12597116307723114).epsilon(1e-9));
  CHECK(tau.n == 4);

  const PairedScores longer{{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 3, 3, 5}, {2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 1, 4, 4}};
  const auto second = kendall_tau_b(longer);
  CHECK(second.tau == doctest::Approx(0.7702702702702703).epsilon(1e-12));
  CHECK(second.p_value == doctest::Approx(0.0004029932855782987).epsilon(1e-9));
  CHECK(second.significant());
}

TEST_CASE("kendall tau-b: degenerate input") {
  CHECK_THROWS_AS(kendall_tau_b({{5, 5, 5}, {1, 2, 3}}), UndefinedTau);
  CHECK(!try_kendall_tau_b({{1, 2, 3}, {7, 7, 7}}));
  CHECK_THROWS_AS(kendall_tau_b({{1}, {1}}), MetricError);
  CHECK_THROWS_AS(kendall_tau_b({{1, 2}, {1}}), MetricError);
}

TEST_CASE("kendall tau-b matches the O(n^2) counter on random tied vectors") {
  std::mt19937 rng(20240517);
  int compared = 0;
  for (int trial = 0; trial < 2000 && compared < 600; ++trial) {
    const auto n = std::uniform_int_distribution<int>(2, 20)(rng);
    const auto levels = std::uniform_int_distribution<int>(1, 6)(rng);  // few levels force ties
    std::uniform_int_distribution<int> value(0, levels);
    PairedScores p;
    for (int i = 0; i < n; ++i) p.add(value(rng), value(rng));
    const auto expected = oracle::try_brute_force_tau_b(p.x, p.y);
    const auto got = try_kendall_tau_b(p);
    REQUIRE(expected.has_value() == got.has_value());
    if (!got) continue;
    CHECK(std::abs(got->tau - *expected) <= 1e-12);
    ++compared;
  }
  CHECK(compared >= 500);
}

TEST_CASE("kendall tau-b properties") {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> value(0, 8);
    PairedScores p;
    for (int i = 0; i < 15; ++i) p.add(value(rng), value(rng));
    const auto base = try_kendall_tau_b(p);
    if (!base) continue;

    const auto swapped = kendall_tau_b({p.y, p.x});
    CHECK(std::abs(swapped.tau - base->tau) <= 1e-12);
    CHECK(std::abs(swapped.p_value - base->p_value) <= 1e-12);

    PairedScores transformed = p;
    for (auto& v : transformed.x) v = std::exp(v / 3.0) * 7 - 2;  // strictly increasing
    for (auto& v : transformed.y) v = 3 * v * v * v + 1;
    CHECK(std::abs(kendall_tau_b(transformed).tau - base->tau) <= 1e-12);

    PairedScores negated = p;
    for (auto& v : negated.y) v = -v;
    CHECK(std::abs(kendall_tau_b(negated).tau + base->tau) <= 1e-12);
    CHECK(base->tau >= -1.0);
    CHECK(base->tau <= 1.0);
  }
}

TEST_CASE("kendall tau-b equals tau-a without ties") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(12), y(12);
    for (int i = 0; i < 12; ++i) x[i] = y[i] = i;
    std::shuffle(x.begin(), x.end(), rng);
    std::shuffle(y.begin(), y.end(), rng);
    CHECK(std::abs(kendall_tau_b({x, y}).tau - oracle::tau_a(x, y)) <= 1e-12);
  }
}

TEST_CASE("fleiss kappa") {
  SUBCASE("unanimity gives exactly 1") {
    RatingMatrix m;
    for (int i = 0; i < 10; ++i) m.counts.push_back(i % 2 ? std::vector<int>{5, 0} : std::vector<int>{0, 5});
    CHECK(fleiss_kappa(m) == 1.0);
  }
  SUBCASE("every item split: P-bar 0, Pe 1/2, kappa -1") {
    CHECK(fleiss_kappa({{{1, 1}, {1, 1}}}) == doctest::Approx(-1.0).epsilon(1e-9));
  }
  SUBCASE("three items, three raters") {
    // P_i = 1, 1/3, 1 -> P-bar 7/9; p = 5/9, 4/9 -> Pe 41/81; kappa 22/40
    CHECK(fleiss_kappa({{{3, 0}, {2, 1}, {0, 3}}}) == doctest::Approx(0.55).epsilon(1e-9));
  }
  SUBCASE("agrees with the direct formula on random matrices") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
      RatingMatrix m;
      const int raters = std::uniform_int_distribution<int>(2, 6)(rng);
      for (int i = 0; i < 8; ++i) {
        const int first = std::uniform_int_distribution<int>(0, raters)(rng);
        m.counts.push_back({first, raters - first});
      }
      const auto expected = oracle::fleiss_kappa_direct(m.counts);
      if (!expected) {
        CHECK_THROWS_AS(fleiss_kappa(m), MetricError);
      } else {
        CHECK(fleiss_kappa(m) == doctest::Approx(*expected).epsilon(1e-9));
      }
    }
  }
  SUBCASE("bad matrices") {
    CHECK_THROWS_AS(fleiss_kappa({{{2, 0}, {1, 2}}}), MetricError);  // unequal raters
    CHECK_THROWS_AS(fleiss_kappa({{{2, 0}}}), MetricError);          // one item
    CHECK_THROWS_AS(fleiss_kappa({{{3, 0}, {3, 0}}}), MetricError);  // Pe = 1
  }
}

TEST_CASE("collapse_binary") {
  CHECK(collapse_binary(LikertLabel::complete) == 1);
  CHECK(collapse_binary(LikertLabel::missing_minor) == 0);
  CHECK(collapse_binary(LikertLabel::missing_major) == 0);
  CHECK(collapse_binary(LikertLabel::missing_all) == 0);
}

TEST_CASE("pairwise aggregate tau") {
  std::map<std::string, double> forward, backward;
  for (int i = 0; i < 10; ++i) {
    forward["i" + std::to_string(i)] = i;
    backward["i" + std::to_string(i)] = -i;
  }
  SUBCASE("identical annotators") {
    const auto agg = pairwise_aggregate_tau({{"a", forward}, {"b", forward}});
    CHECK(agg.aggregate == doctest::Approx(1.0));
    CHECK(agg.included_pairs == 1);
  }
  SUBCASE("two identical, one reversed") {
    const auto agg = pairwise_aggregate_tau({{"a", forward}, {"b", forward}, {"c", backward}});
    REQUIRE(agg.pairs.size() == 3);
    CHECK(agg.pairs[0].tau->tau == doctest::Approx(1.0));   // a,b
    CHECK(agg.pairs[1].tau->tau == doctest::Approx(-1.0));  // a,c
    CHECK(agg.pairs[2].tau->tau == doctest::Approx(-1.0));  // b,c
    CHECK(agg.aggregate == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("small overlap and tied margins are excluded, and reported") {
    std::map<std::string, double> constant;
    for (const auto& [item, v] : forward) constant[item] = 3;
    std::map<std::string, double> few{{"i0", 1}, {"i1", 2}};
    const auto agg = pairwise_aggregate_tau({{"a", forward}, {"b", forward}, {"k", constant}, {"z", few}});
    CHECK(agg.included_pairs == 1);
    CHECK(agg.aggregate == doctest::Approx(1.0));
    std::size_t excluded = 0;
    for (const auto& pair : agg.pairs) excluded += pair.included ? 0 : 1;
    CHECK(excluded == 5);
    // the two tied-margin pairs (a,k), (b,k) count as zero in the alternative aggregate
    REQUIRE(agg.aggregate_undefined_as_zero.has_value());
    CHECK(*agg.aggregate_undefined_as_zero == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("fewer than two annotators") { CHECK_THROWS_AS(pairwise_aggregate_tau({{"a", forward}}), MetricError); }
}

TEST_CASE("label distribution") {
  using ebr::testing::make_judgment;
  SUBCASE("single complete judgment") {
    std::vector<Judgment> js{make_judgment("q", "a", LikertLabel::complete)};
    const auto rows = label_distribution(js, GroupBy::overall);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].percent == std::array<double, 4>{0, 0, 0, 100});
  }
  SUBCASE("per annotator") {
    std::vector<Judgment> js{make_judgment("q1", "a", LikertLabel::complete),
                             make_judgment("q2", "a", LikertLabel::missing_all),
                             make_judgment("q1", "b", LikertLabel::missing_minor)};
    const auto rows = label_distribution(js, GroupBy::annotator);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].group == "a");
    CHECK(rows[0].percent[0] == 50.0);
    CHECK(rows[0].percent[3] == 50.0);
    CHECK(rows[1].percent[2] == 100.0);
  }
  CHECK(round_half_up(17.5) == 18);
  CHECK(round_half_up(66.49) == 66);
}
