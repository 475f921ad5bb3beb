#include <random>

#include <gtest/gtest.h>

#include "gapdx/errors.h"
#include "gapdx/sampler.h"
#include "test_support.h"

namespace gapdx {
namespace {

using testing::OracleAllocate;

StrataPlan Plan(std::map<std::string, std::uint64_t> counts, std::uint64_t n, std::uint64_t k) {
  return Allocate(StrataInput{std::move(counts), n, k, 0});
}

TEST(Allocate, AitzWithoutMinimum) {
  const auto plan = Plan(testing::AitzClassCounts(), 200, 0);
  const std::map<std::string, std::uint64_t> want = {
      {"CLICK", 116}, {"STOP", 21}, {"SCROLL", 26}, {"INPUT", 21}, {"PRESS", 16}};
  EXPECT_EQ(plan.Takes(), want);
  EXPECT_EQ(plan.leftover, 2u);
  EXPECT_EQ(plan.Find("CLICK")->share, (Fraction{200 * 2736, 4724}));
}

TEST(Allocate, SmallStratumIsCappedAndRedistributed) {
  const auto plan = Plan({{"A", 3}, {"B", 997}}, 10, 5);
  EXPECT_EQ(plan.Takes(), (std::map<std::string, std::uint64_t>{{"A", 3}, {"B", 7}}));
  EXPECT_EQ(plan.total_minimum, 8u);
  EXPECT_EQ(plan.remainder, 2u);
}

TEST(Allocate, CapStrandsUnitsThatMoveElsewhere) {
  // A gets m=2 plus a share of 1, but holds only 2.
  const auto plan = Plan({{"A", 2}, {"B", 8}}, 9, 2);
  EXPECT_EQ(plan.Takes(), (std::map<std::string, std::uint64_t>{{"A", 2}, {"B", 7}}));
  EXPECT_EQ(plan.redistribution_passes, 1u);
  EXPECT_EQ(plan.Find("B")->redistributed, 1u);
  const auto all = Plan({{"A", 2}, {"B", 3}}, 5, 4);
  EXPECT_EQ(all.Takes(), (std::map<std::string, std::uint64_t>{{"A", 2}, {"B", 3}}));
}

TEST(Allocate, TieBreakPrefersLargerThenName) {
  // Equal remainders: 1 unit over {x:1, y:1} -> name order.
  EXPECT_EQ(Plan({{"y", 1}, {"x", 1}}, 1, 0).Takes(), (std::map<std::string, std::uint64_t>{{"x", 1}, {"y", 0}}));
}

TEST(Allocate, InfeasibleTargets) {
  EXPECT_THROW(Plan({}, 1, 0), InfeasibleTarget);
  EXPECT_THROW(Plan({{"A", 3}}, 0, 0), InfeasibleTarget);
  EXPECT_THROW(Plan({{"A", 3}}, 4, 0), InfeasibleTarget);
  EXPECT_THROW(Plan({{"A", 3}, {"B", 3}, {"C", 3}}, 5, 2), InfeasibleTarget);
}

TEST(Allocate, AgreesWithRationalOracle) {
  std::mt19937_64 rng(99);
  int checked = 0;
  while (checked < 1000) {
    std::map<std::string, std::uint64_t> counts;
    const int strata = 1 + static_cast<int>(rng() % 8);
    std::uint64_t total = 0;
    for (int s = 0; s < strata; ++s) {
      const std::uint64_t scale = (rng() % 4 == 0) ? 1000000000000ULL : 1000;
      const std::uint64_t n = rng() % scale;
      counts["s" + std::to_string(s)] = n;
      total += n;
    }
    if (total == 0) continue;
    const std::uint64_t n = 1 + rng() % total;
    const std::uint64_t k = rng() % 3 == 0 ? 0 : rng() % (n / strata + 2);
    const auto oracle = OracleAllocate(counts, n, k);
    if (!oracle) {
      EXPECT_THROW(Plan(counts, n, k), InfeasibleTarget);
      continue;
    }
    const StrataPlan plan = Plan(counts, n, k);
    std::uint64_t sum = 0;
    for (const StratumAllocation& s : plan.strata) {
      const auto& o = oracle->at(s.name);
      ASSERT_EQ(s.minimum, o.m) << s.name;
      ASSERT_EQ(s.floor_share, o.a) << s.name;
      ASSERT_EQ(s.remainder_bonus, o.delta) << s.name;
      ASSERT_EQ(s.take, o.t) << s.name;
      ASSERT_LE(s.take, s.count);
      ASSERT_GE(s.take, s.minimum);
      sum += s.take;
    }
    ASSERT_EQ(sum, n);
    ++checked;
  }
}

TEST(Allocate, ScaleAwareAtLargeCounts) {
  const std::uint64_t big = 6'000'000'000'000'000'000ULL;
  const auto plan = Plan({{"A", big}, {"B", big}, {"C", 3}}, 10'000'000'000'000'000'001ULL, 0);
  const auto oracle = OracleAllocate({{"A", big}, {"B", big}, {"C", 3}}, 10'000'000'000'000'000'001ULL, 0);
  ASSERT_TRUE(oracle);
  for (const auto& s : plan.strata) EXPECT_EQ(s.take, oracle->at(s.name).t);
}

TEST(StrataPlan, JsonRoundTrip) {
  const auto plan = Plan(testing::AitzClassCounts(), 200, 5);
  EXPECT_EQ(StrataPlan::FromJson(plan.ToJson()), plan);
  EXPECT_EQ(plan.ToJson().at("tie_break"), kTieBreakRule);
}

std::vector<StratumMember> Population(const std::map<std::string, std::uint64_t>& counts) {
  std::vector<StratumMember> out;
  std::int64_t i = 0;
  for (const auto& [name, n] : counts) {
    for (std::uint64_t j = 0; j < n; ++j) out.push_back({StepKey{"ep" + std::to_string(i / 5), i % 5}, name}), ++i;
  }
  return out;
}

TEST(Draw, DeterministicPerSeedAndSized) {
  const auto pop = Population({{"A", 30}, {"B", 50}});
  const auto plan = Plan(ClassCounts(pop), 20, 2);
  const KeyList a = Draw(plan, pop, 5), b = Draw(plan, pop, 5), c = Draw(plan, pop, 6);
  EXPECT_EQ(a.keys, b.keys);
  EXPECT_NE(a.keys, c.keys);
  EXPECT_EQ(a.keys.size(), 20u);
  EXPECT_TRUE(std::is_sorted(a.keys.begin(), a.keys.end()));
  EXPECT_EQ(KeyList::FromJson(a.ToJson()).keys, a.keys);
}

TEST(Draw, IsRoughlyUniformWithinAStratum) {
  const auto pop = Population({{"A", 10}});
  const auto plan = Plan({{"A", 10}}, 3, 0);
  std::map<StepKey, int> hits;
  for (std::uint64_t seed = 0; seed < 5000; ++seed) {
    for (const auto& k : Draw(plan, pop, seed).keys) ++hits[k];
  }
  ASSERT_EQ(hits.size(), 10u);
  for (const auto& [k, n] : hits) EXPECT_NEAR(n, 1500, 150) << ToString(k);
}

TEST(Draw, StratumTooSmallIsInfeasible) {
  const auto plan = Plan({{"A", 10}}, 5, 0);
  EXPECT_THROW(Draw(plan, Population({{"A", 4}}), 1), InfeasibleDraw);
}

TEST(KeyList, RejectsDuplicates) {
  nlohmann::json j = KeyList{{StepKey{"e", 1}}, "run", 0}.ToJson();
  j["keys"].push_back(j["keys"][0]);
  EXPECT_THROW(KeyList::FromJson(j), Error);
}

TEST(Project, PairsRunsOnTheSameKeys) {
  StepRecord r1, r2, r3;
  r1.key = {"e", 1};
  r2.key = {"e", 2};
  r3.key = {"e", 3};
  const KeyList keys{{StepKey{"e", 1}, StepKey{"e", 3}}, "base", 0};
  const auto projected = Project(keys, {r3, r2, r1});
  ASSERT_EQ(projected.size(), 2u);
  EXPECT_EQ(projected[0].key, (StepKey{"e", 1}));
  EXPECT_EQ(projected[1].key, (StepKey{"e", 3}));
  try {
    Project(KeyList{{StepKey{"e", 1}, StepKey{"x", 0}, StepKey{"y", 0}}, "base", 0}, {r1});
    FAIL();
  } catch (const MissingKeyError& e) {
    EXPECT_EQ(e.missing().size(), 2u);
  }
}

}  // namespace
}  // namespace gapdx
