#include <random>

#include <gtest/gtest.h>

#include "gapdx/errors.h"
#include "gapdx/match.h"
#include "test_support.h"

namespace gapdx {
namespace {

using testing::RandomAction;

const MatchPolicy kDefault{};

bool Match(const CanonicalAction& p, const CanonicalAction& g, const std::optional<BBox>& bbox = std::nullopt,
           const MatchPolicy& policy = kDefault) {
  return MatchActions(p, g, bbox, policy).matched;
}

TEST(MatchProperties, EveryActionMatchesItself) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5000; ++i) {
    const CanonicalAction a = RandomAction(rng);
    ASSERT_TRUE(Match(a, a)) << SerializeAction(a);
  }
}

TEST(MatchProperties, DifferentClassesNeverMatch) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 5000; ++i) {
    const CanonicalAction a = RandomAction(rng);
    const CanonicalAction b = RandomAction(rng);
    if (ActionClassOf(a) == ActionClassOf(b)) continue;
    const auto r = MatchActions(a, b, std::nullopt, kDefault);
    ASSERT_FALSE(r.matched);
    ASSERT_EQ(r.reason, match_reason::kTypeMismatch);
  }
}

TEST(MatchProperties, LargerRadiusNeverLosesAMatch) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> c(0, 1000);
  MatchPolicy small = kDefault, large = kDefault;
  small.click_rule = large.click_rule = ClickRule::kRadiusOnly;
  for (int i = 0; i < 5000; ++i) {
    small.radius_frac = std::uniform_real_distribution<double>(0.01, 0.5)(rng);
    large.radius_frac = std::min(1.0, small.radius_frac + std::uniform_real_distribution<double>(0, 0.5)(rng));
    const Click p{Point{c(rng), c(rng)}}, g{Point{c(rng), c(rng)}};
    if (Match(p, g, std::nullopt, small)) {
      ASSERT_TRUE(Match(p, g, std::nullopt, large));
    }
  }
}

TEST(ClickRule, DefaultRadiusBoundaryIsInclusive) {
  EXPECT_TRUE(Match(Click{Point{640, 500}}, Click{Point{500, 500}}));
  EXPECT_FALSE(Match(Click{Point{641, 500}}, Click{Point{500, 500}}));
  // 84^2 + 112^2 = 140^2
  EXPECT_TRUE(Match(Click{Point{584, 612}}, Click{Point{500, 500}}));
  EXPECT_EQ(MatchActions(Click{Point{585, 612}}, Click{Point{500, 500}}, std::nullopt, kDefault).reason,
            match_reason::kOutOfRadius);
}

TEST(ClickRule, BoundingBoxDecidesWhenPresent) {
  const BBox box{100, 100, 200, 150};
  // Inside the radius, outside the box.
  const auto r = MatchActions(Click{Point{210, 120}}, Click{Point{150, 120}}, box, kDefault);
  EXPECT_FALSE(r.matched);
  EXPECT_EQ(r.reason, match_reason::kOutOfBBox);
  EXPECT_TRUE(Match(Click{Point{200, 150}}, Click{Point{150, 120}}, box));
  MatchPolicy radius_only = kDefault;
  radius_only.click_rule = ClickRule::kRadiusOnly;
  EXPECT_TRUE(Match(Click{Point{210, 120}}, Click{Point{150, 120}}, box, radius_only));
  EXPECT_TRUE(Match(LongPress{Point{110, 110}, 5000}, LongPress{Point{150, 120}, std::nullopt}, box));
}

TEST(SwipeRule, ComparesEffectiveDirection) {
  const Swipe explicit_up{std::nullopt, Direction::kUp, std::nullopt};
  const Swipe drag_up{Point{500, 900}, std::nullopt, Point{480, 100}};
  const Swipe drag_left{Point{900, 500}, std::nullopt, Point{100, 520}};
  EXPECT_TRUE(Match(drag_up, explicit_up));
  EXPECT_FALSE(Match(drag_left, explicit_up));
  EXPECT_EQ(MatchActions(drag_left, explicit_up, std::nullopt, kDefault).reason, match_reason::kDirectionMismatch);
}

TEST(TextRule, NormalizedVersusExact) {
  EXPECT_EQ(NormalizeText("  Hello   World\n"), "hello world");
  EXPECT_TRUE(Match(TypeText{"Hello  World\n"}, TypeText{"hello world"}));
  MatchPolicy exact = kDefault;
  exact.text_rule = TextRule::kExact;
  EXPECT_FALSE(Match(TypeText{"Hello  World\n"}, TypeText{"hello world"}, std::nullopt, exact));
  EXPECT_FALSE(Match(TypeText{"héllo"}, TypeText{"hello"}));
}

TEST(KeyRule, OtherKeysCompareByName) {
  EXPECT_TRUE(Match(PressKey{Key::kOther, "MENU"}, PressKey{Key::kOther, "menu"}));
  EXPECT_FALSE(Match(PressKey{Key::kOther, "menu"}, PressKey{Key::kOther, "volume_up"}));
  EXPECT_FALSE(Match(PressKey{Key::kHome, ""}, PressKey{Key::kBack, ""}));
}

TEST(TerminateRule, StatusOnlyWhenConfigured) {
  const Terminate ok{TerminateStatus::kSuccess, std::nullopt};
  const Terminate bad{TerminateStatus::kImpossible, std::nullopt};
  EXPECT_TRUE(Match(bad, ok));
  MatchPolicy strict = kDefault;
  strict.terminate_rule = TerminateRule::kTypeAndStatus;
  EXPECT_FALSE(Match(bad, ok, std::nullopt, strict));
}

TEST(Match, AbsentPredictionIsAParseFailure) {
  const auto r = MatchActions(std::nullopt, Wait{}, std::nullopt, kDefault);
  EXPECT_FALSE(r.matched);
  EXPECT_EQ(r.reason, match_reason::kParseFailure);
}

TEST(MatchPolicy, JsonRoundTripAndValidation) {
  MatchPolicy p;
  p.radius_frac = 0.2;
  p.text_rule = TextRule::kExact;
  EXPECT_EQ(MatchPolicy::FromJson(p.ToJson()), p);
  EXPECT_NE(p.Hash(), kDefault.Hash());
  EXPECT_THROW(MatchPolicy::FromJson(nlohmann::json{{"radius_frac", 0}}), ConfigError);
  EXPECT_THROW(MatchPolicy::FromJson(nlohmann::json{{"click_rule", "nearest"}}), ConfigError);
  EXPECT_THROW(MatchPolicy::FromJson(nlohmann::json::array()), ConfigError);
}

}  // namespace
}  // namespace gapdx
