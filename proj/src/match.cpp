#include "gapdx/match.h"

#include <cmath>

#include "gapdx/errors.h"
#include "gapdx/hash.h"
#include "gapdx/jsonl.h"
#include "gapdx/text_util.h"

namespace gapdx {

using json = nlohmann::json;

namespace {

// The only scroll rule: origins are ignored, directions compared.
constexpr const char* kScrollRule = "direction_only";

template <class Enum>
struct EnumName {
  Enum value;
  const char* name;
};

constexpr EnumName<ClickRule> kClickRules[] = {{ClickRule::kBBoxThenRadius, "bbox_then_radius"},
                                               {ClickRule::kRadiusOnly, "radius_only"}};
constexpr EnumName<TextRule> kTextRules[] = {{TextRule::kExact, "exact"}, {TextRule::kNormalized, "normalized"}};
constexpr EnumName<TerminateRule> kTerminateRules[] = {{TerminateRule::kTypeOnly, "type_only"},
                                                       {TerminateRule::kTypeAndStatus, "type_and_status"}};

template <class Enum, std::size_t N>
const char* NameOf(const EnumName<Enum> (&table)[N], Enum value) {
  for (const auto& entry : table) {
    if (entry.value == value) return entry.name;
  }
  return "?";
}

template <class Enum, std::size_t N>
Enum ValueOf(const EnumName<Enum> (&table)[N], const json& j, const char* field, Enum fallback) {
  auto it = j.find(field);
  if (it == j.end()) return fallback;
  if (it->is_string()) {
    for (const auto& entry : table) {
      if (it->get<std::string>() == entry.name) return entry.value;
    }
  }
  throw ConfigError(std::string("invalid match policy ") + field + ": " + it->dump());
}

MatchResult Ok() { return {true, match_reason::kOk}; }
MatchResult Fail(const char* reason) { return {false, reason}; }

MatchResult MatchPoint(const Point& predicted, const Point& gt, const std::optional<BBox>& gt_bbox,
                       const MatchPolicy& policy) {
  if (policy.click_rule == ClickRule::kBBoxThenRadius && gt_bbox) {
    return gt_bbox->Contains(predicted) ? Ok() : Fail(match_reason::kOutOfBBox);
  }
  const double dx = predicted.x - gt.x;
  const double dy = predicted.y - gt.y;
  const double radius = policy.radius_frac * kPerMilleMax;
  return std::hypot(dx, dy) <= radius ? Ok() : Fail(match_reason::kOutOfRadius);
}

MatchResult MatchSwipe(const Swipe& predicted, const Swipe& gt) {
  const auto pd = EffectiveDirection(predicted);
  const auto gd = EffectiveDirection(gt);
  if (pd && gd) return *pd == *gd ? Ok() : Fail(match_reason::kDirectionMismatch);
  // Neither side has a derivable direction: fall back to the endpoints.
  if (!pd && !gd && predicted.destination == gt.destination) return Ok();
  return Fail(match_reason::kDirectionMismatch);
}

MatchResult MatchKey(const PressKey& predicted, const PressKey& gt) {
  if (predicted.key == Key::kOther || gt.key == Key::kOther) {
    const bool same = predicted.key == gt.key && text::IEquals(predicted.raw_key, gt.raw_key);
    return same ? Ok() : Fail(match_reason::kKeyMismatch);
  }
  return predicted.key == gt.key ? Ok() : Fail(match_reason::kKeyMismatch);
}

}  // namespace

void MatchPolicy::Validate() const {
  if (!(radius_frac > 0.0 && radius_frac <= 1.0)) {
    throw ConfigError("radius_frac must lie in (0, 1], got " + std::to_string(radius_frac));
  }
}

json MatchPolicy::ToJson() const {
  return json{{"click_rule", NameOf(kClickRules, click_rule)},
              {"radius_frac", radius_frac},
              {"text_rule", NameOf(kTextRules, text_rule)},
              {"scroll_rule", kScrollRule},
              {"terminate_rule", NameOf(kTerminateRules, terminate_rule)}};
}

MatchPolicy MatchPolicy::FromJson(const json& j) {
  if (!j.is_object()) throw ConfigError("match policy must be a JSON object");
  MatchPolicy policy;
  policy.click_rule = ValueOf(kClickRules, j, "click_rule", policy.click_rule);
  policy.text_rule = ValueOf(kTextRules, j, "text_rule", policy.text_rule);
  policy.terminate_rule = ValueOf(kTerminateRules, j, "terminate_rule", policy.terminate_rule);
  if (auto it = j.find("radius_frac"); it != j.end()) {
    if (!it->is_number()) throw ConfigError("radius_frac must be a number");
    policy.radius_frac = it->get<double>();
  }
  if (auto it = j.find("scroll_rule"); it != j.end() && *it != kScrollRule) {
    throw ConfigError("unsupported scroll_rule " + it->dump());
  }
  policy.Validate();
  return policy;
}

std::string MatchPolicy::Hash() const { return Sha256Hex(DumpCompact(ToJson())); }

std::string NormalizeText(std::string_view text) {
  if (!text.empty() && text.back() == '\n') text.remove_suffix(1);
  return text::CollapseWhitespace(text::AsciiLower(text::Trim(text)));
}

MatchResult MatchActions(const std::optional<CanonicalAction>& predicted, const CanonicalAction& gt,
                         const std::optional<BBox>& gt_bbox, const MatchPolicy& policy) {
  if (!predicted) return Fail(match_reason::kParseFailure);
  if (ActionClassOf(*predicted) != ActionClassOf(gt)) return Fail(match_reason::kTypeMismatch);

  if (const auto* g = std::get_if<Click>(&gt)) {
    return MatchPoint(std::get<Click>(*predicted).point, g->point, gt_bbox, policy);
  }
  if (const auto* g = std::get_if<LongPress>(&gt)) {
    return MatchPoint(std::get<LongPress>(*predicted).point, g->point, gt_bbox, policy);
  }
  if (const auto* g = std::get_if<Swipe>(&gt)) {
    return MatchSwipe(std::get<Swipe>(*predicted), *g);
  }
  if (const auto* g = std::get_if<TypeText>(&gt)) {
    const std::string& p = std::get<TypeText>(*predicted).text;
    const bool same = policy.text_rule == TextRule::kExact ? p == g->text : NormalizeText(p) == NormalizeText(g->text);
    return same ? Ok() : Fail(match_reason::kTextMismatch);
  }
  if (const auto* g = std::get_if<PressKey>(&gt)) {
    return MatchKey(std::get<PressKey>(*predicted), *g);
  }
  if (const auto* g = std::get_if<Terminate>(&gt)) {
    if (policy.terminate_rule == TerminateRule::kTypeOnly) return Ok();
    return std::get<Terminate>(*predicted).status == g->status ? Ok() : Fail(match_reason::kStatusMismatch);
  }
  if (const auto* g = std::get_if<Open>(&gt)) {
    const bool same = NormalizeText(std::get<Open>(*predicted).app_name) == NormalizeText(g->app_name);
    return same ? Ok() : Fail(match_reason::kAppMismatch);
  }
  return Ok();  // Wait: duration is not compared.
}

int EmStep(const StepRecord& record, const MatchPolicy& policy) {
  return MatchActions(record.predicted_action, record.gt_action, record.gt_bbox, policy).matched ? 1 : 0;
}

}  // namespace gapdx
