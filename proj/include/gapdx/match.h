/// @file match.h
/// @brief The strict action matching rule shared by EM and GTA.
///
/// Two actions match when their classes are equal and their parameters agree
/// under a MatchPolicy. The policy pins the parts that are otherwise open:
/// click tolerance, text normalization, and terminate-status handling.

#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "gapdx/action.h"
#include "gapdx/trace.h"

namespace gapdx {

enum class ClickRule { kBBoxThenRadius, kRadiusOnly };
enum class TextRule { kExact, kNormalized };
enum class TerminateRule { kTypeOnly, kTypeAndStatus };

struct MatchPolicy {
  ClickRule click_rule = ClickRule::kBBoxThenRadius;
  /// Click radius as a fraction of the shorter screen side (1000 per-mille).
  double radius_frac = 0.14;
  TextRule text_rule = TextRule::kNormalized;
  TerminateRule terminate_rule = TerminateRule::kTypeOnly;

  /// Throws ConfigError when radius_frac is outside (0, 1].
  void Validate() const;

  nlohmann::json ToJson() const;
  static MatchPolicy FromJson(const nlohmann::json& j);

  /// sha256 of the canonical JSON form; embedded in every report.
  std::string Hash() const;

  bool operator==(const MatchPolicy&) const = default;
};

/// Reason codes.
namespace match_reason {
inline constexpr const char* kOk = "ok";
inline constexpr const char* kParseFailure = "parse_failure";
inline constexpr const char* kTypeMismatch = "type_mismatch";
inline constexpr const char* kOutOfBBox = "out_of_bbox";
inline constexpr const char* kOutOfRadius = "out_of_radius";
inline constexpr const char* kDirectionMismatch = "direction_mismatch";
inline constexpr const char* kTextMismatch = "text_mismatch";
inline constexpr const char* kKeyMismatch = "key_mismatch";
inline constexpr const char* kStatusMismatch = "status_mismatch";
inline constexpr const char* kAppMismatch = "app_mismatch";
}  // namespace match_reason

struct MatchResult {
  bool matched = false;
  std::string reason;
};

/// Text comparison key under TextRule::kNormalized: trimmed, ASCII
/// case-folded, whitespace-collapsed, one trailing newline removed.
std::string NormalizeText(std::string_view text);

/// An absent prediction (unparseable output) never matches.
MatchResult MatchActions(const std::optional<CanonicalAction>& predicted, const CanonicalAction& gt,
                         const std::optional<BBox>& gt_bbox, const MatchPolicy& policy);

/// Execution accuracy of one step: 1 iff the parsed prediction matches.
int EmStep(const StepRecord& record, const MatchPolicy& policy);

}  // namespace gapdx
