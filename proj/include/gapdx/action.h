/// @file action.h
/// @brief Canonical, dialect-independent GUI action space.
///
/// All coordinates are stored on the per-mille grid [0,1000]^2 (x relative to
/// screen width, y relative to screen height). Pixel dialects are normalized
/// at parse time through NormalizePoint().

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

namespace gapdx {

inline constexpr int kPerMilleMax = 1000;

struct Point {
  int x = 0;
  int y = 0;

  bool operator==(const Point&) const = default;
};

class ScreenGeometry {
 public:
  /// Throws CoordinateSpaceError unless both sides are positive.
  ScreenGeometry(int width_px, int height_px);

  int width_px() const { return width_px_; }
  int height_px() const { return height_px_; }

  bool operator==(const ScreenGeometry&) const = default;

 private:
  int width_px_;
  int height_px_;
};

enum class CoordSpace { kPerMille, kPixels };

enum class Direction { kUp, kDown, kLeft, kRight };

/// kOther holds keys outside HOME/BACK/ENTER (GUI-Owl Menu, arbitrary adb
/// keyevents). Their verbatim name lives in PressKey::raw_key.
enum class Key { kHome, kBack, kEnter, kOther };

enum class TerminateStatus { kSuccess, kFailure, kSatisfied, kImpossible, kInterrupt, kNeedFeedback };

struct Click {
  Point point;
  bool operator==(const Click&) const = default;
};

struct LongPress {
  Point point;
  std::optional<std::int64_t> duration_ms;
  bool operator==(const LongPress&) const = default;
};

/// Carries a direction, a destination, or both; never neither.
struct Swipe {
  std::optional<Point> origin;
  std::optional<Direction> direction;
  std::optional<Point> destination;
  bool operator==(const Swipe&) const = default;
};

struct TypeText {
  std::string text;
  bool operator==(const TypeText&) const = default;
};

struct PressKey {
  Key key = Key::kBack;
  std::string raw_key;  // non-empty iff key == Key::kOther
  bool operator==(const PressKey&) const = default;
};

struct Open {
  std::string app_name;
  bool operator==(const Open&) const = default;
};

struct Wait {
  std::optional<std::int64_t> duration_ms;
  bool operator==(const Wait&) const = default;
};

struct Terminate {
  TerminateStatus status = TerminateStatus::kSuccess;
  std::optional<std::string> message;
  bool operator==(const Terminate&) const = default;
};

using CanonicalAction = std::variant<Click, LongPress, Swipe, TypeText, PressKey, Open, Wait, Terminate>;

enum class ActionClass { kClick, kLongPoint, kScroll, kInput, kPress, kStop, kNoAction, kOpen };

inline constexpr ActionClass kAllActionClasses[] = {
    ActionClass::kClick, ActionClass::kLongPoint, ActionClass::kScroll, ActionClass::kInput,
    ActionClass::kPress, ActionClass::kStop,      ActionClass::kNoAction, ActionClass::kOpen};

/// Maps raw coordinates onto the per-mille grid.
///
/// Per-mille input is rounded (half-up) and must lie in [0,1000]. Pixel input
/// requires a geometry and maps x -> round(1000*x/width), clamped to [0,1000].
/// Throws CoordinateSpaceError when pixel input lacks a geometry and
/// InvalidCoordinate for negative or non-finite values.
Point NormalizePoint(double raw_x, double raw_y, CoordSpace space,
                     const std::optional<ScreenGeometry>& geometry = std::nullopt);

ActionClass ActionClassOf(const CanonicalAction& action);

/// Throws InvalidAction when a variant breaks its invariants.
void ValidateAction(const CanonicalAction& action);

/// Direction of a swipe: the explicit one, else derived from origin->destination.
std::optional<Direction> EffectiveDirection(const Swipe& swipe);

/// Dominant-axis direction of a displacement; nullopt for a zero move.
std::optional<Direction> DirectionFromDelta(double dx, double dy);

// Canonical JSON form. Keys are emitted in sorted order, so the text is a
// deterministic function of the action.
nlohmann::json ActionToJson(const CanonicalAction& action);
std::string SerializeAction(const CanonicalAction& action);

/// Reads the canonical JSON form. Coordinates are interpreted in `space`
/// (per-mille unless a manifest declares pixel ground truth).
CanonicalAction ActionFromJson(const nlohmann::json& j, CoordSpace space = CoordSpace::kPerMille,
                               const std::optional<ScreenGeometry>& geometry = std::nullopt);

/// Inverse of SerializeAction. Throws ParseError on malformed text.
CanonicalAction ParseCanonical(std::string_view text);

/// One-line human-readable rendering, e.g. "click (500, 500)".
std::string DescribeAction(const CanonicalAction& action);

std::string_view ToString(ActionClass c);
std::optional<ActionClass> ActionClassFromString(std::string_view name);
std::string_view ToString(Direction d);
std::optional<Direction> DirectionFromString(std::string_view name);
std::string_view ToString(Key k);
std::string_view ToString(TerminateStatus s);
std::optional<TerminateStatus> TerminateStatusFromString(std::string_view name);

}  // namespace gapdx
