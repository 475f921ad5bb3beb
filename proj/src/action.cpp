/// @file action.cpp
/// @brief Canonical action space: normalization, classification, JSON form.

#include "gapdx/action.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gapdx/errors.h"

namespace gapdx {

using json = nlohmann::json;

namespace {

constexpr std::string_view kCanonicalDialect = "canonical";

// Integral inputs take an exact integer path so that half-way cases round up
// regardless of floating point representation.
int RoundRatioHalfUp(double value, int denominator) {
  constexpr double kExactLimit = 4.0e12;
  if (value == std::floor(value) && value < kExactLimit) {
    const auto num = static_cast<std::int64_t>(value) * kPerMilleMax;
    const std::int64_t den = denominator;
    return static_cast<int>(std::min<std::int64_t>((2 * num + den) / (2 * den), kPerMilleMax));
  }
  const double scaled = std::floor(value * kPerMilleMax / denominator + 0.5);
  return scaled > kPerMilleMax ? kPerMilleMax : static_cast<int>(scaled);
}

void CheckRaw(double v, const char* axis) {
  if (!std::isfinite(v)) {
    throw InvalidCoordinate(std::string("non-finite ") + axis + " coordinate");
  }
  if (v < 0) {
    std::ostringstream msg;
    msg << "negative " << axis << " coordinate " << v;
    throw InvalidCoordinate(msg.str());
  }
}

int PerMilleAxis(double v, const char* axis) {
  const double rounded = std::floor(v + 0.5);
  if (rounded > kPerMilleMax) {
    std::ostringstream msg;
    msg << axis << " coordinate " << v << " exceeds the per-mille range";
    throw InvalidCoordinate(msg.str());
  }
  return static_cast<int>(rounded);
}

void CheckPoint(const Point& p) {
  if (p.x < 0 || p.x > kPerMilleMax || p.y < 0 || p.y > kPerMilleMax) {
    throw InvalidCoordinate("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                        ") outside [0,1000]");
  }
}

void CheckDuration(const std::optional<std::int64_t>& d) {
  if (d && *d < 0) throw InvalidAction("negative duration");
}

json PointJson(const Point& p) { return json{{"x", p.x}, {"y", p.y}}; }

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void SchemaError(const std::string& detail) {
  throw ParseError(std::string(kCanonicalDialect), 0, detail);
}

const json& Require(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) SchemaError(std::string("missing field '") + field + "'");
  return *it;
}

std::string RequireString(const json& j, const char* field) {
  const json& v = Require(j, field);
  if (!v.is_string()) SchemaError(std::string("field '") + field + "' must be a string");
  return v.get<std::string>();
}

double RequireNumber(const json& j, const char* field) {
  const json& v = Require(j, field);
  if (!v.is_number()) SchemaError(std::string("field '") + field + "' must be a number");
  return v.get<double>();
}

std::optional<std::int64_t> OptionalDuration(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) SchemaError(std::string("field '") + field + "' must be an integer");
  return it->get<std::int64_t>();
}

Point ReadPoint(const json& j, CoordSpace space, const std::optional<ScreenGeometry>& geometry) {
  if (!j.is_object()) SchemaError("point must be an object with x and y");
  return NormalizePoint(RequireNumber(j, "x"), RequireNumber(j, "y"), space, geometry);
}

std::string EscapeForDisplay(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\n') {
      out += "\\n";
    } else if (c == '"') {
      out += "\\\"";
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string PointText(const Point& p) {
  return "(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")";
}

}  // namespace

ScreenGeometry::ScreenGeometry(int width_px, int height_px)
    : width_px_(width_px), height_px_(height_px) {
  if (width_px <= 0 || height_px <= 0) {
    throw CoordinateSpaceError("screen geometry must be positive, got " + std::to_string(width_px) +
                               "x" + std::to_string(height_px));
  }
}

Point NormalizePoint(double raw_x, double raw_y, CoordSpace space,
                     const std::optional<ScreenGeometry>& geometry) {
  CheckRaw(raw_x, "x");
  CheckRaw(raw_y, "y");
  if (space == CoordSpace::kPerMille) {
    return Point{PerMilleAxis(raw_x, "x"), PerMilleAxis(raw_y, "y")};
  }
  if (!geometry) throw CoordinateSpaceError("pixel coordinates require a screen geometry");
  const int x = RoundRatioHalfUp(raw_x, geometry->width_px());
  const int y = RoundRatioHalfUp(raw_y, geometry->height_px());
  return Point{std::min(x, kPerMilleMax), std::min(y, kPerMilleMax)};
}

ActionClass ActionClassOf(const CanonicalAction& action) {
  return std::visit(Overloaded{
                        [](const Click&) { return ActionClass::kClick; },
                        [](const LongPress&) { return ActionClass::kLongPoint; },
                        [](const Swipe&) { return ActionClass::kScroll; },
                        [](const TypeText&) { return ActionClass::kInput; },
                        [](const PressKey&) { return ActionClass::kPress; },
                        [](const Open&) { return ActionClass::kOpen; },
                        [](const Wait&) { return ActionClass::kNoAction; },
                        [](const Terminate&) { return ActionClass::kStop; },
                    },
                    action);
}

void ValidateAction(const CanonicalAction& action) {
  std::visit(Overloaded{
                 [](const Click& a) { CheckPoint(a.point); },
                 [](const LongPress& a) {
                   CheckPoint(a.point);
                   CheckDuration(a.duration_ms);
                 },
                 [](const Swipe& a) {
                   if (!a.direction && !a.destination) {
                     throw InvalidAction("swipe needs a direction or a destination");
                   }
                   if (a.origin) CheckPoint(*a.origin);
                   if (a.destination) CheckPoint(*a.destination);
                 },
                 [](const TypeText&) {},
                 [](const PressKey& a) {
                   if ((a.key == Key::kOther) == a.raw_key.empty()) {
                     throw InvalidAction("raw_key must be set exactly when key is OTHER");
                   }
                 },
                 [](const Open&) {},
                 [](const Wait& a) { CheckDuration(a.duration_ms); },
                 [](const Terminate&) {},
             },
             action);
}

std::optional<Direction> DirectionFromDelta(double dx, double dy) {
  if (dx == 0 && dy == 0) return std::nullopt;
  if (std::abs(dx) >= std::abs(dy)) return dx > 0 ? Direction::kRight : Direction::kLeft;
  return dy > 0 ? Direction::kDown : Direction::kUp;
}

std::optional<Direction> EffectiveDirection(const Swipe& swipe) {
  if (swipe.direction) return swipe.direction;
  if (swipe.origin && swipe.destination) {
    return DirectionFromDelta(swipe.destination->x - swipe.origin->x,
                              swipe.destination->y - swipe.origin->y);
  }
  return std::nullopt;
}

json ActionToJson(const CanonicalAction& action) {
  return std::visit(
      Overloaded{
          [](const Click& a) { return json{{"type", "click"}, {"x", a.point.x}, {"y", a.point.y}}; },
          [](const LongPress& a) {
            json j{{"type", "long_press"}, {"x", a.point.x}, {"y", a.point.y}};
            if (a.duration_ms) j["duration_ms"] = *a.duration_ms;
            return j;
          },
          [](const Swipe& a) {
            json j{{"type", "swipe"}};
            if (a.origin) j["origin"] = PointJson(*a.origin);
            if (a.direction) j["direction"] = std::string(ToString(*a.direction));
            if (a.destination) j["destination"] = PointJson(*a.destination);
            return j;
          },
          [](const TypeText& a) { return json{{"type", "input"}, {"text", a.text}}; },
          [](const PressKey& a) {
            json j{{"type", "press"}, {"key", std::string(ToString(a.key))}};
            if (a.key == Key::kOther) j["raw_key"] = a.raw_key;
            return j;
          },
          [](const Open& a) { return json{{"type", "open"}, {"app_name", a.app_name}}; },
          [](const Wait& a) {
            json j{{"type", "wait"}};
            if (a.duration_ms) j["duration_ms"] = *a.duration_ms;
            return j;
          },
          [](const Terminate& a) {
            json j{{"type", "terminate"}, {"status", std::string(ToString(a.status))}};
            if (a.message) j["message"] = *a.message;
            return j;
          },
      },
      action);
}

std::string SerializeAction(const CanonicalAction& action) {
  return ActionToJson(action).dump(-1, ' ', false, json::error_handler_t::replace);
}

CanonicalAction ActionFromJson(const json& j, CoordSpace space,
                               const std::optional<ScreenGeometry>& geometry) {
  if (!j.is_object()) SchemaError("action must be a JSON object");
  const std::string type = RequireString(j, "type");
  CanonicalAction action;
  if (type == "click") {
    action = Click{NormalizePoint(RequireNumber(j, "x"), RequireNumber(j, "y"), space, geometry)};
  } else if (type == "long_press") {
    action = LongPress{NormalizePoint(RequireNumber(j, "x"), RequireNumber(j, "y"), space, geometry),
                       OptionalDuration(j, "duration_ms")};
  } else if (type == "swipe") {
    Swipe s;
    if (auto it = j.find("origin"); it != j.end()) s.origin = ReadPoint(*it, space, geometry);
    if (auto it = j.find("destination"); it != j.end()) s.destination = ReadPoint(*it, space, geometry);
    if (j.contains("direction")) {
      const std::string name = RequireString(j, "direction");
      s.direction = DirectionFromString(name);
      if (!s.direction) SchemaError("unknown swipe direction '" + name + "'");
    }
    action = std::move(s);
  } else if (type == "input") {
    action = TypeText{RequireString(j, "text")};
  } else if (type == "press") {
    const std::string name = RequireString(j, "key");
    PressKey press;
    if (name == "HOME") {
      press.key = Key::kHome;
    } else if (name == "BACK") {
      press.key = Key::kBack;
    } else if (name == "ENTER") {
      press.key = Key::kEnter;
    } else if (name == "OTHER") {
      press.key = Key::kOther;
      press.raw_key = RequireString(j, "raw_key");
    } else {
      SchemaError("unknown key '" + name + "'");
    }
    action = std::move(press);
  } else if (type == "open") {
    action = Open{RequireString(j, "app_name")};
  } else if (type == "wait") {
    action = Wait{OptionalDuration(j, "duration_ms")};
  } else if (type == "terminate") {
    const std::string name = RequireString(j, "status");
    auto status = TerminateStatusFromString(name);
    if (!status) SchemaError("unknown terminate status '" + name + "'");
    Terminate t{*status, std::nullopt};
    if (j.contains("message")) t.message = RequireString(j, "message");
    action = std::move(t);
  } else {
    SchemaError("unknown action type '" + type + "'");
  }
  try {
    ValidateAction(action);
  } catch (const InvalidAction& e) {
    SchemaError(e.what());
  }
  return action;
}

CanonicalAction ParseCanonical(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(kCanonicalDialect), e.byte, e.what());
  } catch (const json::exception& e) {
    throw ParseError(std::string(kCanonicalDialect), 0, e.what());
  }
  return ActionFromJson(j);
}

std::string DescribeAction(const CanonicalAction& action) {
  return std::visit(
      Overloaded{
          [](const Click& a) { return "click " + PointText(a.point); },
          [](const LongPress& a) {
            std::string s = "long_press " + PointText(a.point);
            if (a.duration_ms) s += " for " + std::to_string(*a.duration_ms) + " ms";
            return s;
          },
          [](const Swipe& a) {
            std::string s = "swipe";
            if (a.direction) s += " " + std::string(ToString(*a.direction));
            if (a.origin) s += " from " + PointText(*a.origin);
            if (a.destination) s += " to " + PointText(*a.destination);
            return s;
          },
          [](const TypeText& a) { return "type \"" + EscapeForDisplay(a.text) + "\""; },
          [](const PressKey& a) {
            return "press " + (a.key == Key::kOther ? a.raw_key : std::string(ToString(a.key)));
          },
          [](const Open& a) { return "open \"" + EscapeForDisplay(a.app_name) + "\""; },
          [](const Wait& a) {
            return a.duration_ms ? "wait " + std::to_string(*a.duration_ms) + " ms" : std::string("wait");
          },
          [](const Terminate& a) {
            std::string s = "terminate (" + std::string(ToString(a.status)) + ")";
            if (a.message) s += ": " + EscapeForDisplay(*a.message);
            return s;
          },
      },
      action);
}

std::string_view ToString(ActionClass c) {
  switch (c) {
    case ActionClass::kClick: return "CLICK";
    case ActionClass::kLongPoint: return "LONG_POINT";
    case ActionClass::kScroll: return "SCROLL";
    case ActionClass::kInput: return "INPUT";
    case ActionClass::kPress: return "PRESS";
    case ActionClass::kStop: return "STOP";
    case ActionClass::kNoAction: return "NO_ACTION";
    case ActionClass::kOpen: return "OPEN";
  }
  return "?";
}

std::optional<ActionClass> ActionClassFromString(std::string_view name) {
  for (ActionClass c : kAllActionClasses) {
    if (ToString(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view ToString(Direction d) {
  switch (d) {
    case Direction::kUp: return "up";
    case Direction::kDown: return "down";
    case Direction::kLeft: return "left";
    case Direction::kRight: return "right";
  }
  return "?";
}

std::optional<Direction> DirectionFromString(std::string_view name) {
  for (Direction d : {Direction::kUp, Direction::kDown, Direction::kLeft, Direction::kRight}) {
    if (ToString(d) == name) return d;
  }
  return std::nullopt;
}

std::string_view ToString(Key k) {
  switch (k) {
    case Key::kHome: return "HOME";
    case Key::kBack: return "BACK";
    case Key::kEnter: return "ENTER";
    case Key::kOther: return "OTHER";
  }
  return "?";
}

std::string_view ToString(TerminateStatus s) {
  switch (s) {
    case TerminateStatus::kSuccess: return "success";
    case TerminateStatus::kFailure: return "failure";
    case TerminateStatus::kSatisfied: return "satisfied";
    case TerminateStatus::kImpossible: return "impossible";
    case TerminateStatus::kInterrupt: return "interrupt";
    case TerminateStatus::kNeedFeedback: return "need_feedback";
  }
  return "?";
}

std::optional<TerminateStatus> TerminateStatusFromString(std::string_view name) {
  for (TerminateStatus s : {TerminateStatus::kSuccess, TerminateStatus::kFailure,
                            TerminateStatus::kSatisfied, TerminateStatus::kImpossible,
                            TerminateStatus::kInterrupt, TerminateStatus::kNeedFeedback}) {
    if (ToString(s) == name) return s;
  }
  return std::nullopt;
}

}  // namespace gapdx
