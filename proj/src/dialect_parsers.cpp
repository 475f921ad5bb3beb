/// @file dialect_parsers.cpp
/// @brief Parsers for the three recorded agent output dialects.

#include <cctype>
#include <cmath>
#include <string>
#include <vector>

#include "gapdx/errors.h"
#include "gapdx/text_util.h"
#include "gapdx/trace.h"

namespace gapdx {

using json = nlohmann::json;

namespace {

constexpr const char* kAgentCpm = "agentcpm_json";
constexpr const char* kUiTars = "uitars_dsl";
constexpr const char* kGuiOwl = "guiowl_toolcall";

// AgentCPM's schema default duration; a POINT held longer is a long press.
constexpr std::int64_t kAgentCpmTapDurationMs = 200;
constexpr double kMaxSeconds = 1.0e9;

std::size_t FirstNonSpace(std::string_view s, std::size_t from = 0) {
  while (from < s.size() && std::isspace(static_cast<unsigned char>(s[from]))) ++from;
  return from;
}

// ---------------------------------------------------------------------------
// AgentCPM
// ---------------------------------------------------------------------------

struct JsonSlice {
  std::string_view text;
  std::size_t offset = 0;  // position of `text` within the raw output
};

// Accepts the bare object, optionally wrapped in a ```json fence.
JsonSlice LocateAgentCpmJson(std::string_view raw) {
  std::size_t begin = FirstNonSpace(raw);
  std::size_t end = raw.size();
  while (end > begin && std::isspace(static_cast<unsigned char>(raw[end - 1]))) --end;
  std::string_view body = raw.substr(begin, end - begin);
  if (text::StartsWith(body, "```")) {
    const std::size_t newline = body.find('\n');
    if (newline == std::string_view::npos) throw ParseError(kAgentCpm, begin, "unterminated code fence");
    std::size_t close = body.rfind("```");
    if (close <= newline) close = body.size();
    begin += newline + 1;
    body = raw.substr(begin, close - newline - 1);
    const std::size_t lead = FirstNonSpace(body);
    begin += lead;
    body = body.substr(lead);
  }
  if (body.empty() || body.front() != '{') {
    throw ParseError(kAgentCpm, begin, "expected a JSON object");
  }
  return {body, begin};
}

Point AgentCpmLocation(const json& v, const char* field) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ParseError(kAgentCpm, 0, std::string("field '") + field + "' must be [x, y]");
  }
  return NormalizePoint(v[0].get<double>(), v[1].get<double>(), CoordSpace::kPerMille);
}

std::optional<Key> NamedKey(std::string_view name) {
  std::string lowered = text::AsciiLower(text::Trim(name));
  if (text::StartsWith(lowered, "keycode_")) lowered = lowered.substr(8);
  if (lowered == "home") return Key::kHome;
  if (lowered == "back") return Key::kBack;
  if (lowered == "enter") return Key::kEnter;
  return std::nullopt;
}

PressKey MakePressKey(std::string_view name) {
  if (auto key = NamedKey(name)) return PressKey{*key, ""};
  return PressKey{Key::kOther, std::string(name)};
}

std::int64_t SecondsToMs(double seconds, const char* dialect) {
  if (!std::isfinite(seconds) || seconds < 0 || seconds > kMaxSeconds) {
    throw ParseError(dialect, 0, "time out of range");
  }
  return static_cast<std::int64_t>(std::llround(seconds * 1000.0));
}

// ---------------------------------------------------------------------------
// UI-TARS call DSL
// ---------------------------------------------------------------------------

struct CallArgument {
  std::string name;
  std::string value;
  std::size_t offset = 0;
};

struct ParsedCall {
  std::string name;
  std::size_t name_offset = 0;
  std::vector<CallArgument> args;

  const CallArgument* Find(std::initializer_list<std::string_view> names) const {
    for (const auto& arg : args) {
      for (auto n : names) {
        if (arg.name == n) return &arg;
      }
    }
    return nullptr;
  }
};

bool IsIdentChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Python-style quoted literal starting at `pos` (the quote). Advances pos past
// the closing quote.
std::string ReadQuoted(std::string_view s, std::size_t& pos) {
  const char quote = s[pos];
  const std::size_t start = pos;
  ++pos;
  std::string out;
  while (pos < s.size()) {
    const char c = s[pos];
    if (c == '\\' && pos + 1 < s.size()) {
      const char next = s[pos + 1];
      switch (next) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '\\': out.push_back('\\'); break;
        case '\'': out.push_back('\''); break;
        case '"': out.push_back('"'); break;
        default:
          out.push_back('\\');
          out.push_back(next);
      }
      pos += 2;
      continue;
    }
    if (c == quote) {
      ++pos;
      return out;
    }
    out.push_back(c);
    ++pos;
  }
  throw ParseError(kUiTars, start, "unterminated string literal");
}

ParsedCall ParseCall(std::string_view s, std::size_t pos) {
  ParsedCall call;
  pos = FirstNonSpace(s, pos);
  call.name_offset = pos;
  while (pos < s.size() && IsIdentChar(s[pos])) call.name.push_back(s[pos++]);
  if (call.name.empty()) throw ParseError(kUiTars, pos, "expected an action call");
  pos = FirstNonSpace(s, pos);
  if (pos >= s.size() || s[pos] != '(') throw ParseError(kUiTars, pos, "expected '(' after action name");
  ++pos;
  while (true) {
    pos = FirstNonSpace(s, pos);
    if (pos >= s.size()) throw ParseError(kUiTars, pos, "unterminated argument list");
    if (s[pos] == ')') {
      ++pos;
      break;
    }
    CallArgument arg;
    arg.offset = pos;
    while (pos < s.size() && IsIdentChar(s[pos])) arg.name.push_back(s[pos++]);
    if (arg.name.empty()) throw ParseError(kUiTars, pos, "expected argument name");
    pos = FirstNonSpace(s, pos);
    if (pos >= s.size() || s[pos] != '=') throw ParseError(kUiTars, pos, "expected '=' after argument name");
    pos = FirstNonSpace(s, pos + 1);
    if (pos >= s.size() || (s[pos] != '\'' && s[pos] != '"')) {
      throw ParseError(kUiTars, pos, "argument value must be a quoted string");
    }
    arg.value = ReadQuoted(s, pos);
    call.args.push_back(std::move(arg));
    pos = FirstNonSpace(s, pos);
    if (pos < s.size() && s[pos] == ',') ++pos;
  }
  pos = FirstNonSpace(s, pos);
  if (pos != s.size()) throw ParseError(kUiTars, pos, "unexpected content after action call");
  return call;
}

// Accepts "<point>x y</point>", "(x,y)", "<|box_start|>(x,y)<|box_end|>", and
// four-number boxes (centre taken).
Point ParsePointLiteral(const CallArgument& arg, const std::optional<ScreenGeometry>& geometry) {
  std::string body = arg.value;
  for (std::string_view wrapper : {"<point>", "</point>", "<|box_start|>", "<|box_end|>"}) {
    for (std::size_t at; (at = body.find(wrapper)) != std::string::npos;) body.erase(at, wrapper.size());
  }
  std::vector<double> numbers;
  std::size_t i = 0;
  while (i < body.size()) {
    const char c = body[i];
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '(' || c == ')' || c == '[' ||
        c == ']') {
      ++i;
      continue;
    }
    std::size_t used = 0;
    double value = 0;
    try {
      value = std::stod(body.substr(i), &used);
    } catch (const std::exception&) {
      throw ParseError(kUiTars, arg.offset, "malformed point literal '" + arg.value + "'");
    }
    numbers.push_back(value);
    i += used;
  }
  if (numbers.size() == 4) {
    return NormalizePoint((numbers[0] + numbers[2]) / 2, (numbers[1] + numbers[3]) / 2,
                          CoordSpace::kPixels, geometry);
  }
  if (numbers.size() != 2) {
    throw ParseError(kUiTars, arg.offset, "malformed point literal '" + arg.value + "'");
  }
  return NormalizePoint(numbers[0], numbers[1], CoordSpace::kPixels, geometry);
}

const CallArgument& RequireArg(const ParsedCall& call, std::initializer_list<std::string_view> names) {
  if (const CallArgument* arg = call.Find(names)) return *arg;
  throw ParseError(kUiTars, call.name_offset,
                   call.name + "() is missing argument '" + std::string(*names.begin()) + "'");
}

std::string UiTarsThought(std::string_view raw, std::size_t action_pos) {
  std::string_view head = raw.substr(0, action_pos);
  const std::size_t thought = head.find("Thought:");
  if (thought == std::string_view::npos) return "";
  return text::Trim(head.substr(thought + 8));
}

// ---------------------------------------------------------------------------
// GUI-Owl
// ---------------------------------------------------------------------------

std::optional<std::string> TaggedBlock(std::string_view raw, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  const std::size_t begin = raw.find(open);
  if (begin == std::string_view::npos) return std::nullopt;
  const std::size_t content = begin + open.size();
  std::size_t end = raw.find(close, content);
  if (end == std::string_view::npos) end = raw.size();
  return text::Trim(raw.substr(content, end - content));
}

std::string GuiOwlCot(std::string_view raw, const GuiOwlOptions& options) {
  auto thinking = TaggedBlock(raw, "thinking");
  std::string cot;
  if (thinking) {
    cot = *thinking;
  } else {
    const std::size_t call = raw.find("<tool_call>");
    cot = text::Trim(raw.substr(0, call == std::string_view::npos ? raw.size() : call));
  }
  if (options.include_conclusion) {
    if (auto conclusion = TaggedBlock(raw, "conclusion"); conclusion && !conclusion->empty()) {
      cot = cot.empty() ? *conclusion : cot + "\n\n" + *conclusion;
    }
  }
  return cot;
}

Point GuiOwlCoordinate(const json& args, const char* field, const std::optional<ScreenGeometry>& geometry,
                       std::size_t offset) {
  auto it = args.find(field);
  if (it == args.end() || !it->is_array() || it->size() != 2 || !(*it)[0].is_number() ||
      !(*it)[1].is_number()) {
    throw ParseError(kGuiOwl, offset, std::string("argument '") + field + "' must be [x, y]");
  }
  return NormalizePoint((*it)[0].get<double>(), (*it)[1].get<double>(), CoordSpace::kPixels, geometry);
}

std::string GuiOwlText(const json& args, const char* field, std::size_t offset) {
  auto it = args.find(field);
  if (it == args.end() || !it->is_string()) {
    throw ParseError(kGuiOwl, offset, std::string("argument '") + field + "' must be a string");
  }
  return it->get<std::string>();
}

std::optional<double> GuiOwlSeconds(const json& args, std::size_t offset) {
  auto it = args.find("time");
  if (it == args.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ParseError(kGuiOwl, offset, "argument 'time' must be a number");
  return it->get<double>();
}

}  // namespace

ParsedOutput ParseAgentCpm(std::string_view raw, const std::optional<ScreenGeometry>& /*geometry*/) {
  const JsonSlice slice = LocateAgentCpmJson(raw);
  json j;
  try {
    j = json::parse(slice.text);
  } catch (const json::parse_error& e) {
    throw ParseError(kAgentCpm, slice.offset + (e.byte > 0 ? e.byte - 1 : 0), e.what());
  } catch (const json::exception& e) {
    throw ParseError(kAgentCpm, slice.offset, e.what());
  }
  if (!j.is_object()) throw ParseError(kAgentCpm, slice.offset, "expected a JSON object");

  ParsedOutput out{"", Wait{}};
  if (auto it = j.find("thought"); it != j.end()) {
    if (!it->is_string()) throw ParseError(kAgentCpm, slice.offset, "'thought' must be a string");
    out.cot = it->get<std::string>();
  }

  std::optional<std::int64_t> duration;
  if (auto it = j.find("duration"); it != j.end()) {
    if (!it->is_number()) throw ParseError(kAgentCpm, slice.offset, "'duration' must be an integer");
    const double d = it->get<double>();
    if (!std::isfinite(d) || d < 0 || d > kMaxSeconds * 1000) {
      throw ParseError(kAgentCpm, slice.offset, "'duration' out of range");
    }
    duration = static_cast<std::int64_t>(std::llround(d));
  }

  std::optional<Terminate> terminal;
  if (auto it = j.find("STATUS"); it != j.end()) {
    if (!it->is_string()) throw ParseError(kAgentCpm, slice.offset, "'STATUS' must be a string");
    const std::string status = it->get<std::string>();
    if (status == "finish") {
      terminal = Terminate{TerminateStatus::kSuccess, std::nullopt};
    } else if (status != "continue") {
      auto mapped = TerminateStatusFromString(status);
      if (!mapped || *mapped == TerminateStatus::kSuccess || *mapped == TerminateStatus::kFailure) {
        throw ParseError(kAgentCpm, slice.offset, "unknown STATUS '" + status + "'");
      }
      terminal = Terminate{*mapped, std::nullopt};
    }
  }

  auto swipe_target = [&](Swipe& swipe) {
    const json& to = j.at("to");
    if (to.is_string()) {
      swipe.direction = DirectionFromString(to.get<std::string>());
      if (!swipe.direction) {
        throw ParseError(kAgentCpm, slice.offset, "unknown direction '" + to.get<std::string>() + "'");
      }
    } else {
      swipe.destination = AgentCpmLocation(to, "to");
    }
  };

  if (auto it = j.find("POINT"); it != j.end()) {
    const Point point = AgentCpmLocation(*it, "POINT");
    if (j.contains("to")) {
      Swipe swipe;
      swipe.origin = point;
      swipe_target(swipe);
      out.action = swipe;
    } else if (duration && *duration > kAgentCpmTapDurationMs) {
      out.action = LongPress{point, duration};
    } else {
      out.action = Click{point};
    }
  } else if (j.contains("to")) {
    Swipe swipe;
    swipe_target(swipe);
    out.action = swipe;
  } else if (auto press = j.find("PRESS"); press != j.end()) {
    if (!press->is_string()) throw ParseError(kAgentCpm, slice.offset, "'PRESS' must be a string");
    out.action = MakePressKey(press->get<std::string>());
  } else if (auto type = j.find("TYPE"); type != j.end()) {
    if (!type->is_string()) throw ParseError(kAgentCpm, slice.offset, "'TYPE' must be a string");
    out.action = TypeText{type->get<std::string>()};
  } else if (auto open = j.find("OPEN"); open != j.end()) {
    if (!open->is_string()) throw ParseError(kAgentCpm, slice.offset, "'OPEN' must be a string");
    out.action = Open{open->get<std::string>()};
  } else if (terminal) {
    out.action = *terminal;
  } else if (duration) {
    out.action = Wait{duration};
  } else {
    throw EmptyActionError("agentcpm_json output carries no action field");
  }
  return out;
}

ParsedOutput ParseUiTars(std::string_view raw, const std::optional<ScreenGeometry>& geometry) {
  const std::size_t action_pos = raw.rfind("Action:");
  if (action_pos == std::string_view::npos) {
    throw ParseError(kUiTars, raw.size(), "missing 'Action:' section");
  }
  ParsedOutput out{UiTarsThought(raw, action_pos), Wait{}};
  const ParsedCall call = ParseCall(raw, action_pos + 7);

  if (call.name == "click") {
    out.action = Click{ParsePointLiteral(RequireArg(call, {"point", "start_box"}), geometry)};
  } else if (call.name == "long_press") {
    out.action = LongPress{ParsePointLiteral(RequireArg(call, {"point", "start_box"}), geometry), std::nullopt};
  } else if (call.name == "type") {
    out.action = TypeText{RequireArg(call, {"content"}).value};
  } else if (call.name == "scroll") {
    Swipe swipe;
    if (const CallArgument* point = call.Find({"point", "start_box"})) {
      swipe.origin = ParsePointLiteral(*point, geometry);
    }
    const CallArgument& dir = RequireArg(call, {"direction"});
    swipe.direction = DirectionFromString(text::AsciiLower(text::Trim(dir.value)));
    if (!swipe.direction) throw ParseError(kUiTars, dir.offset, "unknown direction '" + dir.value + "'");
    out.action = swipe;
  } else if (call.name == "press_home") {
    out.action = PressKey{Key::kHome, ""};
  } else if (call.name == "press_back") {
    out.action = PressKey{Key::kBack, ""};
  } else if (call.name == "finished") {
    Terminate t{TerminateStatus::kSuccess, std::nullopt};
    if (const CallArgument* content = call.Find({"content"})) t.message = content->value;
    out.action = t;
  } else {
    throw UnknownActionError(call.name);
  }
  return out;
}

ParsedOutput ParseGuiOwl(std::string_view raw, const std::optional<ScreenGeometry>& geometry,
                         const GuiOwlOptions& options) {
  constexpr std::string_view kOpen = "<tool_call>";
  constexpr std::string_view kClose = "</tool_call>";
  const std::size_t open = raw.find(kOpen);
  if (open == std::string_view::npos) throw ParseError(kGuiOwl, raw.size(), "missing <tool_call> block");
  if (raw.find(kOpen, open + kOpen.size()) != std::string_view::npos) {
    throw AmbiguousActionError("guiowl_toolcall output holds more than one <tool_call> block");
  }
  const std::size_t body_begin = open + kOpen.size();
  const std::size_t close = raw.find(kClose, body_begin);
  if (close == std::string_view::npos) throw ParseError(kGuiOwl, raw.size(), "unterminated <tool_call> block");

  const std::string_view body = raw.substr(body_begin, close - body_begin);
  json call;
  try {
    call = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ParseError(kGuiOwl, body_begin + (e.byte > 0 ? e.byte - 1 : 0), e.what());
  } catch (const json::exception& e) {
    throw ParseError(kGuiOwl, body_begin, e.what());
  }
  if (!call.is_object()) throw ParseError(kGuiOwl, body_begin, "tool call must be a JSON object");
  auto args_it = call.find("arguments");
  if (args_it == call.end()) throw ParseError(kGuiOwl, body_begin, "tool call has no 'arguments'");
  json args = *args_it;
  if (args.is_string()) {
    try {
      args = json::parse(args.get<std::string>());
    } catch (const json::exception&) {
      throw ParseError(kGuiOwl, body_begin, "'arguments' string is not valid JSON");
    }
  }
  if (!args.is_object()) throw ParseError(kGuiOwl, body_begin, "invalid arguments object");
  const std::string action = GuiOwlText(args, "action", body_begin);

  ParsedOutput out{GuiOwlCot(raw, options), Wait{}};
  if (action == "click") {
    out.action = Click{GuiOwlCoordinate(args, "coordinate", geometry, body_begin)};
  } else if (action == "long_press") {
    LongPress lp{GuiOwlCoordinate(args, "coordinate", geometry, body_begin), std::nullopt};
    if (auto secs = GuiOwlSeconds(args, body_begin)) lp.duration_ms = SecondsToMs(*secs, kGuiOwl);
    out.action = lp;
  } else if (action == "swipe") {
    // Direction is taken from the pixel displacement, before per-mille rounding.
    const json& from = args.value("coordinate", json());
    const json& to = args.value("coordinate2", json());
    Swipe swipe;
    swipe.origin = GuiOwlCoordinate(args, "coordinate", geometry, body_begin);
    swipe.destination = GuiOwlCoordinate(args, "coordinate2", geometry, body_begin);
    swipe.direction = DirectionFromDelta(to[0].get<double>() - from[0].get<double>(),
                                         to[1].get<double>() - from[1].get<double>());
    out.action = swipe;
  } else if (action == "type") {
    out.action = TypeText{GuiOwlText(args, "text", body_begin)};
  } else if (action == "system_button") {
    out.action = MakePressKey(GuiOwlText(args, "button", body_begin));
  } else if (action == "key") {
    out.action = MakePressKey(GuiOwlText(args, "text", body_begin));
  } else if (action == "open") {
    out.action = Open{GuiOwlText(args, "text", body_begin)};
  } else if (action == "wait") {
    Wait wait;
    if (auto secs = GuiOwlSeconds(args, body_begin)) wait.duration_ms = SecondsToMs(*secs, kGuiOwl);
    out.action = wait;
  } else if (action == "terminate") {
    const std::string status = GuiOwlText(args, "status", body_begin);
    auto mapped = TerminateStatusFromString(text::AsciiLower(status));
    if (!mapped) throw ParseError(kGuiOwl, body_begin, "unknown terminate status '" + status + "'");
    out.action = Terminate{*mapped, std::nullopt};
  } else {
    throw UnknownActionError(action);
  }
  return out;
}

ParsedOutput ParseDialect(TraceDialect dialect, std::string_view raw,
                          const std::optional<ScreenGeometry>& geometry, const GuiOwlOptions& options) {
  switch (dialect) {
    case TraceDialect::kAgentCpmJson:
      return ParseAgentCpm(raw, geometry);
    case TraceDialect::kUiTarsDsl:
      return ParseUiTars(raw, geometry);
    case TraceDialect::kGuiOwlToolCall:
      return ParseGuiOwl(raw, geometry, options);
  }
  throw ConfigError("unknown dialect");
}

std::string ExtractCot(TraceDialect dialect, std::string_view raw, const GuiOwlOptions& options) {
  switch (dialect) {
    case TraceDialect::kAgentCpmJson: {
      try {
        const JsonSlice slice = LocateAgentCpmJson(raw);
        const json j = json::parse(slice.text, nullptr, false);
        if (j.is_object()) {
          if (auto it = j.find("thought"); it != j.end() && it->is_string()) return it->get<std::string>();
        }
      } catch (const std::exception&) {
      }
      return "";
    }
    case TraceDialect::kUiTarsDsl: {
      const std::size_t action_pos = raw.rfind("Action:");
      return UiTarsThought(raw, action_pos == std::string_view::npos ? raw.size() : action_pos);
    }
    case TraceDialect::kGuiOwlToolCall:
      return GuiOwlCot(raw, options);
  }
  return "";
}

}  // namespace gapdx
