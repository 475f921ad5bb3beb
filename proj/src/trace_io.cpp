/// @file trace_io.cpp
/// @brief Run loading (trace + manifest join) and history reconstruction.

#include <algorithm>
#include <map>

#include "gapdx/errors.h"
#include "gapdx/jsonl.h"
#include "gapdx/trace.h"

namespace gapdx {

using json = nlohmann::json;

namespace {

std::string Where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

StepKey ReadKey(const json& j, const std::filesystem::path& path, std::size_t line) {
  if (!j.is_object()) throw JoinError(Where(path, line) + ": line is not a JSON object");
  auto ep = j.find("episode_id");
  auto st = j.find("step_id");
  if (ep == j.end() || st == j.end()) {
    throw JoinError(Where(path, line) + ": missing episode_id or step_id");
  }
  StepKey key;
  if (ep->is_string()) {
    key.episode_id = ep->get<std::string>();
  } else if (ep->is_number_integer()) {
    key.episode_id = std::to_string(ep->get<std::int64_t>());
  } else {
    throw JoinError(Where(path, line) + ": episode_id must be a string or integer");
  }
  if (!st->is_number_integer() || st->get<std::int64_t>() < 0) {
    throw JoinError(Where(path, line) + ": step_id must be a non-negative integer");
  }
  key.step_id = st->get<std::int64_t>();
  return key;
}

std::optional<ScreenGeometry> ReadGeometry(const json& j, const std::filesystem::path& path,
                                           std::size_t line) {
  auto w = j.find("width");
  auto h = j.find("height");
  if (w == j.end() || h == j.end() || w->is_null() || h->is_null()) return std::nullopt;
  if (!w->is_number_integer() || !h->is_number_integer()) {
    throw CoordinateSpaceError(Where(path, line) + ": width/height must be integers");
  }
  try {
    return ScreenGeometry(w->get<int>(), h->get<int>());
  } catch (const CoordinateSpaceError& e) {
    throw CoordinateSpaceError(Where(path, line) + ": " + e.what());
  }
}

std::string OptionalString(const json& j, const char* field) {
  auto it = j.find(field);
  return (it != j.end() && it->is_string()) ? it->get<std::string>() : std::string();
}

std::string ResolveScreenshot(const std::string& ref, const std::filesystem::path& data_root) {
  if (ref.empty() || data_root.empty()) return ref;
  if (ref.find("://") != std::string::npos) return ref;
  const std::filesystem::path p(ref);
  if (p.is_absolute()) return ref;
  return (data_root / p).lexically_normal().string();
}

GroundTruthStep ReadManifestLine(const JsonLine& line, const std::filesystem::path& path) {
  const json& j = line.value;
  GroundTruthStep step;
  step.key = ReadKey(j, path, line.line_number);
  step.instruction = OptionalString(j, "instruction");
  step.screenshot_ref = OptionalString(j, "screenshot");
  step.geometry = ReadGeometry(j, path, line.line_number);

  CoordSpace space = CoordSpace::kPerMille;
  const std::string space_name = OptionalString(j, "coord_space");
  if (space_name == "pixels") {
    space = CoordSpace::kPixels;
  } else if (!space_name.empty() && space_name != "per_mille") {
    throw CoordinateSpaceError(Where(path, line.line_number) + ": unknown coord_space '" + space_name + "'");
  }

  auto gt = j.find("gt_action");
  if (gt == j.end()) throw ParseError("manifest", 0, Where(path, line.line_number) + ": missing gt_action");
  try {
    json gt_json = *gt;
    if (gt_json.is_string()) gt_json = json::parse(gt_json.get<std::string>());
    step.gt_action = ActionFromJson(gt_json, space, step.geometry);

    if (auto bbox = j.find("gt_bbox"); bbox != j.end() && !bbox->is_null()) {
      if (!bbox->is_array() || bbox->size() != 4) {
        throw ParseError("manifest", 0, "gt_bbox must be [left, top, right, bottom]");
      }
      for (const auto& v : *bbox) {
        if (!v.is_number()) throw ParseError("manifest", 0, "gt_bbox entries must be numbers");
      }
      const Point tl = NormalizePoint((*bbox)[0].get<double>(), (*bbox)[1].get<double>(), space, step.geometry);
      const Point br = NormalizePoint((*bbox)[2].get<double>(), (*bbox)[3].get<double>(), space, step.geometry);
      if (tl.x > br.x || tl.y > br.y) throw ParseError("manifest", 0, "gt_bbox corners are inverted");
      step.gt_bbox = BBox{tl.x, tl.y, br.x, br.y};
      if (const auto* click = std::get_if<Click>(&step.gt_action); click && !step.gt_bbox->Contains(click->point)) {
        throw InvalidAction("gt_bbox does not contain the ground-truth click point");
      }
    }
  } catch (const json::parse_error& e) {
    throw ParseError("manifest", e.byte, Where(path, line.line_number) + ": gt_action: " + e.what());
  } catch (const Error& e) {
    e.RethrowWithContext(Where(path, line.line_number));
  }
  return step;
}

}  // namespace

std::string ToString(const StepKey& key) {
  return key.episode_id + "#" + std::to_string(key.step_id);
}

json KeyToJson(const StepKey& key) {
  return json{{"episode_id", key.episode_id}, {"step_id", key.step_id}};
}

StepKey KeyFromJson(const json& j) {
  if (!j.is_object() || !j.contains("episode_id") || !j.contains("step_id") ||
      !j["episode_id"].is_string() || !j["step_id"].is_number_integer()) {
    throw ParseError("key", 0, "key must be {episode_id: string, step_id: integer}");
  }
  return StepKey{j["episode_id"].get<std::string>(), j["step_id"].get<std::int64_t>()};
}

std::string_view ToString(TraceDialect d) {
  switch (d) {
    case TraceDialect::kAgentCpmJson: return "agentcpm_json";
    case TraceDialect::kUiTarsDsl: return "uitars_dsl";
    case TraceDialect::kGuiOwlToolCall: return "guiowl_toolcall";
  }
  return "?";
}

std::optional<TraceDialect> DialectFromString(std::string_view name) {
  for (TraceDialect d : {TraceDialect::kAgentCpmJson, TraceDialect::kUiTarsDsl, TraceDialect::kGuiOwlToolCall}) {
    if (ToString(d) == name) return d;
  }
  return std::nullopt;
}

HistoryContext ReconstructHistory(std::span<const StepRecord> prior, TraceDialect family) {
  switch (family) {
    case TraceDialect::kAgentCpmJson:
      return EmptyHistory{};
    case TraceDialect::kUiTarsDsl: {
      DialogueTriples history;
      history.max_len = kUiTarsHistoryLength;
      const std::size_t skip = prior.size() > kUiTarsHistoryLength ? prior.size() - kUiTarsHistoryLength : 0;
      for (const StepRecord& r : prior.subspan(skip)) {
        history.triples.push_back({r.screenshot_ref, r.cot, r.predicted_action});
      }
      return history;
    }
    case TraceDialect::kGuiOwlToolCall: {
      std::string summary;
      for (std::size_t i = 0; i < prior.size(); ++i) {
        if (i > 0) summary += "\n";
        const auto& action = prior[i].predicted_action;
        summary += std::to_string(i + 1) + ". " +
                   (action ? DescribeAction(*action) : std::string("(unparseable output)"));
      }
      return CompressedSummary{summary};
    }
  }
  return EmptyHistory{};
}

std::vector<GroundTruthStep> LoadManifest(const std::filesystem::path& manifest_path) {
  std::vector<GroundTruthStep> steps;
  std::map<StepKey, std::size_t> seen;
  for (const JsonLine& line : ReadJsonLines(manifest_path)) {
    GroundTruthStep step = ReadManifestLine(line, manifest_path);
    if (auto [it, inserted] = seen.emplace(step.key, line.line_number); !inserted) {
      throw DuplicateKeyError(Where(manifest_path, line.line_number) + ": key " + ToString(step.key) +
                              " already defined on line " + std::to_string(it->second));
    }
    steps.push_back(std::move(step));
  }
  std::sort(steps.begin(), steps.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return steps;
}

std::vector<StepRecord> LoadRun(const std::filesystem::path& trace_path, TraceDialect dialect,
                                const std::filesystem::path& manifest_path, const LoadOptions& options) {
  const std::vector<GroundTruthStep> manifest = LoadManifest(manifest_path);
  std::map<StepKey, const GroundTruthStep*> by_key;
  for (const auto& step : manifest) by_key.emplace(step.key, &step);

  struct TraceEntry {
    std::size_t line = 0;
    std::string raw;
    std::string screenshot;
    std::optional<ScreenGeometry> geometry;
  };
  std::map<StepKey, TraceEntry> trace;
  for (const JsonLine& line : ReadJsonLines(trace_path)) {
    const StepKey key = ReadKey(line.value, trace_path, line.line_number);
    if (!by_key.contains(key)) {
      throw JoinError(Where(trace_path, line.line_number) + ": key " + ToString(key) + " is not in the manifest");
    }
    auto raw = line.value.find("raw_output");
    if (raw == line.value.end() || !raw->is_string()) {
      throw ParseError("trace", 0, Where(trace_path, line.line_number) + ": raw_output must be a string");
    }
    TraceEntry entry{line.line_number, raw->get<std::string>(), OptionalString(line.value, "screenshot"),
                     ReadGeometry(line.value, trace_path, line.line_number)};
    if (auto [it, inserted] = trace.emplace(key, std::move(entry)); !inserted) {
      throw DuplicateKeyError(Where(trace_path, line.line_number) + ": key " + ToString(key) +
                              " already defined on line " + std::to_string(it->second.line));
    }
  }

  std::vector<StepRecord> records;
  records.reserve(manifest.size());
  std::size_t episode_begin = 0;
  for (const GroundTruthStep& gt : manifest) {
    if (!records.empty() && records.back().key.episode_id != gt.key.episode_id) {
      episode_begin = records.size();
    }
    StepRecord record;
    record.key = gt.key;
    record.instruction = gt.instruction;
    record.gt_action = gt.gt_action;
    record.gt_bbox = gt.gt_bbox;
    record.geometry = gt.geometry;
    record.screenshot_ref = gt.screenshot_ref;

    auto it = trace.find(gt.key);
    if (it == trace.end()) {
      record.diagnostic = "missing_prediction";
    } else {
      const TraceEntry& entry = it->second;
      if (entry.geometry) record.geometry = entry.geometry;
      if (!entry.screenshot.empty()) record.screenshot_ref = entry.screenshot;
      record.predicted_raw = entry.raw;
      try {
        ParsedOutput parsed = ParseDialect(dialect, entry.raw, record.geometry, options.guiowl);
        record.cot = std::move(parsed.cot);
        record.predicted_action = std::move(parsed.action);
      } catch (const Error& e) {
        record.cot = ExtractCot(dialect, entry.raw, options.guiowl);
        record.diagnostic = e.name() + ": " + e.what();
      }
    }
    record.screenshot_ref = ResolveScreenshot(record.screenshot_ref, options.data_root);
    record.history = ReconstructHistory(
        std::span<const StepRecord>(records.data() + episode_begin, records.size() - episode_begin), dialect);
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace gapdx
