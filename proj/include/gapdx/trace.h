/// @file trace.h
/// @brief Recorded agent outputs: dialect parsers, run loading, history contracts.

#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gapdx/action.h"

namespace gapdx {

/// (episode_id, step_id): the join key shared by traces, manifests, key lists
/// and annotations.
struct StepKey {
  std::string episode_id;
  std::int64_t step_id = 0;

  auto operator<=>(const StepKey&) const = default;
  bool operator==(const StepKey&) const = default;
};

std::string ToString(const StepKey& key);
nlohmann::json KeyToJson(const StepKey& key);
StepKey KeyFromJson(const nlohmann::json& j);

/// Axis-aligned target bounds on the per-mille grid, edges inclusive.
struct BBox {
  int left = 0;
  int top = 0;
  int right = 0;
  int bottom = 0;

  bool Contains(const Point& p) const {
    return p.x >= left && p.x <= right && p.y >= top && p.y <= bottom;
  }
  bool operator==(const BBox&) const = default;
};

struct EmptyHistory {
  bool operator==(const EmptyHistory&) const = default;
};

struct HistoryTriple {
  std::string screenshot_ref;
  std::string cot;
  std::optional<CanonicalAction> action;  // absent when that step failed to parse
  bool operator==(const HistoryTriple&) const = default;
};

/// Most recent steps, oldest first, at most max_len of them.
struct DialogueTriples {
  std::vector<HistoryTriple> triples;
  int max_len = 4;
  bool operator==(const DialogueTriples&) const = default;
};

struct CompressedSummary {
  std::string summary;
  bool operator==(const CompressedSummary&) const = default;
};

using HistoryContext = std::variant<EmptyHistory, DialogueTriples, CompressedSummary>;

enum class TraceDialect { kAgentCpmJson, kUiTarsDsl, kGuiOwlToolCall };

std::string_view ToString(TraceDialect d);
std::optional<TraceDialect> DialectFromString(std::string_view name);

struct StepRecord {
  StepKey key;
  std::string instruction;
  std::string screenshot_ref;
  std::optional<ScreenGeometry> geometry;
  HistoryContext history;
  std::string cot;
  std::string predicted_raw;
  std::optional<CanonicalAction> predicted_action;
  CanonicalAction gt_action;
  std::optional<BBox> gt_bbox;
  /// Empty when the prediction parsed; otherwise the parser's error.
  std::string diagnostic;
};

struct ParsedOutput {
  std::string cot;
  CanonicalAction action;
};

struct GuiOwlOptions {
  /// Append the <conclusion> block to the CoT (blank line separated).
  bool include_conclusion = true;
};

/// AgentCPM compact-JSON output. Coordinates are already per-mille.
ParsedOutput ParseAgentCpm(std::string_view raw,
                           const std::optional<ScreenGeometry>& geometry = std::nullopt);

/// UI-TARS "Thought: ...\nAction: call(...)" output with pixel points. The
/// geometry is only needed once a point literal is reached.
ParsedOutput ParseUiTars(std::string_view raw, const std::optional<ScreenGeometry>& geometry);

/// GUI-Owl <thinking>/<tool_call>/<conclusion> output with pixel coordinates.
ParsedOutput ParseGuiOwl(std::string_view raw, const std::optional<ScreenGeometry>& geometry,
                         const GuiOwlOptions& options = {});

/// Dispatches on dialect. Pixel dialects without geometry throw
/// CoordinateSpaceError as soon as a coordinate is met.
ParsedOutput ParseDialect(TraceDialect dialect, std::string_view raw,
                          const std::optional<ScreenGeometry>& geometry,
                          const GuiOwlOptions& options = {});

/// Best-effort CoT recovery used when the action part fails to parse. Never throws.
std::string ExtractCot(TraceDialect dialect, std::string_view raw, const GuiOwlOptions& options = {});

/// History the given model family conditions on, rebuilt from the earlier
/// steps of the same episode (oldest first).
HistoryContext ReconstructHistory(std::span<const StepRecord> prior, TraceDialect family);

inline constexpr int kUiTarsHistoryLength = 4;

struct LoadOptions {
  GuiOwlOptions guiowl;
  /// Relative screenshot references are resolved against this directory.
  std::filesystem::path data_root;
};

/// Joins a JSONL trace with a JSONL dataset manifest.
///
/// Trace lines: {episode_id, step_id, raw_output, screenshot?, width?, height?}.
/// Manifest lines: {episode_id, step_id, instruction, gt_action, gt_bbox?,
/// screenshot?, width?, height?, coord_space?}.
/// Records come back sorted by (episode_id, step_id). Prediction parse failures
/// are kept with predicted_action absent and `diagnostic` set; manifest steps
/// with no trace line are kept the same way ("missing_prediction").
std::vector<StepRecord> LoadRun(const std::filesystem::path& trace_path, TraceDialect dialect,
                                const std::filesystem::path& manifest_path,
                                const LoadOptions& options = {});

/// Ground truth only (no predictions), used by the sampler and annotation server.
struct GroundTruthStep {
  StepKey key;
  std::string instruction;
  std::string screenshot_ref;
  std::optional<ScreenGeometry> geometry;
  CanonicalAction gt_action;
  std::optional<BBox> gt_bbox;
};

std::vector<GroundTruthStep> LoadManifest(const std::filesystem::path& manifest_path);

}  // namespace gapdx
