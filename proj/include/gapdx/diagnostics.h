/// @file diagnostics.h
/// @brief Step judgments, run summaries, annotation consensus, evaluator
/// reliability and report emission.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapdx/gta.h"
#include "gapdx/match.h"
#include "gapdx/trace.h"

namespace gapdx {

/// Q1 = (EM 1, GTA 1), Q2 = (0, 1), Q3 = (0, 0), Q4 = (1, 0).
enum class Quadrant { kQ1, kQ2, kQ3, kQ4 };

Quadrant QuadrantOf(int em, int gta);
std::string_view ToString(Quadrant q);

struct StepJudgment {
  StepKey key;
  int em = 0;
  std::string em_reason;
  std::optional<int> gta;  // absent in EM-only judgments
  std::string gta_reason;

  std::optional<Quadrant> quadrant() const;
  nlohmann::json ToJson() const;
  static StepJudgment FromJson(const nlohmann::json& j);
};

/// EM and GTA per record. Throws MissingVerdictError when a record has no
/// verdict; steps whose evaluator was unavailable must be removed first.
std::vector<StepJudgment> JudgeRun(const std::vector<StepRecord>& records,
                                   const std::map<StepKey, EvaluatorVerdict>& verdicts, const MatchPolicy& policy);

std::vector<StepJudgment> JudgeEmOnly(const std::vector<StepRecord>& records, const MatchPolicy& policy);

struct QuadrantCounts {
  std::uint64_t q1 = 0;
  std::uint64_t q2 = 0;
  std::uint64_t q3 = 0;
  std::uint64_t q4 = 0;

  std::uint64_t total() const { return q1 + q2 + q3 + q4; }
  bool operator==(const QuadrantCounts&) const = default;
};

/// Exact step counts behind every rate. Rates are count / n_steps.
struct RunSummary {
  std::uint64_t n_steps = 0;
  std::uint64_t em_count = 0;
  bool has_gta = false;
  QuadrantCounts quadrants;  // valid when has_gta
  /// Steps left out of both denominators because the evaluator was unreachable.
  std::uint64_t excluded = 0;
  std::string policy_hash;
  std::string prompt_version;
  std::string prompt_hash;

  std::uint64_t gta_count() const { return quadrants.q1 + quadrants.q2; }
  std::uint64_t ideal_count() const { return quadrants.q1; }
  std::uint64_t eg_count() const { return quadrants.q2; }
  std::uint64_t rg_count() const { return quadrants.q4; }
  std::uint64_t both_wrong_count() const { return quadrants.q3; }

  double em() const { return Rate(em_count); }
  double gta() const { return Rate(gta_count()); }
  double ideal() const { return Rate(ideal_count()); }
  double eg() const { return Rate(eg_count()); }
  double rg() const { return Rate(rg_count()); }
  double both_wrong() const { return Rate(both_wrong_count()); }

  nlohmann::json ToJson() const;
  static RunSummary FromJson(const nlohmann::json& j);
  bool operator==(const RunSummary&) const = default;

 private:
  double Rate(std::uint64_t count) const {
    return n_steps == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(n_steps);
  }
};

/// Throws EmptyRunError on an empty list.
RunSummary Summarize(const std::vector<StepJudgment>& judgments, const std::string& policy_hash,
                     const std::string& prompt_version = "", const std::string& prompt_hash = "");

/// count / n rounded half up to `decimals` places, as text. Exact integer
/// arithmetic, so display values never depend on floating-point formatting.
std::string FormatRatio(std::uint64_t count, std::uint64_t n, int decimals);
/// 100 * count / n with two decimals.
std::string FormatPercent(std::uint64_t count, std::uint64_t n);

// ---------------------------------------------------------------------------
// Human annotation
// ---------------------------------------------------------------------------

enum class Label { kOne, kZero, kNa };

std::string_view ToString(Label label);
std::optional<Label> LabelFromString(std::string_view text);

struct AnnotationRecord {
  StepKey key;
  std::string annotator_id;
  Label label = Label::kNa;
  std::string timestamp;

  nlohmann::json ToJson() const;
  static AnnotationRecord FromJson(const nlohmann::json& j);
  bool operator==(const AnnotationRecord&) const = default;
};

enum class DiscardReason { kNaPresent, kDisagreement, kIncomplete };

std::string_view ToString(DiscardReason reason);

struct ConsensusSet {
  std::map<StepKey, int> consensus;  // label 0 or 1
  std::map<StepKey, DiscardReason> discarded;

  nlohmann::json ToJson() const;
};

/// Keeps keys whose two annotators both gave the same 0/1 label. Throws
/// ProtocolError when a key has more than two annotators and
/// DuplicateAnnotation when one annotator labelled a key twice.
ConsensusSet Consensus(const std::vector<AnnotationRecord>& annotations);

/// Agreement over keys with two labels, NA counted as a category.
struct AgreementStats {
  std::uint64_t pairs = 0;
  std::uint64_t agreeing = 0;
  double raw_agreement = 0.0;
  /// Fleiss' kappa for two raters per item; absent when chance agreement is 1.
  std::optional<double> kappa;

  nlohmann::json ToJson() const;
};

AgreementStats Agreement(const std::vector<AnnotationRecord>& annotations);

struct Reliability {
  std::uint64_t valid = 0;
  std::uint64_t agreements = 0;

  double accuracy() const { return valid == 0 ? 0.0 : static_cast<double>(agreements) / static_cast<double>(valid); }
  nlohmann::json ToJson() const;
  static Reliability FromJson(const nlohmann::json& j);
  bool operator==(const Reliability&) const = default;
};

/// Evaluator GTA against consensus labels. Throws MissingJudgmentError when a
/// consensus key has no judgment or the judgment carries no GTA.
Reliability EvaluatorReliability(const ConsensusSet& consensus, const std::map<StepKey, StepJudgment>& judgments);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline constexpr const char* kReportSchema = "gapdx-report/v1";

struct ReportEntry {
  std::string model;
  std::string dataset;
  RunSummary summary;
  std::optional<Reliability> reliability;
  /// Input provenance of this summary (hash chain), copied into the report.
  nlohmann::json provenance;
};

enum class ReportFormat { kJson, kCsv, kPlotData };

std::optional<ReportFormat> ReportFormatFromString(std::string_view name);

nlohmann::json ReportToJson(const std::vector<ReportEntry>& entries);
std::vector<ReportEntry> ReportFromJson(const nlohmann::json& j);

/// Header model,dataset,n,em,gta,eg,rg,ideal; percentages with two decimals.
std::string ReportToCsv(const std::vector<ReportEntry>& entries);

/// Parameter count in billions from a model name ("UI-TARS-1.5-7B" -> 7).
std::optional<double> ParameterCountFromName(std::string_view model);

/// One JSON document per figure family: spline, radar, scatter, quadrants.
std::map<std::string, nlohmann::json> PlotSeries(const std::vector<ReportEntry>& entries);

/// Writes report.json, report.csv or plot_<family>.json files into out_dir
/// and returns the written paths. Entries are emitted sorted by (model, dataset).
std::vector<std::filesystem::path> EmitReport(std::vector<ReportEntry> entries, ReportFormat format,
                                              const std::filesystem::path& out_dir);

}  // namespace gapdx
