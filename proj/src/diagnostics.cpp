/// @file diagnostics.cpp
/// @brief Quadrant judgments, exact summaries, consensus and report output.

#include "gapdx/diagnostics.h"

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

#include "gapdx/errors.h"
#include "gapdx/jsonl.h"

namespace gapdx {

using json = nlohmann::json;

Quadrant QuadrantOf(int em, int gta) {
  if (em) return gta ? Quadrant::kQ1 : Quadrant::kQ4;
  return gta ? Quadrant::kQ2 : Quadrant::kQ3;
}

std::string_view ToString(Quadrant q) {
  switch (q) {
    case Quadrant::kQ1:
      return "Q1";
    case Quadrant::kQ2:
      return "Q2";
    case Quadrant::kQ3:
      return "Q3";
    case Quadrant::kQ4:
      return "Q4";
  }
  return "?";
}

std::optional<Quadrant> StepJudgment::quadrant() const {
  if (!gta) return std::nullopt;
  return QuadrantOf(em, *gta);
}

json StepJudgment::ToJson() const {
  json j = KeyToJson(key);
  j["em"] = em;
  j["em_reason"] = em_reason;
  if (gta) {
    j["gta"] = *gta;
    j["gta_reason"] = gta_reason;
    j["quadrant"] = std::string(ToString(*quadrant()));
  }
  return j;
}

StepJudgment StepJudgment::FromJson(const json& j) {
  try {
    StepJudgment s;
    s.key = KeyFromJson(j);
    s.em = j.at("em").get<int>();
    s.em_reason = j.value("em_reason", std::string());
    if (j.contains("gta")) {
      s.gta = j.at("gta").get<int>();
      s.gta_reason = j.value("gta_reason", std::string());
    }
    if ((s.em != 0 && s.em != 1) || (s.gta && *s.gta != 0 && *s.gta != 1)) {
      throw ParseError("judgment", 0, "em and gta must be 0 or 1");
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError("judgment", 0, e.what());
  }
}

std::vector<StepJudgment> JudgeRun(const std::vector<StepRecord>& records,
                                   const std::map<StepKey, EvaluatorVerdict>& verdicts, const MatchPolicy& policy) {
  std::vector<StepJudgment> out;
  out.reserve(records.size());
  for (const StepRecord& r : records) {
    auto it = verdicts.find(r.key);
    if (it == verdicts.end()) throw MissingVerdictError("no evaluator verdict for " + ToString(r.key));
    const MatchResult em = MatchActions(r.predicted_action, r.gt_action, r.gt_bbox, policy);
    const GtaResult gta = GtaStep(r, it->second, policy);
    out.push_back(StepJudgment{r.key, em.matched ? 1 : 0, em.reason, gta.gta, gta.reason});
  }
  return out;
}

std::vector<StepJudgment> JudgeEmOnly(const std::vector<StepRecord>& records, const MatchPolicy& policy) {
  std::vector<StepJudgment> out;
  out.reserve(records.size());
  for (const StepRecord& r : records) {
    const MatchResult em = MatchActions(r.predicted_action, r.gt_action, r.gt_bbox, policy);
    out.push_back(StepJudgment{r.key, em.matched ? 1 : 0, em.reason, std::nullopt, ""});
  }
  return out;
}

RunSummary Summarize(const std::vector<StepJudgment>& judgments, const std::string& policy_hash,
                     const std::string& prompt_version, const std::string& prompt_hash) {
  if (judgments.empty()) throw EmptyRunError("cannot summarize an empty run");
  RunSummary s;
  s.n_steps = judgments.size();
  s.policy_hash = policy_hash;
  s.has_gta = std::all_of(judgments.begin(), judgments.end(), [](const StepJudgment& j) { return j.gta.has_value(); });
  if (s.has_gta) {
    s.prompt_version = prompt_version;
    s.prompt_hash = prompt_hash;
  }
  for (const StepJudgment& j : judgments) {
    s.em_count += j.em;
    if (!s.has_gta) continue;
    switch (*j.quadrant()) {
      case Quadrant::kQ1:
        ++s.quadrants.q1;
        break;
      case Quadrant::kQ2:
        ++s.quadrants.q2;
        break;
      case Quadrant::kQ3:
        ++s.quadrants.q3;
        break;
      case Quadrant::kQ4:
        ++s.quadrants.q4;
        break;
    }
  }
  return s;
}

std::string FormatRatio(std::uint64_t count, std::uint64_t n, int decimals) {
  if (n == 0) return "NA";
  unsigned __int128 scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  // round(count * scale / n), halves up
  const unsigned __int128 scaled = (static_cast<unsigned __int128>(count) * scale * 2 + n) / (2 * static_cast<unsigned __int128>(n));
  const auto whole = static_cast<std::uint64_t>(scaled / scale);
  std::string out = std::to_string(whole);
  if (decimals > 0) {
    std::string frac = std::to_string(static_cast<std::uint64_t>(scaled % scale));
    out += "." + std::string(static_cast<std::size_t>(decimals) - frac.size(), '0') + frac;
  }
  return out;
}

std::string FormatPercent(std::uint64_t count, std::uint64_t n) { return FormatRatio(count * 100, n, 2); }

json RunSummary::ToJson() const {
  json j{{"n_steps", n_steps},
         {"em_count", em_count},
         {"em", em()},
         {"excluded", excluded},
         {"policy_hash", policy_hash}};
  if (has_gta) {
    j["counts"] = json{{"Q1", quadrants.q1}, {"Q2", quadrants.q2}, {"Q3", quadrants.q3}, {"Q4", quadrants.q4}};
    j["gta"] = gta();
    j["ideal"] = ideal();
    j["eg"] = eg();
    j["rg"] = rg();
    j["both_wrong"] = both_wrong();
    j["prompt_version"] = prompt_version;
    j["prompt_hash"] = prompt_hash;
  }
  return j;
}

RunSummary RunSummary::FromJson(const json& j) {
  try {
    RunSummary s;
    s.n_steps = j.at("n_steps").get<std::uint64_t>();
    s.em_count = j.at("em_count").get<std::uint64_t>();
    s.excluded = j.value("excluded", std::uint64_t{0});
    s.policy_hash = j.value("policy_hash", std::string());
    if (j.contains("counts")) {
      s.has_gta = true;
      const json& c = j.at("counts");
      s.quadrants = {c.at("Q1").get<std::uint64_t>(), c.at("Q2").get<std::uint64_t>(),
                     c.at("Q3").get<std::uint64_t>(), c.at("Q4").get<std::uint64_t>()};
      s.prompt_version = j.value("prompt_version", std::string());
      s.prompt_hash = j.value("prompt_hash", std::string());
      if (s.quadrants.total() != s.n_steps || s.quadrants.q1 + s.quadrants.q4 != s.em_count) {
        throw ParseError("summary", 0, "quadrant counts disagree with n_steps or em_count");
      }
    }
    if (s.n_steps == 0 || s.em_count > s.n_steps) throw ParseError("summary", 0, "invalid step counts");
    return s;
  } catch (const json::exception& e) {
    throw ParseError("summary", 0, e.what());
  }
}

// ---------------------------------------------------------------------------
// Annotation consensus
// ---------------------------------------------------------------------------

std::string_view ToString(Label label) {
  switch (label) {
    case Label::kOne:
      return "1";
    case Label::kZero:
      return "0";
    case Label::kNa:
      return "NA";
  }
  return "?";
}

std::optional<Label> LabelFromString(std::string_view text) {
  if (text == "1") return Label::kOne;
  if (text == "0") return Label::kZero;
  if (text == "NA" || text == "na") return Label::kNa;
  return std::nullopt;
}

namespace {

Label LabelFromJson(const json& j) {
  if (j.is_number_integer()) {
    if (j.get<int>() == 1) return Label::kOne;
    if (j.get<int>() == 0) return Label::kZero;
  } else if (j.is_string()) {
    if (auto label = LabelFromString(j.get<std::string>())) return *label;
  }
  throw ParseError("annotation", 0, "label must be 1, 0 or \"NA\", got " + j.dump());
}

json LabelToJson(Label label) {
  if (label == Label::kNa) return "NA";
  return label == Label::kOne ? 1 : 0;
}

std::map<StepKey, std::vector<const AnnotationRecord*>> GroupByKey(const std::vector<AnnotationRecord>& annotations) {
  std::map<StepKey, std::vector<const AnnotationRecord*>> by_key;
  for (const AnnotationRecord& a : annotations) {
    auto& group = by_key[a.key];
    for (const AnnotationRecord* other : group) {
      if (other->annotator_id == a.annotator_id) {
        throw DuplicateAnnotation(a.annotator_id + " labelled " + ToString(a.key) + " twice");
      }
    }
    group.push_back(&a);
    if (group.size() > 2) throw ProtocolError(ToString(a.key) + " has more than two annotators");
  }
  return by_key;
}

}  // namespace

json AnnotationRecord::ToJson() const {
  json j = KeyToJson(key);
  j["annotator_id"] = annotator_id;
  j["label"] = LabelToJson(label);
  j["timestamp"] = timestamp;
  return j;
}

AnnotationRecord AnnotationRecord::FromJson(const json& j) {
  try {
    AnnotationRecord a;
    a.key = KeyFromJson(j);
    a.annotator_id = j.at("annotator_id").get<std::string>();
    a.label = LabelFromJson(j.at("label"));
    a.timestamp = j.value("timestamp", std::string());
    return a;
  } catch (const json::exception& e) {
    throw ParseError("annotation", 0, e.what());
  }
}

std::string_view ToString(DiscardReason reason) {
  switch (reason) {
    case DiscardReason::kNaPresent:
      return "na_present";
    case DiscardReason::kDisagreement:
      return "disagreement";
    case DiscardReason::kIncomplete:
      return "incomplete";
  }
  return "?";
}

json ConsensusSet::ToJson() const {
  json kept = json::array();
  for (const auto& [key, label] : consensus) {
    json j = KeyToJson(key);
    j["label"] = label;
    kept.push_back(j);
  }
  json dropped = json::array();
  for (const auto& [key, reason] : discarded) {
    json j = KeyToJson(key);
    j["reason"] = std::string(ToString(reason));
    dropped.push_back(j);
  }
  return json{{"consensus", kept}, {"discarded", dropped}};
}

ConsensusSet Consensus(const std::vector<AnnotationRecord>& annotations) {
  ConsensusSet out;
  for (const auto& [key, group] : GroupByKey(annotations)) {
    if (group.size() < 2) {
      out.discarded.emplace(key, DiscardReason::kIncomplete);
    } else if (group[0]->label == Label::kNa || group[1]->label == Label::kNa) {
      out.discarded.emplace(key, DiscardReason::kNaPresent);
    } else if (group[0]->label != group[1]->label) {
      out.discarded.emplace(key, DiscardReason::kDisagreement);
    } else {
      out.consensus.emplace(key, group[0]->label == Label::kOne ? 1 : 0);
    }
  }
  return out;
}

json AgreementStats::ToJson() const {
  return json{{"pairs", pairs},
              {"agreeing", agreeing},
              {"raw_agreement", raw_agreement},
              {"fleiss_kappa", kappa ? json(*kappa) : json(nullptr)}};
}

AgreementStats Agreement(const std::vector<AnnotationRecord>& annotations) {
  AgreementStats stats;
  std::map<Label, std::uint64_t> marginals;
  for (const auto& [key, group] : GroupByKey(annotations)) {
    if (group.size() != 2) continue;
    ++stats.pairs;
    if (group[0]->label == group[1]->label) ++stats.agreeing;
    ++marginals[group[0]->label];
    ++marginals[group[1]->label];
  }
  if (stats.pairs == 0) return stats;
  const double n = static_cast<double>(stats.pairs);
  stats.raw_agreement = static_cast<double>(stats.agreeing) / n;
  // With two raters per item the per-item agreement is 1 or 0, so the mean
  // observed agreement equals the raw agreement rate.
  double expected = 0.0;
  for (const auto& [label, count] : marginals) {
    const double p = static_cast<double>(count) / (2.0 * n);
    expected += p * p;
  }
  if (expected < 1.0) stats.kappa = (stats.raw_agreement - expected) / (1.0 - expected);
  return stats;
}

json Reliability::ToJson() const {
  return json{{"valid", valid}, {"agreements", agreements}, {"accuracy", accuracy()}};
}

Reliability Reliability::FromJson(const json& j) {
  try {
    Reliability r{j.at("valid").get<std::uint64_t>(), j.at("agreements").get<std::uint64_t>()};
    if (r.agreements > r.valid) throw ParseError("reliability", 0, "agreements exceed valid");
    return r;
  } catch (const json::exception& e) {
    throw ParseError("reliability", 0, e.what());
  }
}

Reliability EvaluatorReliability(const ConsensusSet& consensus, const std::map<StepKey, StepJudgment>& judgments) {
  Reliability r;
  for (const auto& [key, label] : consensus.consensus) {
    auto it = judgments.find(key);
    if (it == judgments.end() || !it->second.gta) {
      throw MissingJudgmentError("no evaluator judgment for consensus key " + ToString(key));
    }
    ++r.valid;
    if (*it->second.gta == label) ++r.agreements;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::optional<ReportFormat> ReportFormatFromString(std::string_view name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "plotdata") return ReportFormat::kPlotData;
  return std::nullopt;
}

json ReportToJson(const std::vector<ReportEntry>& entries) {
  json rows = json::array();
  for (const ReportEntry& e : entries) {
    json row{{"model", e.model}, {"dataset", e.dataset}, {"summary", e.summary.ToJson()}};
    if (e.reliability) row["reliability"] = e.reliability->ToJson();
    if (!e.provenance.is_null()) row["provenance"] = e.provenance;
    rows.push_back(std::move(row));
  }
  return json{{"schema", kReportSchema}, {"entries", rows}};
}

std::vector<ReportEntry> ReportFromJson(const json& j) {
  try {
    if (j.at("schema") != kReportSchema) {
      throw ParseError("report", 0, "unsupported report schema " + j.at("schema").dump());
    }
    std::vector<ReportEntry> entries;
    for (const json& row : j.at("entries")) {
      ReportEntry e;
      e.model = row.at("model").get<std::string>();
      e.dataset = row.at("dataset").get<std::string>();
      e.summary = RunSummary::FromJson(row.at("summary"));
      if (row.contains("reliability")) e.reliability = Reliability::FromJson(row.at("reliability"));
      if (row.contains("provenance")) e.provenance = row.at("provenance");
      entries.push_back(std::move(e));
    }
    return entries;
  } catch (const json::exception& e) {
    throw ParseError("report", 0, e.what());
  }
}

namespace {

std::string CsvField(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string ReportToCsv(const std::vector<ReportEntry>& entries) {
  std::ostringstream out;
  out << "model,dataset,n,em,gta,eg,rg,ideal\n";
  for (const ReportEntry& e : entries) {
    const RunSummary& s = e.summary;
    out << CsvField(e.model) << ',' << CsvField(e.dataset) << ',' << s.n_steps << ','
        << FormatPercent(s.em_count, s.n_steps);
    if (s.has_gta) {
      out << ',' << FormatPercent(s.gta_count(), s.n_steps) << ',' << FormatPercent(s.eg_count(), s.n_steps) << ','
          << FormatPercent(s.rg_count(), s.n_steps) << ',' << FormatPercent(s.ideal_count(), s.n_steps);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
  return out.str();
}

std::optional<double> ParameterCountFromName(std::string_view model) {
  static const std::regex pattern(R"((?:^|[^0-9.])(\d+(?:\.\d+)?)[bB](?![a-zA-Z]))");
  std::optional<double> found;
  const std::string text(model);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), pattern); it != std::sregex_iterator(); ++it) {
    found = std::stod((*it)[1].str());
  }
  return found;
}

std::map<std::string, json> PlotSeries(const std::vector<ReportEntry>& entries) {
  json spline = json::array();
  json radar = json::array();
  json scatter = json::array();
  json quadrants = json::array();
  for (const ReportEntry& e : entries) {
    const RunSummary& s = e.summary;
    if (s.has_gta) {
      spline.push_back(json{{"model", e.model},
                            {"dataset", e.dataset},
                            {"em", s.em()},
                            {"gta", s.gta()},
                            {"ideal", s.ideal()}});
      quadrants.push_back(json{{"model", e.model},
                               {"dataset", e.dataset},
                               {"n", s.n_steps},
                               {"Q1", s.ideal()},
                               {"Q2", s.eg()},
                               {"Q3", s.both_wrong()},
                               {"Q4", s.rg()}});
    }
    if (e.reliability) {
      radar.push_back(json{{"model", e.model},
                           {"dataset", e.dataset},
                           {"valid", e.reliability->valid},
                           {"accuracy", e.reliability->accuracy()}});
    }
    json point{{"model", e.model}, {"dataset", e.dataset}, {"em", s.em()}};
    const std::optional<double> params = ParameterCountFromName(e.model);
    point["params_b"] = params ? json(*params) : json(nullptr);
    if (s.has_gta) {
      point["gta"] = s.gta();
      point["eg"] = s.eg();
      point["rg"] = s.rg();
    }
    scatter.push_back(std::move(point));
  }
  auto doc = [](const char* family, json series) {
    return json{{"schema", kReportSchema}, {"family", family}, {"series", std::move(series)}};
  };
  return {{"spline", doc("spline", spline)},
          {"radar", doc("radar", radar)},
          {"scatter", doc("scatter", scatter)},
          {"quadrants", doc("quadrants", quadrants)}};
}

std::vector<std::filesystem::path> EmitReport(std::vector<ReportEntry> entries, ReportFormat format,
                                              const std::filesystem::path& out_dir) {
  if (entries.empty()) throw EmptyRunError("no summaries to report");
  std::sort(entries.begin(), entries.end(), [](const ReportEntry& a, const ReportEntry& b) {
    return std::tie(a.model, a.dataset) < std::tie(b.model, b.dataset);
  });
  std::vector<std::filesystem::path> written;
  switch (format) {
    case ReportFormat::kJson:
      written.push_back(out_dir / "report.json");
      WriteTextFile(written.back(), DumpPretty(ReportToJson(entries)));
      break;
    case ReportFormat::kCsv:
      written.push_back(out_dir / "report.csv");
      WriteTextFile(written.back(), ReportToCsv(entries));
      break;
    case ReportFormat::kPlotData:
      for (const auto& [family, doc] : PlotSeries(entries)) {
        written.push_back(out_dir / ("plot_" + family + ".json"));
        WriteTextFile(written.back(), DumpPretty(doc));
      }
      break;
  }
  return written;
}

}  // namespace gapdx
