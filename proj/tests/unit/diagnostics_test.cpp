#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "gapdx/diagnostics.h"
#include "gapdx/errors.h"
#include "test_support.h"

namespace gapdx {
namespace {

using nlohmann::json;
using testing::Rational;

std::vector<StepJudgment> RandomJudgments(std::mt19937_64& rng, std::size_t n) {
  std::vector<StepJudgment> out;
  for (std::size_t i = 0; i < n; ++i) {
    StepJudgment j;
    j.key = {"e" + std::to_string(i / 20), static_cast<std::int64_t>(i % 20)};
    j.em = static_cast<int>(rng() % 2);
    j.gta = static_cast<int>(rng() % 2);
    out.push_back(j);
  }
  return out;
}

std::vector<StepJudgment> FromCounts(std::uint64_t q1, std::uint64_t q2, std::uint64_t q3, std::uint64_t q4) {
  std::vector<StepJudgment> out;
  auto add = [&](std::uint64_t n, int em, int gta) {
    for (std::uint64_t i = 0; i < n; ++i) {
      StepJudgment j;
      j.key = {"q" + std::to_string(em) + std::to_string(gta), static_cast<std::int64_t>(i)};
      j.em = em;
      j.gta = gta;
      out.push_back(j);
    }
  };
  add(q1, 1, 1);
  add(q2, 0, 1);
  add(q3, 0, 0);
  add(q4, 1, 0);
  return out;
}

TEST(Quadrant, Mapping) {
  EXPECT_EQ(QuadrantOf(1, 1), Quadrant::kQ1);
  EXPECT_EQ(QuadrantOf(0, 1), Quadrant::kQ2);
  EXPECT_EQ(QuadrantOf(0, 0), Quadrant::kQ3);
  EXPECT_EQ(QuadrantOf(1, 0), Quadrant::kQ4);
}

TEST(Summary, CountsMatchABruteForceTally) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto judgments = RandomJudgments(rng, 1 + rng() % 500);
    std::uint64_t tally[2][2] = {{0, 0}, {0, 0}};
    for (const auto& j : judgments) ++tally[j.em][*j.gta];
    const RunSummary s = Summarize(judgments, "h");
    EXPECT_EQ(s.quadrants.q1, tally[1][1]);
    EXPECT_EQ(s.quadrants.q2, tally[0][1]);
    EXPECT_EQ(s.quadrants.q3, tally[0][0]);
    EXPECT_EQ(s.quadrants.q4, tally[1][0]);
    EXPECT_EQ(s.em_count, tally[1][0] + tally[1][1]);
  }
}

TEST(Summary, IdentitiesHoldExactly) {
  std::mt19937_64 rng(6);
  const RunSummary s = Summarize(RandomJudgments(rng, 10000), "h");
  const Rational n(s.n_steps);
  auto r = [&](std::uint64_t c) { return Rational(c) / n; };
  EXPECT_EQ(r(s.em_count), r(s.ideal_count()) + r(s.rg_count()));
  EXPECT_EQ(r(s.gta_count()), r(s.ideal_count()) + r(s.eg_count()));
  EXPECT_EQ(r(s.quadrants.q1) + r(s.quadrants.q2) + r(s.quadrants.q3) + r(s.quadrants.q4), Rational(1));
  EXPECT_EQ(r(s.gta_count()) - r(s.ideal_count()), r(s.eg_count()));
}

TEST(Summary, AitzCountsGivePublishedPercentages) {
  const RunSummary s = Summarize(FromCounts(3161, 166, 954, 443), "h");
  EXPECT_EQ(s.n_steps, 4724u);
  EXPECT_EQ(FormatPercent(s.em_count, s.n_steps), "76.29");
  EXPECT_EQ(FormatPercent(s.gta_count(), s.n_steps), "70.43");
  EXPECT_EQ(FormatPercent(s.eg_count(), s.n_steps), "3.51");
  EXPECT_EQ(FormatPercent(s.rg_count(), s.n_steps), "9.38");
}

TEST(Summary, EmOnlyAndEmpty) {
  std::vector<StepJudgment> em_only(3);
  em_only[0].em = 1;
  for (int i = 0; i < 3; ++i) em_only[i].key = {"e", i};
  const RunSummary s = Summarize(em_only, "h");
  EXPECT_FALSE(s.has_gta);
  EXPECT_EQ(s.em_count, 1u);
  EXPECT_FALSE(s.ToJson().contains("gta"));
  EXPECT_THROW(Summarize({}, "h"), EmptyRunError);
}

TEST(Summary, JsonRoundTrip) {
  RunSummary s = Summarize(FromCounts(5, 2, 1, 3), "policy", "v1", "prompt");
  s.excluded = 2;
  EXPECT_EQ(RunSummary::FromJson(s.ToJson()), s);
  json broken = s.ToJson();
  broken["counts"]["Q1"] = 6;
  EXPECT_THROW(RunSummary::FromJson(broken), Error);
}

TEST(FormatRatio, ExactHalfUp) {
  EXPECT_EQ(FormatRatio(1, 8, 2), "0.13");   // 0.125
  EXPECT_EQ(FormatRatio(1, 3, 4), "0.3333");
  EXPECT_EQ(FormatRatio(2, 3, 0), "1");
  EXPECT_EQ(FormatPercent(1, 200), "0.50");
  EXPECT_EQ(FormatPercent(144, 155), "92.90");
  EXPECT_EQ(FormatPercent(5, 5), "100.00");
}

// Rows are read as integer hundredths so the check itself is exact.
TEST(PublishedBenchmarks, GapIdentityWithinRounding) {
  std::ifstream in(testing::FixturePath("benchmark_rows.csv"));
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string model, dataset, cell;
    std::getline(ss, model, ',');
    std::getline(ss, dataset, ',');
    long v[4];
    for (long& x : v) {
      std::getline(ss, cell, ',');
      const auto dot = cell.find('.');
      x = std::stol(cell.substr(0, dot)) * 100 + std::stol(cell.substr(dot + 1));
    }
    const long em = v[0], gta = v[1], eg = v[2], rg = v[3];
    EXPECT_LE(std::labs((em - rg) - (gta - eg)), 2) << model << " " << dataset;
    ++rows;
  }
  EXPECT_EQ(rows, 18);
}

TEST(Consensus, AllNineLabelPairs) {
  const Label labels[] = {Label::kOne, Label::kZero, Label::kNa};
  std::vector<AnnotationRecord> records;
  std::map<StepKey, std::pair<Label, Label>> pairs;
  int i = 0;
  for (Label a : labels) {
    for (Label b : labels) {
      const StepKey key{"pair", i++};
      records.push_back({key, "a", a, "t"});
      records.push_back({key, "b", b, "t"});
      pairs[key] = {a, b};
    }
  }
  const ConsensusSet set = Consensus(records);
  EXPECT_EQ(set.consensus.size(), 2u);
  EXPECT_EQ(set.discarded.size(), 7u);
  for (const auto& [key, ab] : pairs) {
    const auto [a, b] = ab;
    if (a == b && a != Label::kNa) {
      EXPECT_EQ(set.consensus.at(key), a == Label::kOne ? 1 : 0);
    } else if (a == Label::kNa || b == Label::kNa) {
      EXPECT_EQ(set.discarded.at(key), DiscardReason::kNaPresent);
    } else {
      EXPECT_EQ(set.discarded.at(key), DiscardReason::kDisagreement);
    }
  }
}

TEST(Consensus, ProtocolViolations) {
  const StepKey k{"e", 0};
  EXPECT_EQ(Consensus({{k, "a", Label::kOne, "t"}}).discarded.at(k), DiscardReason::kIncomplete);
  EXPECT_THROW(Consensus({{k, "a", Label::kOne, "t"}, {k, "a", Label::kOne, "t"}}), DuplicateAnnotation);
  EXPECT_THROW(Consensus({{k, "a", Label::kOne, "t"}, {k, "b", Label::kOne, "t"}, {k, "c", Label::kOne, "t"}}),
               ProtocolError);
}

TEST(Agreement, FleissKappaForTwoRaters) {
  std::vector<AnnotationRecord> r;
  const std::pair<Label, Label> items[] = {
      {Label::kOne, Label::kOne}, {Label::kZero, Label::kZero}, {Label::kOne, Label::kZero}, {Label::kOne, Label::kOne}};
  int i = 0;
  for (auto [a, b] : items) {
    r.push_back({{"e", i}, "x", a, "t"});
    r.push_back({{"e", i++}, "y", b, "t"});
  }
  const AgreementStats s = Agreement(r);
  EXPECT_EQ(s.pairs, 4u);
  EXPECT_EQ(s.agreeing, 3u);
  EXPECT_DOUBLE_EQ(s.raw_agreement, 0.75);
  ASSERT_TRUE(s.kappa);
  EXPECT_NEAR(*s.kappa, (0.75 - 34.0 / 64) / (1 - 34.0 / 64), 1e-12);
}

TEST(Reliability, FixtureReproducesTheReportedCell) {
  const auto f = testing::BuildReliabilityFixture(155, 144, 9, 6);
  const ConsensusSet set = Consensus(f.annotations);
  EXPECT_EQ(set.discarded.size(), 15u);
  const Reliability r = EvaluatorReliability(set, f.judgments);
  EXPECT_EQ(r.valid, 155u);
  EXPECT_EQ(r.agreements, 144u);
  EXPECT_EQ(FormatPercent(r.agreements, r.valid), "92.90");
  EXPECT_EQ(Reliability::FromJson(r.ToJson()), r);
}

TEST(Reliability, MissingJudgments) {
  const auto f = testing::BuildReliabilityFixture(3, 3, 0, 0);
  const ConsensusSet set = Consensus(f.annotations);
  auto judgments = f.judgments;
  judgments.begin()->second.gta.reset();
  EXPECT_THROW(EvaluatorReliability(set, judgments), MissingJudgmentError);
  judgments.erase(judgments.begin());
  EXPECT_THROW(EvaluatorReliability(set, judgments), MissingJudgmentError);
}

TEST(AnnotationRecord, LabelsSerializeAsNumbersOrNa) {
  const AnnotationRecord na{{"e", 1}, "a", Label::kNa, "t"};
  EXPECT_EQ(na.ToJson().at("label"), "NA");
  const AnnotationRecord one{{"e", 1}, "a", Label::kOne, "t"};
  EXPECT_EQ(one.ToJson().at("label"), 1);
  EXPECT_EQ(AnnotationRecord::FromJson(na.ToJson()), na);
  EXPECT_EQ(AnnotationRecord::FromJson(one.ToJson()), one);
}

std::vector<ReportEntry> Entries() {
  ReportEntry a{"UI-TARS-1.5-7B", "AITZ", Summarize(FromCounts(3161, 166, 954, 443), "h"), Reliability{155, 144},
                json{{"tool", "gapdx"}}};
  std::vector<StepJudgment> em_only(4);
  for (int i = 0; i < 4; ++i) em_only[i].key = {"e", i}, em_only[i].em = i % 2;
  ReportEntry b{"AgentCPM-GUI-8B", "CAGUI", Summarize(em_only, "h"), std::nullopt, json::object()};
  return {a, b};
}

TEST(Report, CsvRows) {
  const std::string csv = ReportToCsv(Entries());
  EXPECT_EQ(csv,
            "model,dataset,n,em,gta,eg,rg,ideal\n"
            "UI-TARS-1.5-7B,AITZ,4724,76.29,70.43,3.51,9.38,66.91\n"
            "AgentCPM-GUI-8B,CAGUI,4,50.00,,,,\n");
}

TEST(Report, JsonRoundTrip) {
  const auto entries = Entries();
  const json j = ReportToJson(entries);
  EXPECT_EQ(j.at("schema"), kReportSchema);
  const auto back = ReportFromJson(j);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].summary, entries[0].summary);
  EXPECT_EQ(back[0].reliability, entries[0].reliability);
  EXPECT_EQ(ReportToJson(back), j);
}

TEST(Report, PlotSeriesAndEmission) {
  const auto plots = PlotSeries(Entries());
  EXPECT_EQ(plots.size(), 4u);
  EXPECT_EQ(plots.at("spline").at("series").size(), 1u);
  EXPECT_EQ(plots.at("scatter").at("series")[0].at("params_b"), 7.0);
  EXPECT_EQ(plots.at("radar").at("series")[0].at("valid"), 155);
  testing::TempDir dir("report");
  EXPECT_EQ(EmitReport(Entries(), ReportFormat::kPlotData, dir.path()).size(), 4u);
  const auto csv = EmitReport(Entries(), ReportFormat::kCsv, dir.path());
  // Sorted by model on emission.
  EXPECT_EQ(testing::Slurp(csv.at(0)).find("AgentCPM"), std::string("model,dataset,n,em,gta,eg,rg,ideal\n").size());
  EXPECT_THROW(EmitReport({}, ReportFormat::kJson, dir.path()), EmptyRunError);
}

TEST(ParameterCount, FromModelNames) {
  EXPECT_EQ(ParameterCountFromName("UI-TARS-1.5-7B"), 7.0);
  EXPECT_EQ(ParameterCountFromName("GUI-Owl-32B"), 32.0);
  EXPECT_EQ(ParameterCountFromName("tiny-0.5b"), 0.5);
  EXPECT_EQ(ParameterCountFromName("mystery"), std::nullopt);
}

}  // namespace
}  // namespace gapdx
