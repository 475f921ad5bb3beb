#include <sstream>

#include <gtest/gtest.h>

#include "gapdx/cli.h"
#include "gapdx/diagnostics.h"
#include "gapdx/jsonl.h"
#include "gapdx/sampler.h"
#include "test_support.h"

namespace gapdx {
namespace {

using nlohmann::json;
using testing::FixturePath;
using testing::Slurp;
using testing::Spit;
using testing::TempDir;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult Invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> CalibrationRun(const std::string& cmd, const std::filesystem::path& out) {
  return {cmd,         "--trace",   FixturePath("calibration/trace.jsonl").string(),
          "--manifest", FixturePath("calibration/manifest.jsonl").string(),
          "--dialect", "uitars_dsl", "--model", "UI-TARS-1.5-7B", "--dataset", "cases", "--out", out.string()};
}

std::vector<std::string> With(std::vector<std::string> base, std::initializer_list<std::string> extra) {
  base.insert(base.end(), extra);
  return base;
}

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(Invoke({"--help"}).code, 0);
  EXPECT_EQ(Invoke({}).code, 2);
  EXPECT_EQ(Invoke({"em"}).code, 2);  // --out is required
  EXPECT_EQ(Invoke({"frobnicate"}).code, 2);
}

TEST(Cli, InputErrorsExitTwoWithJsonDetails) {
  TempDir dir("cli");
  const auto r = Invoke({"--json-errors", "em", "--trace", (dir / "none.jsonl").string(), "--manifest",
                      (dir / "none.jsonl").string(), "--out", dir.path().string()});
  EXPECT_EQ(r.code, 2);
  const json e = json::parse(r.err);
  EXPECT_EQ(e.at("error"), "IoError");
  EXPECT_EQ(e.at("category"), "input");
  EXPECT_EQ(Invoke({"em", "--trace", "a", "--manifest", "b", "--dialect", "klingon", "--out", "x"}).code, 2);
}

TEST(Cli, EmOnCalibrationCases) {
  TempDir dir("cli");
  const auto r = Invoke(CalibrationRun("em", dir.path()));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "steps=4 em=50.00%\n");
  const auto lines = ReadJsonLines(dir / "em_judgments.jsonl");
  std::map<std::string, int> em;
  for (const auto& l : lines) em[l.value.at("episode_id")] = l.value.at("em");
  EXPECT_EQ(em, (std::map<std::string, int>{{"case-both-right", 1}, {"case-both-wrong", 0}, {"case-eg", 0}, {"case-rg", 1}}));
  EXPECT_EQ(Slurp(dir / "em_judgments.jsonl").rfind("{\"_provenance\":", 0), 0u);
}

TEST(Cli, GtaRerunsAreByteIdentical) {
  TempDir a("cli"), b("cli");
  const std::string mock = FixturePath("calibration/evaluator_responses.jsonl").string();
  const auto ra = Invoke(With(CalibrationRun("gta", a.path()), {"--mock-responses", mock, "--concurrency", "1"}));
  const auto rb = Invoke(With(CalibrationRun("gta", b.path()), {"--mock-responses", mock, "--concurrency", "3"}));
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  EXPECT_EQ(ra.out, "steps=4 excluded=0 em=50.00% gta=50.00% eg=25.00% rg=25.00% ideal=25.00%\n");
  for (const char* f : {"run.json", "verdicts.jsonl", "judgments.jsonl", "summary.json"}) {
    EXPECT_EQ(Slurp(a / f), Slurp(b / f)) << f;
  }
}

TEST(Cli, GtaNeedsExactlyOneEndpoint) {
  TempDir dir("cli");
  EXPECT_EQ(Invoke(CalibrationRun("gta", dir.path())).code, 2);
  EXPECT_EQ(Invoke(With(CalibrationRun("gta", dir.path()), {"--mock", "oracle", "--mock-constant", "x"})).code, 2);
}

TEST(Cli, UnreachableEvaluatorExitsThree) {
  TempDir dir("cli");
  for (const auto& line : ReadJsonLines(FixturePath("calibration/manifest.jsonl"))) {
    Spit(dir / "shots" / line.value.at("screenshot").get<std::string>(), "PNG");
  }
  const std::vector<std::string> endpoint = {"--json-errors", "--endpoint-url",
                                             "http://127.0.0.1:9/v1/chat/completions", "--model-name", "m",
                                             "--attempts", "1", "--backoff-ms", "0"};
  auto args = CalibrationRun("gta", dir / "out");
  args.insert(args.end(), endpoint.begin(), endpoint.end());
  args.insert(args.end(), {"--data-root", (dir / "shots").string()});
  const auto r = Invoke(args);
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(json::parse(r.err).at("category"), "endpoint");

  // Without the screenshots the run fails on input before any request is made.
  auto missing = CalibrationRun("gta", dir / "out2");
  missing.insert(missing.end(), endpoint.begin(), endpoint.end());
  const auto m = Invoke(missing);
  EXPECT_EQ(m.code, 2);
  EXPECT_EQ(json::parse(m.err).at("error"), "IoError");
}

TEST(Cli, RunManifestReplayAndTamperCheck) {
  TempDir dir("cli");
  Spit(dir / "trace.jsonl", Slurp(FixturePath("calibration/trace.jsonl")));
  Spit(dir / "manifest.jsonl", Slurp(FixturePath("calibration/manifest.jsonl")));
  const std::vector<std::string> first = {"em", "--trace", (dir / "trace.jsonl").string(), "--manifest",
                                          (dir / "manifest.jsonl").string(), "--dialect", "uitars_dsl",
                                          "--out", (dir / "one").string()};
  ASSERT_EQ(Invoke(first).code, 0);
  const auto replay = Invoke({"em", "--run-manifest", (dir / "one" / "run.json").string(), "--out", (dir / "two").string()});
  ASSERT_EQ(replay.code, 0) << replay.err;
  EXPECT_EQ(Slurp(dir / "one" / "em_judgments.jsonl"), Slurp(dir / "two" / "em_judgments.jsonl"));

  Spit(dir / "trace.jsonl", Slurp(dir / "trace.jsonl") + "\n");
  const auto tampered = Invoke({"--json-errors", "em", "--run-manifest", (dir / "one" / "run.json").string(), "--out",
                             (dir / "three").string()});
  EXPECT_EQ(tampered.code, 2);
  EXPECT_EQ(json::parse(tampered.err).at("error"), "ManifestTamperError");
}

TEST(Cli, SampleReproducesTheAitzAllocation) {
  TempDir dir("cli");
  Spit(dir / "aitz.jsonl", testing::SyntheticManifest(testing::AitzClassCounts()));
  const std::vector<std::string> args = {"sample", "--manifest", (dir / "aitz.jsonl").string(), "--n", "200",
                                         "--k", "0", "--seed", "42", "--out", (dir / "s1").string()};
  const auto r = Invoke(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "CLICK=116 INPUT=21 PRESS=16 SCROLL=26 STOP=21 total=200\n");
  auto again = args;
  again.back() = (dir / "s2").string();
  ASSERT_EQ(Invoke(again).code, 0);
  EXPECT_EQ(Slurp(dir / "s1" / "keys.json"), Slurp(dir / "s2" / "keys.json"));
  EXPECT_EQ(Invoke({"sample", "--manifest", (dir / "aitz.jsonl").string(), "--n", "5000", "--out", dir.path().string()}).code,
            2);
}

TEST(Cli, ProjectKeepsOnlyListedSteps) {
  TempDir dir("cli");
  const KeyList keys{{StepKey{"case-eg", 0}, StepKey{"case-rg", 0}}, "calibration", 0};
  Spit(dir / "keys.json", keys.ToJson().dump());
  const auto r = Invoke({"project", "--keys", (dir / "keys.json").string(), "--trace",
                      FixturePath("calibration/trace.jsonl").string(), "--manifest",
                      FixturePath("calibration/manifest.jsonl").string(), "--dialect", "uitars_dsl", "--out",
                      (dir / "p").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(ReadJsonLines(dir / "p" / "trace.jsonl").size(), 2u);
  EXPECT_EQ(ReadJsonLines(dir / "p" / "manifest.jsonl").size(), 2u);

  Spit(dir / "missing.json", KeyList{{StepKey{"nope", 0}}, "x", 0}.ToJson().dump());
  EXPECT_EQ(Invoke({"project", "--keys", (dir / "missing.json").string(), "--trace",
                 FixturePath("calibration/trace.jsonl").string(), "--manifest",
                 FixturePath("calibration/manifest.jsonl").string(), "--dialect", "uitars_dsl", "--out",
                 (dir / "q").string()})
                .code,
            2);
}

TEST(Cli, ReliabilityFromFiles) {
  TempDir dir("cli");
  const auto f = testing::BuildReliabilityFixture(155, 144, 9, 6);
  std::string annotations, judgments = "{\"_provenance\":{\"run\":{\"model\":\"UI-TARS-1.5-7B\",\"dataset\":\"AndroidControl\"}}}\n";
  for (const auto& a : f.annotations) annotations += a.ToJson().dump() + "\n";
  for (const auto& [k, j] : f.judgments) judgments += j.ToJson().dump() + "\n";
  Spit(dir / "ann.jsonl", annotations);
  Spit(dir / "judg.jsonl", judgments);
  const auto r = Invoke({"reliability", "--annotations", (dir / "ann.jsonl").string(), "--judgments",
                      (dir / "judg.jsonl").string(), "--out", (dir / "rel.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "valid=155 agreements=144 accuracy=92.90%\n");
  const json rel = json::parse(Slurp(dir / "rel.json"));
  EXPECT_EQ(rel.at("model"), "UI-TARS-1.5-7B");
  EXPECT_EQ(rel.at("discarded").at("disagreement"), 9);
  EXPECT_EQ(rel.at("discarded").at("na_present"), 6);

  Spit(dir / "dup.jsonl", annotations + f.annotations.front().ToJson().dump() + "\n");
  const auto dup = Invoke({"reliability", "--annotations", (dir / "dup.jsonl").string(), "--judgments",
                        (dir / "judg.jsonl").string()});
  EXPECT_EQ(dup.code, 4);
}

TEST(Cli, ReportOverAllBenchmarkRows) {
  TempDir dir("cli");
  std::ifstream in(FixturePath("benchmark_rows.csv"));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> args = {"report", "--format", "csv", "--out", (dir / "r").string()};
  int i = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string model, dataset;
    std::getline(ss, model, ',');
    std::getline(ss, dataset, ',');
    // Any valid summary works here; the CSV layout is what is checked.
    RunSummary s;
    s.n_steps = 100;
    s.has_gta = true;
    s.quadrants = {40 + static_cast<std::uint64_t>(i % 5), 10, 30, 20 - static_cast<std::uint64_t>(i % 5)};
    s.em_count = s.quadrants.q1 + s.quadrants.q4;
    const std::string path = (dir / ("s" + std::to_string(i++) + ".json")).string();
    Spit(path, json{{"model", model}, {"dataset", dataset}, {"summary", s.ToJson()}}.dump());
    args.push_back("--summary");
    args.push_back(path);
  }
  const auto r = Invoke(args);
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(Slurp(dir / "r" / "report.csv"));
  int rows = -1;
  for (std::string l; std::getline(csv, l);) ++rows;
  EXPECT_EQ(rows, 18);

  args.push_back("--summary");
  args.push_back((dir / "s0.json").string());
  EXPECT_EQ(Invoke(args).code, 2);  // duplicate model/dataset
  EXPECT_EQ(Invoke({"plotdata", "--summary", (dir / "s0.json").string(), "--out", (dir / "plots").string()}).code, 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "plots" / "plot_radar.json"));
}

}  // namespace
}  // namespace gapdx
