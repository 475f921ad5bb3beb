#include <random>
#include <set>

#include <gtest/gtest.h>

#include "gapdx/action.h"
#include "gapdx/errors.h"
#include "gapdx/trace.h"
#include "test_support.h"

namespace gapdx {
namespace {

using nlohmann::json;

TEST(ParserCorpus, EveryFixtureParsesAsExpected) {
  const auto rows = testing::ReadJsonl(testing::FixturePath("parser_corpus.jsonl"));
  std::size_t valid = 0;
  std::set<std::string> dialects;
  for (const json& row : rows) {
    const std::string failure = testing::CheckCorpusRow(row);
    EXPECT_TRUE(failure.empty()) << row.at("id") << ": " << failure;
    if (!row.contains("error")) ++valid;
    dialects.insert(row.at("dialect").get<std::string>());
  }
  EXPECT_GE(valid, 50u);
  EXPECT_EQ(dialects.size(), 3u);
}

TEST(ParserCorpus, CoversEveryActionClassPerDialect) {
  const auto rows = testing::ReadJsonl(testing::FixturePath("parser_corpus.jsonl"));
  std::map<std::string, std::set<std::string>> seen;
  for (const json& row : rows) {
    if (row.contains("error")) continue;
    seen[row.at("dialect").get<std::string>()].insert(row.at("expected").at("type").get<std::string>());
  }
  const std::set<std::string> cpm = {"click", "long_press", "swipe", "input", "press", "terminate", "wait", "open"};
  const std::set<std::string> tars = {"click", "long_press", "swipe", "input", "press", "terminate"};
  const std::set<std::string> owl = {"click", "long_press", "swipe", "input", "press", "terminate", "wait", "open"};
  EXPECT_EQ(seen["agentcpm_json"], cpm);
  EXPECT_EQ(seen["uitars_dsl"], tars);
  EXPECT_EQ(seen["guiowl_toolcall"], owl);
}

TEST(AgentCpm, PixelFreeAndGeometryIndependent) {
  const auto a = ParseAgentCpm(R"({"POINT":[100,200]})");
  const auto b = ParseAgentCpm(R"({"POINT":[100,200]})", ScreenGeometry(1, 1));
  EXPECT_EQ(a.action, b.action);
}

TEST(AgentCpm, ParseErrorCarriesOffset) {
  try {
    ParseAgentCpm(R"({"POINT":[1,2)");
    FAIL() << "no throw";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.dialect(), "agentcpm_json");
    EXPECT_GT(e.offset(), 0u);
  }
}

TEST(UiTars, PixelDialectNeedsGeometry) {
  EXPECT_THROW(ParseDialect(TraceDialect::kUiTarsDsl, "Thought: x\nAction: click(point='<point>1 2</point>')",
                            std::nullopt),
               CoordinateSpaceError);
  EXPECT_NO_THROW(ParseDialect(TraceDialect::kUiTarsDsl, "Thought: x\nAction: press_back()", std::nullopt));
}

TEST(GuiOwl, ConclusionCanBeLeftOut) {
  const std::string raw =
      "<thinking>\nLook.\n</thinking>\n<tool_call>\n{\"name\":\"mobile_use\",\"arguments\":{\"action\":\"system_button\","
      "\"button\":\"Back\"}}\n</tool_call>\n<conclusion>\nWent back.\n</conclusion>";
  const ScreenGeometry g(1080, 2340);
  EXPECT_EQ(ParseGuiOwl(raw, g).cot, "Look.\n\nWent back.");
  EXPECT_EQ(ParseGuiOwl(raw, g, GuiOwlOptions{false}).cot, "Look.");
}

TEST(ExtractCot, RecoversReasoningFromBrokenActions) {
  EXPECT_EQ(ExtractCot(TraceDialect::kUiTarsDsl, "Thought: keep this\nAction: fly()"), "keep this");
  EXPECT_EQ(ExtractCot(TraceDialect::kAgentCpmJson, R"({"thought":"kept","POINT":[5000,1]})"), "kept");
}

// Mutated corpus entries must either parse or raise a typed gapdx error.
TEST(ParserFuzz, MutationsOnlyRaiseTypedErrors) {
  const auto rows = testing::ReadJsonl(testing::FixturePath("parser_corpus.jsonl"));
  std::mt19937_64 rng(7);
  const std::string alphabet = "{}[]()<>\"',:=\\ \n0123456789-.eEabcxyPOINTclick_";
  const ScreenGeometry g(1080, 2400);
  for (int iter = 0; iter < 20000; ++iter) {
    const json& row = rows[rng() % rows.size()];
    std::string raw = row.at("raw").get<std::string>();
    const int edits = 1 + static_cast<int>(rng() % 4);
    for (int e = 0; e < edits && !raw.empty(); ++e) {
      const std::size_t pos = rng() % raw.size();
      switch (rng() % 3) {
        case 0: raw[pos] = alphabet[rng() % alphabet.size()]; break;
        case 1: raw.erase(pos, 1 + rng() % 8); break;
        default: raw.insert(pos, 1, alphabet[rng() % alphabet.size()]);
      }
    }
    const auto dialect = *DialectFromString(row.at("dialect").get<std::string>());
    try {
      const ParsedOutput p = ParseDialect(dialect, raw, g);
      ValidateAction(p.action);
    } catch (const Error&) {
    } catch (const std::exception& e) {
      FAIL() << "untyped " << typeid(e).name() << " '" << e.what() << "' on: " << raw;
    }
    EXPECT_NO_THROW(ExtractCot(dialect, raw));
  }
}

}  // namespace
}  // namespace gapdx
