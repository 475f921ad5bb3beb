/// @file gta.cpp
/// @brief Evaluator prompting, verdict parsing, GTA scoring and the run driver.

#include "gapdx/gta.h"

#include <algorithm>
#include <exception>
#include <thread>

#include "gapdx/errors.h"
#include "gapdx/hash.h"
#include "gapdx/jsonl.h"
#include "gapdx/text_util.h"
#include "prompt_templates.h"

namespace gapdx {

using json = nlohmann::json;

namespace {

// Replaces {{name}} placeholders in one left-to-right pass, so substituted
// text is never rescanned.
std::string Render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(tmpl.substr(pos, open - pos));
    const std::string name(tmpl.substr(open + 2, close - open - 2));
    auto it = values.find(name);
    if (it != values.end()) {
      out += it->second;
    } else {
      out.append(tmpl.substr(open, close + 2 - open));
    }
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::string RenderHistory(const HistoryContext& history) {
  if (const auto* triples = std::get_if<DialogueTriples>(&history)) {
    if (triples->triples.empty()) return "";
    std::string out = "\nPrevious steps:";
    int step = 1;
    for (const HistoryTriple& t : triples->triples) {
      out += "\nStep " + std::to_string(step++) + ": Thought: " + t.cot + " | Action: " +
             (t.action ? DescribeAction(*t.action) : std::string("(unparseable output)"));
    }
    return out;
  }
  if (const auto* summary = std::get_if<CompressedSummary>(&history)) {
    if (summary->summary.empty()) return "";
    return "\nPrevious steps (summary):\n" + summary->summary;
  }
  return "";
}

std::string AgentCpmStatus(TerminateStatus status) {
  switch (status) {
    case TerminateStatus::kSuccess:
      return "finish";
    case TerminateStatus::kFailure:  // no failure status in the schema
    case TerminateStatus::kImpossible:
      return "impossible";
    default:
      return std::string(ToString(status));
  }
}

}  // namespace

DecodePolicy::DecodePolicy(double temperature, int max_new_tokens) : max_new_tokens_(max_new_tokens) {
  if (temperature != 0.0) {
    throw ConfigError("evaluator decoding is greedy; temperature must be 0, got " + std::to_string(temperature));
  }
  if (max_new_tokens <= 0) throw ConfigError("max_new_tokens must be positive");
}

std::string PromptHash() {
  static const std::string hash = Sha256Hex(std::string(prompts::kSystemV1) + '\0' + prompts::kUserV1 + '\0' +
                                            prompts::kFormatReminderV1);
  return hash;
}

EvaluatorPrompt BuildEvaluatorPrompt(const EvaluatorRequest& request) {
  EvaluatorPrompt prompt{request.key, prompts::kSystemV1, "", {}, request.decode};
  const std::string instruction = request.instruction ? "Task: " + *request.instruction + "\n" : "";
  prompt.user_text = Render(prompts::kUserV1, {{"instruction", instruction},
                                               {"history", RenderHistory(request.history)},
                                               {"cot", request.cot}});
  if (!request.screenshot_ref.empty()) prompt.image_refs.push_back(request.screenshot_ref);
  return prompt;
}

EvaluatorPrompt WithFormatReminder(EvaluatorPrompt prompt) {
  prompt.user_text += "\n\n";
  prompt.user_text += prompts::kFormatReminderV1;
  return prompt;
}

std::string ToAgentCpmJson(const CanonicalAction& action) {
  json j = json::object();
  auto location = [](const Point& p) { return json::array({p.x, p.y}); };
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Click>) {
          j["POINT"] = location(a.point);
        } else if constexpr (std::is_same_v<T, LongPress>) {
          j["POINT"] = location(a.point);
          // Durations at or under the tap default would read back as a click.
          j["duration"] = std::max<std::int64_t>(a.duration_ms.value_or(1000), 201);
        } else if constexpr (std::is_same_v<T, Swipe>) {
          if (a.origin) j["POINT"] = location(*a.origin);
          if (a.direction) {
            j["to"] = std::string(ToString(*a.direction));
          } else if (a.destination) {
            j["to"] = location(*a.destination);
          }
        } else if constexpr (std::is_same_v<T, TypeText>) {
          j["TYPE"] = a.text;
        } else if constexpr (std::is_same_v<T, PressKey>) {
          j["PRESS"] = a.key == Key::kOther ? a.raw_key : std::string(ToString(a.key));
        } else if constexpr (std::is_same_v<T, Open>) {
          j["OPEN"] = a.app_name;
        } else if constexpr (std::is_same_v<T, Wait>) {
          j["duration"] = a.duration_ms.value_or(200);
        } else if constexpr (std::is_same_v<T, Terminate>) {
          j["STATUS"] = AgentCpmStatus(a.status);
        }
      },
      action);
  return DumpCompact(j);
}

EvaluatorVerdict InferImpliedAction(const EvaluatorRequest& request, InferenceEndpoint& endpoint,
                                    const InferOptions& options) {
  auto call = [&](const EvaluatorPrompt& prompt) {
    const int attempts = std::max(1, options.max_transport_attempts);
    for (int i = 1;; ++i) {
      try {
        return endpoint.Complete(prompt);
      } catch (const EndpointError&) {
        if (i >= attempts) throw;
        if (options.backoff.count() > 0) std::this_thread::sleep_for(options.backoff * i);
      }
    }
  };

  EvaluatorVerdict verdict;
  EvaluatorPrompt prompt = BuildEvaluatorPrompt(request);
  for (int round = 0; round < 2; ++round) {
    if (round == 1) prompt = WithFormatReminder(std::move(prompt));
    const Completion completion = call(prompt);
    ++verdict.attempts;
    verdict.raw_response = completion.text;
    if (completion.truncated) {
      verdict.implied_action.reset();
      verdict.parse_ok = false;
      verdict.failure = TruncationError("evaluator response hit max_new_tokens").what();
      return verdict;
    }
    try {
      verdict.implied_action = ParseAgentCpm(completion.text).action;
      verdict.parse_ok = true;
      verdict.failure.clear();
      return verdict;
    } catch (const Error& e) {
      verdict.failure = e.name() + ": " + e.what();
    }
  }
  verdict.implied_action.reset();
  verdict.parse_ok = false;
  return verdict;
}

GtaResult GtaStep(const StepRecord& record, const EvaluatorVerdict& verdict, const MatchPolicy& policy) {
  if (text::Trim(record.cot).empty()) return {0, gta_reason::kEmptyCot};
  if (!verdict.parse_ok || !verdict.implied_action) return {0, match_reason::kParseFailure};
  const MatchResult m = MatchActions(verdict.implied_action, record.gt_action, record.gt_bbox, policy);
  return {m.matched ? 1 : 0, m.reason};
}

EvaluatorRequest RequestFor(const StepRecord& record, const DecodePolicy& decode, bool include_instruction) {
  EvaluatorRequest request{record.key, record.cot, record.history, record.screenshot_ref, record.geometry, decode,
                           std::nullopt};
  if (include_instruction) request.instruction = record.instruction;
  return request;
}

EvaluationResult EvaluateRun(const std::vector<StepRecord>& records, InferenceEndpoint& endpoint,
                             const EvaluateOptions& options) {
  const std::size_t total = records.size();
  std::vector<std::optional<EvaluatorVerdict>> verdicts(total);
  std::vector<std::string> failures(total);
  std::vector<std::exception_ptr> errors(total);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const StepRecord& record = records[i];
      if (text::Trim(record.cot).empty()) {
        EvaluatorVerdict empty;
        empty.failure = gta_reason::kEmptyCot;
        verdicts[i] = std::move(empty);
      } else {
        try {
          verdicts[i] = InferImpliedAction(RequestFor(record, options.decode, options.include_instruction), endpoint,
                                           options.infer);
        } catch (const EndpointError& e) {
          failures[i] = e.what();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
      const std::size_t finished = ++done;
      if (options.progress) options.progress(finished, total);
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options.concurrency, 1)), 1,
                                                      std::max<std::size_t>(total, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvaluationResult result;
  for (std::size_t i = 0; i < total; ++i) {
    if (verdicts[i]) {
      result.verdicts.emplace(records[i].key, std::move(*verdicts[i]));
    } else {
      result.unavailable.emplace(records[i].key, failures[i]);
    }
  }
  return result;
}

json VerdictToJson(const EvaluatorVerdict& verdict) {
  json j{{"parse_ok", verdict.parse_ok}, {"raw_response", verdict.raw_response}, {"attempts", verdict.attempts}};
  j["implied_action"] = verdict.implied_action ? ActionToJson(*verdict.implied_action) : json(nullptr);
  if (!verdict.failure.empty()) j["failure"] = verdict.failure;
  return j;
}

// ---------------------------------------------------------------------------
// Mock endpoint
// ---------------------------------------------------------------------------

MockEndpoint::MockEndpoint(std::map<StepKey, std::string> responses, std::optional<std::string> fallback,
                           std::string label)
    : responses_(std::move(responses)), fallback_(std::move(fallback)), label_(std::move(label)) {}

std::unique_ptr<MockEndpoint> MockEndpoint::Oracle(const std::vector<StepRecord>& records) {
  std::map<StepKey, std::string> responses;
  for (const auto& r : records) responses.emplace(r.key, ToAgentCpmJson(r.gt_action));
  return std::make_unique<MockEndpoint>(std::move(responses), std::nullopt, "oracle");
}

std::unique_ptr<MockEndpoint> MockEndpoint::Constant(std::string response, std::string label) {
  return std::make_unique<MockEndpoint>(std::map<StepKey, std::string>{}, std::move(response), std::move(label));
}

std::unique_ptr<MockEndpoint> MockEndpoint::FromFile(const std::filesystem::path& path) {
  std::map<StepKey, std::string> responses;
  std::optional<std::string> fallback;
  for (const JsonLine& line : ReadJsonLines(path)) {
    const json& j = line.value;
    const std::string where = path.string() + ":" + std::to_string(line.line_number);
    if (!j.is_object() || !j.contains("response") || !j["response"].is_string()) {
      throw ConfigError(where + ": mock line needs a string 'response'");
    }
    if (!j.contains("episode_id")) {
      fallback = j["response"].get<std::string>();
      continue;
    }
    if (!responses.emplace(KeyFromJson(j), j["response"].get<std::string>()).second) {
      throw DuplicateKeyError(where + ": duplicate mock response for " + ToString(KeyFromJson(j)));
    }
  }
  return std::make_unique<MockEndpoint>(std::move(responses), std::move(fallback),
                                        "file:" + Sha256File(path).substr(0, 16));
}

Completion MockEndpoint::Complete(const EvaluatorPrompt& prompt) {
  ++calls_;
  auto it = responses_.find(prompt.key);
  if (it != responses_.end()) return {it->second, false};
  if (fallback_) return {*fallback_, false};
  throw EndpointError("mock endpoint has no response for " + ToString(prompt.key));
}

json MockEndpoint::Describe() const { return json{{"kind", "mock"}, {"label", label_}}; }

}  // namespace gapdx
