/// @file gta.h
/// @brief Reasoning accuracy: maps a CoT to the action it implies through an
/// instruction-following VLM, then scores it with the EM matcher.

#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapdx/action.h"
#include "gapdx/match.h"
#include "gapdx/trace.h"

namespace gapdx {

/// Greedy decoding only. Any other temperature is rejected on construction.
class DecodePolicy {
 public:
  DecodePolicy() = default;
  explicit DecodePolicy(double temperature, int max_new_tokens = 512);

  double temperature() const { return 0.0; }
  int max_new_tokens() const { return max_new_tokens_; }

 private:
  int max_new_tokens_ = 512;
};

struct EvaluatorRequest {
  StepKey key;
  std::string cot;
  HistoryContext history;
  std::string screenshot_ref;
  std::optional<ScreenGeometry> geometry;
  DecodePolicy decode;
  /// Task instruction; rendered only when set.
  std::optional<std::string> instruction;
};

struct EvaluatorPrompt {
  StepKey key;  // routing only, never rendered
  std::string system_text;
  std::string user_text;
  std::vector<std::string> image_refs;
  DecodePolicy decode;
};

inline constexpr const char* kPromptVersion = "gta-eval-prompt/v1";

/// sha256 over the prompt templates; recorded next to kPromptVersion.
std::string PromptHash();

EvaluatorPrompt BuildEvaluatorPrompt(const EvaluatorRequest& request);

/// Appends the format reminder used for the single parse-failure retry.
EvaluatorPrompt WithFormatReminder(EvaluatorPrompt prompt);

struct Completion {
  std::string text;
  bool truncated = false;  // generation hit max_new_tokens
};

/// Chat-style inference backend. Implementations throw EndpointError on
/// transport failure and must be callable from several threads at once.
class InferenceEndpoint {
 public:
  virtual ~InferenceEndpoint() = default;
  virtual Completion Complete(const EvaluatorPrompt& prompt) = 0;
  /// Stable description for provenance (no secrets).
  virtual nlohmann::json Describe() const = 0;
};

/// Fixture-driven endpoint: canned response per step key, else a default.
class MockEndpoint : public InferenceEndpoint {
 public:
  MockEndpoint(std::map<StepKey, std::string> responses, std::optional<std::string> fallback, std::string label = "mock");

  /// Answers every step with its ground-truth action in the evaluator schema.
  static std::unique_ptr<MockEndpoint> Oracle(const std::vector<StepRecord>& records);
  /// Answers every step with the same text.
  static std::unique_ptr<MockEndpoint> Constant(std::string response, std::string label = "constant");
  /// Loads a JSONL file of {episode_id, step_id, response}; a line without a
  /// key sets the fallback.
  static std::unique_ptr<MockEndpoint> FromFile(const std::filesystem::path& path);

  Completion Complete(const EvaluatorPrompt& prompt) override;
  nlohmann::json Describe() const override;

  std::size_t calls() const { return calls_.load(); }

 private:
  std::map<StepKey, std::string> responses_;
  std::optional<std::string> fallback_;
  std::string label_;
  std::atomic<std::size_t> calls_{0};
};

enum class ImageMode { kBase64, kPath };

struct HttpEndpointConfig {
  std::string url;  // full chat-completions URL
  std::string model_name;
  std::string api_key_env;  // variable name; the key itself is never stored
  ImageMode image_mode = ImageMode::kBase64;
  std::chrono::seconds timeout{120};
};

/// OpenAI-compatible chat-completions client.
class HttpEndpoint : public InferenceEndpoint {
 public:
  explicit HttpEndpoint(HttpEndpointConfig config);
  Completion Complete(const EvaluatorPrompt& prompt) override;
  nlohmann::json Describe() const override;

  /// Request body sent for a prompt; exposed for tests.
  nlohmann::json RequestBody(const EvaluatorPrompt& prompt) const;

 private:
  HttpEndpointConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
};

/// Renders an action as an AgentCPM-schema output the parser maps back to an
/// action of the same class and parameters.
std::string ToAgentCpmJson(const CanonicalAction& action);

struct EvaluatorVerdict {
  std::optional<CanonicalAction> implied_action;
  std::string raw_response;
  bool parse_ok = false;
  int attempts = 0;
  /// Why parsing failed, empty when parse_ok.
  std::string failure;
};

struct InferOptions {
  int max_transport_attempts = 3;
  std::chrono::milliseconds backoff{0};
};

/// One request, one format-reminder retry on parse failure. A truncated reply
/// is a parse failure and is not retried. Transport failures are retried with
/// an identical payload up to max_transport_attempts, then EndpointError.
EvaluatorVerdict InferImpliedAction(const EvaluatorRequest& request, InferenceEndpoint& endpoint,
                                    const InferOptions& options = {});

namespace gta_reason {
inline constexpr const char* kEmptyCot = "empty_cot";
}  // namespace gta_reason

struct GtaResult {
  int gta = 0;
  std::string reason;
};

/// Reasoning accuracy of one step, scored with the same policy as EM.
GtaResult GtaStep(const StepRecord& record, const EvaluatorVerdict& verdict, const MatchPolicy& policy);

EvaluatorRequest RequestFor(const StepRecord& record, const DecodePolicy& decode, bool include_instruction);

struct EvaluateOptions {
  DecodePolicy decode;
  bool include_instruction = false;
  int concurrency = 4;
  InferOptions infer;
  /// Called after each finished step with (done, total); may run on any worker.
  std::function<void(std::size_t, std::size_t)> progress;
};

struct EvaluationResult {
  std::map<StepKey, EvaluatorVerdict> verdicts;
  /// Steps whose endpoint stayed unreachable, with the last error message.
  std::map<StepKey, std::string> unavailable;
};

/// Evaluates every record. Empty CoTs get a failed verdict without a request.
/// Result content does not depend on concurrency or completion order.
EvaluationResult EvaluateRun(const std::vector<StepRecord>& records, InferenceEndpoint& endpoint,
                             const EvaluateOptions& options = {});

nlohmann::json VerdictToJson(const EvaluatorVerdict& verdict);

}  // namespace gapdx
