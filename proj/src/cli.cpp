/// @file cli.cpp
/// @brief Subcommands em, gta, sample, project, annotate-serve, reliability,
/// report and plotdata.

#include "gapdx/cli.h"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>

#include "gapdx/annotation.h"
#include "gapdx/diagnostics.h"
#include "gapdx/gta.h"
#include "gapdx/hash.h"
#include "gapdx/jsonl.h"
#include "gapdx/run_manifest.h"
#include "gapdx/sampler.h"
#include "gapdx/text_util.h"

namespace gapdx {

using json = nlohmann::json;
namespace fs = std::filesystem;

int ExitCodeFor(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kInput:
      return 2;
    case ErrorCategory::kEndpoint:
      return 3;
    case ErrorCategory::kProtocol:
      return 4;
  }
  return 2;
}

namespace {

const char* CategoryName(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kInput:
      return "input";
    case ErrorCategory::kEndpoint:
      return "endpoint";
    case ErrorCategory::kProtocol:
      return "protocol";
  }
  return "input";
}

// Options shared by the commands that load a run.
struct RunFlags {
  std::string run_manifest;
  std::string trace;
  std::string manifest;
  std::string dialect = "agentcpm_json";
  std::string model;
  std::string dataset;
  std::string policy;
  std::string keys;
  std::string data_root;
  bool no_conclusion = false;
  std::uint64_t seed = 0;
  std::string out;
};

struct GtaFlags {
  std::string endpoint_url;
  std::string model_name;
  std::string api_key_env;
  std::string image_mode = "base64";
  std::string mock;  // "oracle"
  std::string mock_constant;
  std::string mock_responses;
  int concurrency = 4;
  int max_new_tokens = 512;
  int attempts = 3;
  int backoff_ms = 500;
  bool include_instruction = false;
};

void AddRunFlags(CLI::App* cmd, RunFlags& f, bool needs_out = true) {
  cmd->add_option("--run-manifest", f.run_manifest, "Load the run from a saved run.json (hashes are verified)");
  cmd->add_option("--trace", f.trace, "Model trace JSONL");
  cmd->add_option("--manifest", f.manifest, "Dataset manifest JSONL");
  cmd->add_option("--dialect", f.dialect, "agentcpm_json | uitars_dsl | guiowl_toolcall")->capture_default_str();
  cmd->add_option("--model", f.model, "Model name recorded in outputs");
  cmd->add_option("--dataset", f.dataset, "Dataset name recorded in outputs");
  cmd->add_option("--policy", f.policy, "Match policy JSON file");
  cmd->add_option("--keys", f.keys, "Restrict to the steps of a key list");
  cmd->add_option("--data-root", f.data_root, "Directory screenshots are resolved against");
  cmd->add_flag("--no-conclusion", f.no_conclusion, "GUI-Owl: leave the conclusion block out of the CoT");
  cmd->add_option("--seed", f.seed, "Seed recorded in the run")->capture_default_str();
  auto* out = cmd->add_option("--out", f.out, "Output directory");
  if (needs_out) out->required();
}

TraceDialect ParseDialectName(const std::string& name) {
  const auto d = DialectFromString(name);
  if (!d) throw ConfigError("unknown dialect '" + name + "'");
  return *d;
}

MatchPolicy LoadPolicy(const std::string& path) {
  if (path.empty()) return MatchPolicy{};
  try {
    return MatchPolicy::FromJson(json::parse(ReadTextFile(path)));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

json ReadJsonFile(const std::string& path) {
  try {
    return json::parse(ReadTextFile(path));
  } catch (const json::parse_error& e) {
    throw ParseError("json", e.byte, path + ": " + e.what());
  } catch (const json::exception& e) {
    throw ParseError("json", 0, path + ": " + e.what());
  }
}

/// The _provenance header of a gapdx JSONL output, or null.
json ReadProvenance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string first;
  std::getline(in, first);
  try {
    const json j = json::parse(first);
    if (j.is_object() && j.contains("_provenance")) return j["_provenance"];
  } catch (const json::exception&) {
  }
  return nullptr;
}

RunManifest BuildRun(const RunFlags& f, const std::string& command) {
  if (!f.run_manifest.empty()) {
    RunManifest run = RunManifest::FromJson(ReadJsonFile(f.run_manifest));
    run.Verify();
    return run;
  }
  if (f.trace.empty() || f.manifest.empty()) throw ConfigError(command + " needs --trace and --manifest (or --run-manifest)");
  RunManifest run;
  run.model = f.model;
  run.dataset = f.dataset;
  run.dialect = ParseDialectName(f.dialect);
  run.trace_path = f.trace;
  run.manifest_path = f.manifest;
  run.policy = LoadPolicy(f.policy);
  run.seed = f.seed;
  run.inputs.push_back(DigestInput("trace", f.trace));
  run.inputs.push_back(DigestInput("manifest", f.manifest));
  if (!f.policy.empty()) run.inputs.push_back(DigestInput("policy", f.policy));
  if (!f.keys.empty()) run.inputs.push_back(DigestInput("keys", f.keys));
  return run;
}

std::vector<StepRecord> LoadRecords(const RunManifest& run, const RunFlags& f) {
  LoadOptions options;
  options.guiowl.include_conclusion = !f.no_conclusion;
  options.data_root = f.data_root;
  std::vector<StepRecord> records = LoadRun(run.trace_path, run.dialect, run.manifest_path, options);
  std::string keys_path = f.keys;
  if (keys_path.empty()) {
    for (const auto& d : run.inputs) {
      if (d.role == "keys") keys_path = d.path;
    }
  }
  if (!keys_path.empty()) records = Project(KeyList::FromJson(ReadJsonFile(keys_path)), records);
  return records;
}

std::vector<json> ToRows(const std::vector<StepJudgment>& judgments) {
  std::vector<json> rows;
  rows.reserve(judgments.size());
  for (const auto& j : judgments) rows.push_back(j.ToJson());
  return rows;
}

std::string PercentText(std::uint64_t count, std::uint64_t n) { return FormatPercent(count, n) + "%"; }

// ---------------------------------------------------------------------------

int CmdEm(const RunFlags& f, std::ostream& out) {
  RunManifest run = BuildRun(f, "em");
  run.run_id = DeriveRunId(run);
  const std::vector<StepRecord> records = LoadRecords(run, f);
  const std::vector<StepJudgment> judgments = JudgeEmOnly(records, run.policy);
  const RunSummary summary = Summarize(judgments, run.policy.Hash());

  const fs::path dir(f.out);
  const json provenance = Provenance("em", &run);
  WriteTextFile(dir / "run.json", DumpPretty(run.ToJson()));
  WriteTextFile(dir / "em_judgments.jsonl", JsonlWithProvenance(provenance, ToRows(judgments)));
  WriteTextFile(dir / "em_summary.json",
                DumpPretty(json{{"_provenance", provenance},
                                {"model", run.model},
                                {"dataset", run.dataset},
                                {"summary", summary.ToJson()}}));
  out << "steps=" << summary.n_steps << " em=" << PercentText(summary.em_count, summary.n_steps) << "\n";
  return 0;
}

std::unique_ptr<InferenceEndpoint> MakeEndpoint(const GtaFlags& g, const std::vector<StepRecord>& records,
                                                RunManifest& run) {
  const int modes = !g.mock.empty() + !g.mock_constant.empty() + !g.mock_responses.empty() + !g.endpoint_url.empty();
  if (modes != 1) {
    throw ConfigError("choose exactly one of --endpoint-url, --mock oracle, --mock-constant, --mock-responses");
  }
  std::unique_ptr<InferenceEndpoint> endpoint;
  if (!g.mock.empty()) {
    if (g.mock != "oracle") throw ConfigError("unknown --mock mode '" + g.mock + "'");
    endpoint = MockEndpoint::Oracle(records);
  } else if (!g.mock_constant.empty()) {
    endpoint = MockEndpoint::Constant(g.mock_constant, "constant:" + Sha256Hex(g.mock_constant).substr(0, 16));
  } else if (!g.mock_responses.empty()) {
    endpoint = MockEndpoint::FromFile(g.mock_responses);
    run.inputs.push_back(DigestInput("mock_responses", g.mock_responses));
  } else {
    HttpEndpointConfig config;
    config.url = g.endpoint_url;
    config.model_name = g.model_name;
    config.api_key_env = g.api_key_env;
    if (g.image_mode == "path") {
      config.image_mode = ImageMode::kPath;
    } else if (g.image_mode != "base64") {
      throw ConfigError("--image-mode must be base64 or path");
    }
    endpoint = std::make_unique<HttpEndpoint>(config);
  }
  return endpoint;
}

int CmdGta(const RunFlags& f, const GtaFlags& g, std::ostream& out, std::ostream& err) {
  RunManifest run = BuildRun(f, "gta");
  const std::vector<StepRecord> records = LoadRecords(run, f);
  const bool loaded_manifest = !f.run_manifest.empty();
  std::unique_ptr<InferenceEndpoint> endpoint = MakeEndpoint(g, records, run);
  if (loaded_manifest && !run.endpoint.is_null() && run.endpoint != endpoint->Describe()) {
    throw ConfigError("endpoint differs from the one recorded in the run manifest");
  }
  run.endpoint = endpoint->Describe();
  run.endpoint["decode"] = json{{"temperature", 0}, {"max_new_tokens", g.max_new_tokens}};
  run.endpoint["include_instruction"] = g.include_instruction;
  run.prompt_version = kPromptVersion;
  run.prompt_hash = PromptHash();
  run.run_id = DeriveRunId(run);

  EvaluateOptions options;
  options.decode = DecodePolicy(0.0, g.max_new_tokens);
  options.include_instruction = g.include_instruction;
  options.concurrency = g.concurrency;
  options.infer.max_transport_attempts = g.attempts;
  options.infer.backoff = std::chrono::milliseconds(g.backoff_ms);
  const EvaluationResult result = EvaluateRun(records, *endpoint, options);

  std::vector<StepRecord> scored;
  for (const auto& r : records) {
    if (!result.unavailable.count(r.key)) scored.push_back(r);
  }
  if (scored.empty() && !records.empty()) {
    throw EndpointError("evaluator unavailable for all " + std::to_string(records.size()) + " steps: " +
                        result.unavailable.begin()->second);
  }
  const std::vector<StepJudgment> judgments = JudgeRun(scored, result.verdicts, run.policy);
  RunSummary summary = Summarize(judgments, run.policy.Hash(), run.prompt_version, run.prompt_hash);
  summary.excluded = result.unavailable.size();

  const fs::path dir(f.out);
  const json provenance = Provenance("gta", &run);
  std::vector<json> verdict_rows;
  for (const auto& [key, verdict] : result.verdicts) {
    json row = KeyToJson(key);
    row.update(VerdictToJson(verdict));
    verdict_rows.push_back(std::move(row));
  }
  json unavailable = json::array();
  for (const auto& [key, message] : result.unavailable) {
    json row = KeyToJson(key);
    row["error"] = message;
    unavailable.push_back(std::move(row));
  }
  std::uint64_t parse_failures = 0;
  for (const auto& j : judgments) parse_failures += j.gta_reason == match_reason::kParseFailure;

  WriteTextFile(dir / "run.json", DumpPretty(run.ToJson()));
  WriteTextFile(dir / "verdicts.jsonl", JsonlWithProvenance(provenance, verdict_rows));
  WriteTextFile(dir / "judgments.jsonl", JsonlWithProvenance(provenance, ToRows(judgments)));
  WriteTextFile(dir / "summary.json", DumpPretty(json{{"_provenance", provenance},
                                                      {"model", run.model},
                                                      {"dataset", run.dataset},
                                                      {"summary", summary.ToJson()},
                                                      {"evaluator_parse_failures", parse_failures},
                                                      {"evaluator_unavailable", unavailable}}));
  const std::uint64_t n = summary.n_steps;
  out << "steps=" << n << " excluded=" << summary.excluded << " em=" << PercentText(summary.em_count, n)
      << " gta=" << PercentText(summary.gta_count(), n) << " eg=" << PercentText(summary.eg_count(), n)
      << " rg=" << PercentText(summary.rg_count(), n) << " ideal=" << PercentText(summary.ideal_count(), n) << "\n";
  if (!result.unavailable.empty()) {
    err << "warning: evaluator unavailable for " << result.unavailable.size() << " step(s); excluded from both metrics\n";
  }
  return 0;
}

struct SampleFlags {
  std::string manifest;
  std::uint64_t n = 0;
  std::uint64_t k = 0;
  std::uint64_t seed = 0;
  std::string baseline_run;
  std::string out;
};

int CmdSample(const SampleFlags& f, std::ostream& out) {
  const std::vector<GroundTruthStep> steps = LoadManifest(f.manifest);
  std::vector<StratumMember> population;
  population.reserve(steps.size());
  for (const auto& s : steps) population.emplace_back(s.key, std::string(ToString(ActionClassOf(s.gt_action))));
  StrataInput input{ClassCounts(population), f.n, f.k, f.seed};
  const StrataPlan plan = Allocate(input);
  KeyList keys = Draw(plan, population, f.seed);
  const InputDigest manifest_digest = DigestInput("manifest", f.manifest);
  keys.baseline_run = f.baseline_run.empty() ? "manifest:" + manifest_digest.sha256.substr(0, 16) : f.baseline_run;

  const json provenance = Provenance("sample", nullptr, {manifest_digest});
  json plan_json = plan.ToJson();
  plan_json["_provenance"] = provenance;
  json keys_json = keys.ToJson();
  keys_json["_provenance"] = provenance;
  keys_json["plan_hash"] = Sha256Hex(DumpCompact(plan.ToJson()));
  const fs::path dir(f.out);
  WriteTextFile(dir / "plan.json", DumpPretty(plan_json));
  WriteTextFile(dir / "keys.json", DumpPretty(keys_json));
  for (const auto& s : plan.strata) out << s.name << "=" << s.take << " ";
  out << "total=" << keys.keys.size() << "\n";
  return 0;
}

struct ProjectFlags {
  std::string keys;
  std::string trace;
  std::string manifest;
  std::string dialect = "agentcpm_json";
  std::string data_root;
  std::string out;
};

// Raw lines of a JSONL file keyed by step, provenance lines skipped.
std::map<StepKey, std::string> RawLinesByKey(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::map<StepKey, std::string> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (text::Trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("jsonl", e.byte, path + ":" + std::to_string(number) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ParseError("jsonl", 0, path + ":" + std::to_string(number) + ": " + e.what());
    }
    if (j.contains("_provenance")) continue;
    lines[KeyFromJson(j)] = line;
  }
  return lines;
}

int CmdProject(const ProjectFlags& f, std::ostream& out) {
  const KeyList keys = KeyList::FromJson(ReadJsonFile(f.keys));
  LoadOptions options;
  options.data_root = f.data_root;
  std::vector<StepRecord> records = LoadRun(f.trace, ParseDialectName(f.dialect), f.manifest, options);
  // Steps the model never produced do not count as present in its run.
  std::erase_if(records, [](const StepRecord& r) { return r.diagnostic == "missing_prediction"; });
  const std::vector<StepRecord> projected = Project(keys, records);

  const auto trace_lines = RawLinesByKey(f.trace);
  const auto manifest_lines = RawLinesByKey(f.manifest);
  const json provenance =
      Provenance("project", nullptr,
                 {DigestInput("keys", f.keys), DigestInput("trace", f.trace), DigestInput("manifest", f.manifest)});
  std::string trace_out = DumpCompact(json{{"_provenance", provenance}}) + "\n";
  std::string manifest_out = trace_out;
  for (const StepRecord& r : projected) {
    trace_out += trace_lines.at(r.key) + "\n";
    manifest_out += manifest_lines.at(r.key) + "\n";
  }
  const fs::path dir(f.out);
  WriteTextFile(dir / "trace.jsonl", trace_out);
  WriteTextFile(dir / "manifest.jsonl", manifest_out);
  out << "projected " << projected.size() << " steps\n";
  return 0;
}

struct ServeFlags {
  std::string keys;
  std::string trace;
  std::string manifest;
  std::string dialect = "agentcpm_json";
  std::string data_root;
  std::vector<std::string> annotators;
  std::uint64_t seed = 0;
  std::string log;
  std::string host = "127.0.0.1";
  int port = 8080;
};

int CmdServe(const ServeFlags& f, std::ostream& out) {
  const KeyList keys = KeyList::FromJson(ReadJsonFile(f.keys));
  const std::vector<StepRecord> records =
      Project(keys, LoadRun(f.trace, ParseDialectName(f.dialect), f.manifest, LoadOptions{{}, f.data_root}));
  std::vector<AnnotationTask> tasks;
  for (const auto& r : records) {
    AnnotationTask task = MakeTask(r);
    // Screenshots are served relative to the data root.
    if (!f.data_root.empty()) {
      task.screenshot_ref = fs::path(task.screenshot_ref).lexically_relative(f.data_root).generic_string();
    }
    tasks.push_back(std::move(task));
  }
  AnnotationStore store(std::move(tasks), CreateAssignment(keys, f.annotators, f.seed), f.seed, f.log);
  AnnotationServer server(store, f.data_root);
  const int port = server.Bind(f.host, f.port);
  out << "listening on http://" << f.host << ":" << port << "\n" << std::flush;
  server.Serve();
  return 0;
}

struct ReliabilityFlags {
  std::string annotations;
  std::string judgments;
  std::string out;
};

int CmdReliability(const ReliabilityFlags& f, std::ostream& out) {
  std::vector<AnnotationRecord> annotations;
  for (const JsonLine& line : ReadJsonLines(f.annotations)) annotations.push_back(AnnotationRecord::FromJson(line.value));
  std::map<StepKey, StepJudgment> judgments;
  for (const JsonLine& line : ReadJsonLines(f.judgments)) {
    StepJudgment j = StepJudgment::FromJson(line.value);
    const StepKey key = j.key;
    judgments.emplace(key, std::move(j));
  }
  const ConsensusSet consensus = Consensus(annotations);
  const AgreementStats agreement = Agreement(annotations);
  const Reliability reliability = EvaluatorReliability(consensus, judgments);

  const json upstream = ReadProvenance(f.judgments);
  std::map<std::string, std::uint64_t> discarded;
  for (const auto& [key, reason] : consensus.discarded) ++discarded[std::string(ToString(reason))];
  json result{{"_provenance", Provenance("reliability", nullptr,
                                         {DigestInput("annotations", f.annotations),
                                          DigestInput("judgments", f.judgments)})},
              {"model", upstream.is_object() ? upstream.value("/run/model"_json_pointer, std::string()) : ""},
              {"dataset", upstream.is_object() ? upstream.value("/run/dataset"_json_pointer, std::string()) : ""},
              {"reliability", reliability.ToJson()},
              {"accuracy_pct", FormatPercent(reliability.agreements, reliability.valid)},
              {"consensus_keys", consensus.consensus.size()},
              {"discarded", discarded},
              {"agreement", agreement.ToJson()}};
  if (!f.out.empty()) WriteTextFile(f.out, DumpPretty(result));
  out << "valid=" << reliability.valid << " agreements=" << reliability.agreements
      << " accuracy=" << PercentText(reliability.agreements, reliability.valid) << "\n";
  return 0;
}

struct ReportFlags {
  std::vector<std::string> summaries;
  std::vector<std::string> reliabilities;
  std::string format = "json";
  std::string out;
};

int CmdReport(const ReportFlags& f, ReportFormat format, std::ostream& out) {
  std::vector<ReportEntry> entries;
  std::set<std::pair<std::string, std::string>> seen;
  for (const std::string& path : f.summaries) {
    const json doc = ReadJsonFile(path);
    ReportEntry e;
    e.model = doc.value("model", std::string());
    e.dataset = doc.value("dataset", std::string());
    if (!doc.contains("summary")) throw ParseError("summary", 0, path + " has no 'summary'");
    e.summary = RunSummary::FromJson(doc["summary"]);
    e.provenance = json{{"file", DigestInput("summary", path).sha256}};
    if (doc.contains("_provenance") && doc["_provenance"].contains("run_hash")) {
      e.provenance["run_hash"] = doc["_provenance"]["run_hash"];
    }
    if (!seen.emplace(e.model, e.dataset).second) {
      throw DuplicateKeyError("two summaries for " + e.model + " / " + e.dataset);
    }
    entries.push_back(std::move(e));
  }
  for (const std::string& path : f.reliabilities) {
    const json doc = ReadJsonFile(path);
    const std::string model = doc.value("model", std::string());
    const std::string dataset = doc.value("dataset", std::string());
    auto it = std::find_if(entries.begin(), entries.end(),
                           [&](const ReportEntry& e) { return e.model == model && e.dataset == dataset; });
    if (it == entries.end()) throw JoinError(path + ": no summary for " + model + " / " + dataset);
    it->reliability = Reliability::FromJson(doc.at("reliability"));
  }
  const auto written = EmitReport(std::move(entries), format, f.out);
  for (const auto& p : written) out << p.generic_string() << "\n";
  return 0;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"gapdx: reasoning-execution gap diagnostics for GUI-agent traces", "gapdx"};
  app.require_subcommand(1);
  // Subcommands inherit this, so --json-errors may also follow the subcommand.
  app.fallthrough();
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors, "Print errors as JSON on stderr");

  RunFlags em_flags;
  auto* em = app.add_subcommand("em", "Execution accuracy per step");
  AddRunFlags(em, em_flags);

  RunFlags gta_run;
  GtaFlags gta_flags;
  auto* gta = app.add_subcommand("gta", "Reasoning accuracy through the evaluator, merged with EM");
  AddRunFlags(gta, gta_run);
  gta->add_option("--endpoint-url", gta_flags.endpoint_url, "Chat-completions URL of the evaluator");
  gta->add_option("--model-name", gta_flags.model_name, "Evaluator model name");
  gta->add_option("--api-key-env", gta_flags.api_key_env, "Environment variable holding the API key");
  gta->add_option("--image-mode", gta_flags.image_mode, "base64 | path")->capture_default_str();
  gta->add_option("--mock", gta_flags.mock, "Built-in mock endpoint: oracle");
  gta->add_option("--mock-constant", gta_flags.mock_constant, "Mock endpoint answering every step with this text");
  gta->add_option("--mock-responses", gta_flags.mock_responses, "Mock endpoint fixture JSONL");
  gta->add_option("--concurrency", gta_flags.concurrency, "Concurrent evaluator requests")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gta->add_option("--max-new-tokens", gta_flags.max_new_tokens)->capture_default_str()->check(CLI::PositiveNumber);
  gta->add_option("--attempts", gta_flags.attempts, "Transport attempts per request")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gta->add_option("--backoff-ms", gta_flags.backoff_ms)->capture_default_str()->check(CLI::NonNegativeNumber);
  gta->add_flag("--include-instruction", gta_flags.include_instruction, "Show the task instruction to the evaluator");

  SampleFlags sample_flags;
  auto* sample = app.add_subcommand("sample", "Stratified audit sample over ground-truth action classes");
  sample->add_option("--manifest", sample_flags.manifest)->required();
  sample->add_option("--n", sample_flags.n, "Target size")->required();
  sample->add_option("--k", sample_flags.k, "Minimum per class")->capture_default_str();
  sample->add_option("--seed", sample_flags.seed)->capture_default_str();
  sample->add_option("--baseline-run", sample_flags.baseline_run, "Label of the run the keys are drawn for");
  sample->add_option("--out", sample_flags.out)->required();

  ProjectFlags project_flags;
  auto* project = app.add_subcommand("project", "Filter a model's trace and manifest to a key list");
  project->add_option("--keys", project_flags.keys)->required();
  project->add_option("--trace", project_flags.trace)->required();
  project->add_option("--manifest", project_flags.manifest)->required();
  project->add_option("--dialect", project_flags.dialect)->capture_default_str();
  project->add_option("--data-root", project_flags.data_root);
  project->add_option("--out", project_flags.out)->required();

  ServeFlags serve_flags;
  auto* serve = app.add_subcommand("annotate-serve", "Serve the dual-annotation API");
  serve->add_option("--keys", serve_flags.keys)->required();
  serve->add_option("--trace", serve_flags.trace)->required();
  serve->add_option("--manifest", serve_flags.manifest)->required();
  serve->add_option("--dialect", serve_flags.dialect)->capture_default_str();
  serve->add_option("--data-root", serve_flags.data_root, "Screenshot directory, served at /screenshots/");
  serve->add_option("--annotators", serve_flags.annotators, "Annotator ids")->delimiter(',')->required();
  serve->add_option("--seed", serve_flags.seed)->capture_default_str();
  serve->add_option("--log", serve_flags.log, "Append-only event log")->required();
  serve->add_option("--host", serve_flags.host)->capture_default_str();
  serve->add_option("--port", serve_flags.port)->capture_default_str();

  ReliabilityFlags rel_flags;
  auto* reliability = app.add_subcommand("reliability", "Evaluator accuracy against annotator consensus");
  reliability->add_option("--annotations", rel_flags.annotations, "Exported annotation JSONL")->required();
  reliability->add_option("--judgments", rel_flags.judgments, "judgments.jsonl from gta")->required();
  reliability->add_option("--out", rel_flags.out, "Write the result JSON here");

  ReportFlags report_flags;
  auto* report = app.add_subcommand("report", "Merge summaries into json, csv or plot data");
  report->add_option("--summary", report_flags.summaries, "summary.json files")->required();
  report->add_option("--reliability", report_flags.reliabilities, "reliability JSON files");
  report->add_option("--format", report_flags.format, "json | csv | plotdata")->capture_default_str();
  report->add_option("--out", report_flags.out)->required();

  ReportFlags plot_flags;
  auto* plotdata = app.add_subcommand("plotdata", "Series files for plotting");
  plotdata->add_option("--summary", plot_flags.summaries)->required();
  plotdata->add_option("--reliability", plot_flags.reliabilities);
  plotdata->add_option("--out", plot_flags.out)->required();

  std::vector<const char*> argv{"gapdx"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (em->parsed()) return CmdEm(em_flags, out);
    if (gta->parsed()) return CmdGta(gta_run, gta_flags, out, err);
    if (sample->parsed()) return CmdSample(sample_flags, out);
    if (project->parsed()) return CmdProject(project_flags, out);
    if (serve->parsed()) return CmdServe(serve_flags, out);
    if (reliability->parsed()) return CmdReliability(rel_flags, out);
    if (report->parsed()) {
      const auto format = ReportFormatFromString(report_flags.format);
      if (!format) throw ConfigError("unknown report format '" + report_flags.format + "'");
      return CmdReport(report_flags, *format, out);
    }
    if (plotdata->parsed()) return CmdReport(plot_flags, ReportFormat::kPlotData, out);
  } catch (const Error& e) {
    if (json_errors) {
      err << DumpCompact(json{{"error", e.name()}, {"category", CategoryName(e.category())}, {"message", e.what()}})
          << "\n";
    } else {
      err << "gapdx: " << e.name() << ": " << e.what() << "\n";
    }
    return ExitCodeFor(e.category());
  } catch (const std::exception& e) {
    if (json_errors) {
      err << DumpCompact(json{{"error", "InternalError"}, {"category", "internal"}, {"message", e.what()}}) << "\n";
    } else {
      err << "gapdx: internal error: " << e.what() << "\n";
    }
    return 1;
  }
  return 2;
}

}  // namespace gapdx
