#include "gapdx/run_manifest.h"

#include "gapdx/errors.h"
#include "gapdx/hash.h"
#include "gapdx/jsonl.h"

namespace gapdx {

using json = nlohmann::json;

InputDigest DigestInput(std::string role, const std::filesystem::path& path) {
  return InputDigest{std::move(role), path.generic_string(), Sha256File(path)};
}

json RunManifest::ToJson() const {
  json inputs_json = json::array();
  for (const auto& d : inputs) inputs_json.push_back(json{{"role", d.role}, {"path", d.path}, {"sha256", d.sha256}});
  return json{{"run_id", run_id},
              {"model", model},
              {"dataset", dataset},
              {"dialect", std::string(ToString(dialect))},
              {"trace", trace_path},
              {"manifest", manifest_path},
              {"policy", policy.ToJson()},
              {"policy_hash", policy.Hash()},
              {"endpoint", endpoint},
              {"prompt_version", prompt_version},
              {"prompt_hash", prompt_hash},
              {"seed", seed},
              {"inputs", inputs_json}};
}

RunManifest RunManifest::FromJson(const json& j) {
  try {
    RunManifest run;
    run.run_id = j.value("run_id", std::string());
    run.model = j.value("model", std::string());
    run.dataset = j.value("dataset", std::string());
    const std::string dialect = j.at("dialect").get<std::string>();
    const auto parsed = DialectFromString(dialect);
    if (!parsed) throw ConfigError("unknown dialect '" + dialect + "'");
    run.dialect = *parsed;
    run.trace_path = j.at("trace").get<std::string>();
    run.manifest_path = j.at("manifest").get<std::string>();
    if (j.contains("policy")) run.policy = MatchPolicy::FromJson(j.at("policy"));
    run.endpoint = j.value("endpoint", json());
    run.prompt_version = j.value("prompt_version", std::string());
    run.prompt_hash = j.value("prompt_hash", std::string());
    run.seed = j.value("seed", std::uint64_t{0});
    for (const json& d : j.value("inputs", json::array())) {
      run.inputs.push_back(InputDigest{d.at("role").get<std::string>(), d.at("path").get<std::string>(),
                                       d.at("sha256").get<std::string>()});
    }
    if (j.contains("policy_hash") && j.at("policy_hash") != run.policy.Hash()) {
      throw ManifestTamperError("policy_hash does not match the recorded policy");
    }
    return run;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run manifest: ") + e.what());
  }
}

std::string RunManifest::Hash() const { return Sha256Hex(DumpCompact(ToJson())); }

void RunManifest::Verify() const {
  for (const InputDigest& d : inputs) {
    std::string actual;
    try {
      actual = Sha256File(d.path);
    } catch (const IoError& e) {
      throw ManifestTamperError(d.role + " input " + d.path + " is unreadable: " + e.what());
    }
    if (actual != d.sha256) {
      throw ManifestTamperError(d.role + " input " + d.path + " changed: recorded " + d.sha256.substr(0, 12) +
                                ", found " + actual.substr(0, 12));
    }
  }
}

std::string DeriveRunId(const RunManifest& run) {
  RunManifest copy = run;
  copy.run_id.clear();
  return "run-" + copy.Hash().substr(0, 16);
}

json Provenance(const std::string& command, const RunManifest* run, const std::vector<InputDigest>& parents) {
  json p{{"tool", "gapdx"}, {"tool_version", kToolVersion}, {"command", command}};
  if (run != nullptr) {
    p["run"] = run->ToJson();
    p["run_hash"] = run->Hash();
  }
  if (!parents.empty()) {
    json list = json::array();
    for (const auto& d : parents) list.push_back(json{{"role", d.role}, {"path", d.path}, {"sha256", d.sha256}});
    p["parents"] = list;
  }
  return p;
}

std::string JsonlWithProvenance(const json& provenance, const std::vector<json>& rows) {
  std::string out = DumpCompact(json{{"_provenance", provenance}}) + "\n";
  for (const json& row : rows) out += DumpCompact(row) + "\n";
  return out;
}

}  // namespace gapdx
