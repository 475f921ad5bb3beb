/// @file run_manifest.h
/// @brief Run descriptors with content hashes, and the provenance block every
/// output file carries.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapdx/match.h"
#include "gapdx/trace.h"

namespace gapdx {

inline constexpr const char* kToolVersion = "0.1.0";

struct InputDigest {
  std::string role;  // "trace", "manifest", "keys", ...
  std::string path;
  std::string sha256;

  bool operator==(const InputDigest&) const = default;
};

InputDigest DigestInput(std::string role, const std::filesystem::path& path);

struct RunManifest {
  std::string run_id;
  std::string model;
  std::string dataset;
  TraceDialect dialect = TraceDialect::kAgentCpmJson;
  std::string trace_path;
  std::string manifest_path;
  MatchPolicy policy;
  nlohmann::json endpoint;  // null when no evaluator is involved
  std::string prompt_version;
  std::string prompt_hash;
  std::uint64_t seed = 0;
  std::vector<InputDigest> inputs;

  nlohmann::json ToJson() const;
  static RunManifest FromJson(const nlohmann::json& j);
  /// sha256 of the compact JSON form.
  std::string Hash() const;

  /// Recomputes every input digest; throws ManifestTamperError on mismatch.
  void Verify() const;
};

/// run_id derived from the input digests and settings, so identical inputs
/// give identical ids.
std::string DeriveRunId(const RunManifest& run);

/// Provenance block: tool version, command, run manifest, its hash, and the
/// digests of any upstream gapdx outputs consumed.
nlohmann::json Provenance(const std::string& command, const RunManifest* run,
                          const std::vector<InputDigest>& parents = {});

/// JSONL text with a leading {"_provenance": ...} line.
std::string JsonlWithProvenance(const nlohmann::json& provenance, const std::vector<nlohmann::json>& rows);

}  // namespace gapdx
