/// @file jsonl.h
/// @brief JSON Lines reading and deterministic file writing.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gapdx {

struct JsonLine {
  std::size_t line_number = 0;  // 1-based
  nlohmann::json value;
};

/// Parses every non-blank line. Provenance header lines (objects holding a
/// "_provenance" member) are skipped. Throws IoError if the file cannot be
/// opened and ParseError (with "path:line" context) on malformed lines.
std::vector<JsonLine> ReadJsonLines(const std::filesystem::path& path);

std::string ReadTextFile(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename, creating parent directories.
void WriteTextFile(const std::filesystem::path& path, std::string_view content);

/// Compact, key-sorted, UTF-8-safe single-line dump.
std::string DumpCompact(const nlohmann::json& j);

/// Indented dump with trailing newline, for human-facing JSON files.
std::string DumpPretty(const nlohmann::json& j);

}  // namespace gapdx
