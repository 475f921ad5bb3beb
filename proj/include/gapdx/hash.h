/// @file hash.h
/// @brief SHA-256 content hashing for provenance.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace gapdx {

/// Lower-case hex SHA-256 digest.
std::string Sha256Hex(std::string_view data);

std::string Sha256File(const std::filesystem::path& path);

std::string Base64Encode(std::string_view data);

}  // namespace gapdx
