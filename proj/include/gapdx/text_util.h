/// @file text_util.h
/// @brief Small string helpers shared across modules.

#pragma once

#include <string>
#include <string_view>

namespace gapdx::text {

std::string Trim(std::string_view s);

/// ASCII lower-casing; bytes >= 0x80 are left untouched so UTF-8 survives.
std::string AsciiLower(std::string_view s);

/// Collapses runs of ASCII whitespace into one space.
std::string CollapseWhitespace(std::string_view s);

bool IEquals(std::string_view a, std::string_view b);

bool StartsWith(std::string_view s, std::string_view prefix);

/// Lower-case hex encoding.
std::string HexEncode(std::string_view bytes);

}  // namespace gapdx::text
