/// @file cli.h
/// @brief The gapdx command line, callable in-process.

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "gapdx/errors.h"

namespace gapdx {

/// Exit codes: 0 success, 2 input error, 3 endpoint error, 4 protocol error.
int ExitCodeFor(ErrorCategory category);

/// Runs one gapdx invocation. args excludes the program name.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gapdx
