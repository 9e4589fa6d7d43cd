#pragma once

#include "despeckle/errors.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace despeckle {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitIo = 3,
    kExitShape = 4,  // dimension and tensor-shape errors
    kExitNumeric = 5,
    kExitMissingInput = 6,
};

int exit_code_for(ErrorCategory category);

/// Runs one command. `args` excludes the program name. Failures print a
/// single `error: <category>: <message>` line to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace despeckle
