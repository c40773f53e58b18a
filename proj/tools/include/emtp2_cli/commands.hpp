#pragma once

#include <iosfwd>

namespace emtp2::cli {

/// Exit codes of the emtp2 tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitNotConverged = 2,
    kExitInvalidInput = 3,
    kExitParseError = 4,
};

/// Entry point shared by the executable and the tests. Subcommands:
/// fit | pipeline | simulate | check | bench.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace emtp2::cli
