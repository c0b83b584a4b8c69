#pragma once
// Command-line front end: simulate, eval and predict.

#include <iosfwd>

namespace crowdstream::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kNumericalFailure = 3,
};

// Runs the command line with explicit streams so it can be driven in-process.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace crowdstream::cli
