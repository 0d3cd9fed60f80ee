#pragma once

#include <iosfwd>

namespace segkey::cli {

// Exit codes. Each failure class gets its own code so scripts can tell them
// apart.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kMissingKey = 3,
  kMalformedInput = 4,
  kDiverged = 5,
  kInvalidArgument = 6,
};

// Entry point for the segkey tool. Diagnostics go to `err` as one line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace segkey::cli
