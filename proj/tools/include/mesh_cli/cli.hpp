#pragma once

#include <iosfwd>

namespace mesh::cli {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kSuccess = 0,
  kInternalError = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericError = 4,
};

// Runs one subcommand. Reports go to `out`, diagnostics and progress to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mesh::cli
