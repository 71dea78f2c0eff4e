#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace projcluster::cli {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
  kOk = 0,
  kInvalidInput = 1,  // usage, parse, validation or oracle failure
  kIoFailure = 2,
};

/// Runs the tool with `args` (argv without the program name), writing
/// results to `out` and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace projcluster::cli
