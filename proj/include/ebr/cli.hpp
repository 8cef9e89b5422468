#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ebr::cli {

/// Process exit codes; stable for scripting.
enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,       // validation or evaluation failure
  kUsage = 2,
  kBackendFailure = 3,
};

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ebr::cli
