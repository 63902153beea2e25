#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace structpop::cli {

/// Process exit codes. Stable across releases.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kSubcritical = 3,
  kNotConverged = 4,
  kIo = 5,
  kConfig = 6,
  kDomain = 7,
  kVerifyFailed = 8,
};

/// Runs one invocation. args excludes the program name. The summary JSON
/// goes to out; errors go to err as a single JSON object.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace structpop::cli
