#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "brm/error.hpp"

namespace brm::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kBadConfig = 2,
  kIoError = 3,
  kDegenerateData = 4,
  kDimensionMismatch = 5,
};

int exit_code_for(ErrorKind kind) noexcept;

/// Runs one command line (args excludes the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace brm::cli
