#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cddm {

// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitCheckpoint = 4,
  kExitIo = 5,
  kExitDuplicateRun = 6,
  kExitTrainingAborted = 7,
};

// args excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cddm
