#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace promil {

// Exit codes of the promil command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitNumerical = 3,
};

// Runs the CLI on `args` (args[0] is the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace promil
