#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pageprobe {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;  // store or driver failure

// Runs the command line args (args[0] is the program name). Machine-readable
// output goes to out (or the --out file); diagnostics go to err only.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pageprobe
