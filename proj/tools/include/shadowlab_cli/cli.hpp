#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace shadowlab::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kRuntime = 3 };

// Parses argv (argv[0] is the program name) and runs one subcommand. Machine-readable
// output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace shadowlab::cli
