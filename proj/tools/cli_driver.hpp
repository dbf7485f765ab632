#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace plateopt::cli {

inline constexpr const char* kVersion = "1.0.0";

// Runs the command line; returns the process exit code
// (0 success, 1 numerical/model failure, 2 usage/config error).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace plateopt::cli
