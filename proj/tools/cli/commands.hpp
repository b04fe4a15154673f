#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace heightlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Runs the command line (args excludes the program name) and returns the
/// process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace heightlab::cli
