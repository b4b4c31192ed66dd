#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace grplq::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
    kSuccess = 0,
    kInputError = 1,
    kNotConverged = 2,
    kInfeasible = 3,
};

/// Runs `grplq <command> ...`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace grplq::cli
