#pragma once

// The bagp command-line front end as a library, so it can be driven in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace bagp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Runs one command. `args` excludes the program name. Returns the process
/// exit code: 0 success, 2 usage or validation error, 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bagp::cli
