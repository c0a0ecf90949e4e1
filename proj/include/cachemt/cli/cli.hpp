#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cachemt::cli {

inline constexpr const char* kVersion = "0.1.0";

// Runs one subcommand. `args` excludes the program name. Returns 0 on
// success, 1 on usage errors and 2 on data or contract errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cachemt::cli
