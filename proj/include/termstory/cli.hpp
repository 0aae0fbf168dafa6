#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace termstory::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand. `args` excludes the program name. Progress and
/// results go to `out` as JSON lines; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace termstory::cli
