#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mtbias::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitReplications = 3;
inline constexpr int kExitEstimation = 4;

/// Runs one subcommand. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mtbias::cli
