#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lightfit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitGradCheck = 4;

/// Entry point of the `lightfit` command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lightfit
