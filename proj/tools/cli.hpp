#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cogload::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand. `args` includes the program name. Option values are
/// layered as flags > COGLOAD_* environment > --config JSON > defaults.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

/// Environment variable consulted for an option, e.g. "horizon" -> COGLOAD_HORIZON.
std::string env_name(const std::string& option);

}  // namespace cogload::cli
