#pragma once

#include <ostream>

namespace satsrail::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// Environment variable naming the directory searched for relative --config
// paths (and for scenario.json when --config is omitted).
inline constexpr const char* kConfigDirEnv = "SATSRAIL_CONFIG_DIR";

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace satsrail::cli
