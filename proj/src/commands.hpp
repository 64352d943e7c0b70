#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mobcache::cli {

inline constexpr int kExitConfig = 2;
inline constexpr int kExitTrace = 3;
inline constexpr int kExitDivergence = 4;

int cmd_simulate(const std::string& config_path, std::uint64_t seed, const std::string& out,
                 const std::string& policy, const std::string& preset);
int cmd_compare(const std::vector<std::string>& config_paths, const std::vector<std::string>& seed_list,
                const std::string& out);
int cmd_placement(const std::string& instance, const std::string& solver);

// Runs a command and maps library errors to process exit codes.
int run_guarded(const std::function<int()>& command);

}  // namespace mobcache::cli
