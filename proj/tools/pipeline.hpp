#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace trajan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitConfig = 2;

/// Runs one command line (without the program name) and returns the exit
/// status. Diagnostics go to `err` as key=value lines.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a, used for manifest hashes.
std::uint64_t fnv1a64(std::string_view data);
std::string hash_hex(std::string_view data);

/// Every key the configuration file may set.
const std::vector<std::string>& known_config_keys();

}  // namespace trajan::cli
