#pragma once

#include <string>
#include <vector>

#include "gridrecon/error.hpp"
#include "run_config.hpp"

namespace gridrecon::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitVerification = 4;

/// Exit code for a library error category.
int exit_code_for(ErrorCode code);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Runs the named verify checks (all when empty) at seeds derived from `seed`.
/// Errors inside a check become a failed verdict.
std::vector<CheckResult> run_checks(const std::vector<std::string>& names, std::uint64_t seed, bool break_symmetry);

/// Executes the subcommand and writes its outputs. Returns the exit code.
int run_command(const RunConfig& config);

/// parse_config + run_command with every error mapped to an exit code and a
/// one-line message on stderr.
int main_entry(int argc, const char* const* argv);

}  // namespace gridrecon::cli
