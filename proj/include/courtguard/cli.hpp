#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace courtguard {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;         // success; `classify`: benign
inline constexpr int kExitUsage = 1;      // bad arguments or configuration
inline constexpr int kExitInjection = 2;  // `classify`: injection
inline constexpr int kExitFailure = 3;    // classification or backend failure

/// Entry point behind the `courtguard` binary. `args` excludes the program
/// name. Subcommands: classify, eval, sample, report, serve, healthcheck.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace courtguard
