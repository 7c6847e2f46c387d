#pragma once

#include <iosfwd>

namespace innosurv {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// Entry point of the `innosurv` tool. Never throws; every failure is reported
// on `err` and mapped onto an exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace innosurv
