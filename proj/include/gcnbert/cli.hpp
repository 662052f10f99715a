#pragma once

#include <iosfwd>

namespace gcnbert {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Runs one command (train, eval, predict, synth, gradcheck, import-wlasl).
/// Failures are reported as one JSON object per line on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gcnbert
