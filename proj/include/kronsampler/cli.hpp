#pragma once

// Command-line front end. Everything runs in-process so tests can drive the
// same code path as the executable.
//
// Exit codes: 0 success, 2 validation error, 3 resource guard, 4 numerical
// failure, 1 anything unexpected.

#include <ostream>
#include <string>
#include <vector>

namespace kronsampler::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUnexpected = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitResource = 3;
inline constexpr int kExitNumerical = 4;

/// Runs one command; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker count for bench: KRONSAMPLER_THREADS if set and positive, else the
/// hardware concurrency (at least 1).
unsigned worker_count();

}  // namespace kronsampler::cli
