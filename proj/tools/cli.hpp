#pragma once

#include <iosfwd>

namespace anscale::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitGeneration = 3;
inline constexpr int kExitEstimation = 4;

/// Entry point shared by the binary and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace anscale::cli
