#pragma once

#include <ostream>

namespace tofrgbd::cli {

// Environment variable naming the default output directory of synth/augment.
inline constexpr const char* kOutDirEnv = "TOFRGBD_OUT_DIR";

/// Runs one command line. Reports go to `out`, diagnostics to `err`.
/// Returns 0 on success, 1 on a module or I/O error, 3 when a gradient check
/// exceeds its tolerance, and CLI11's code for usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tofrgbd::cli
