#pragma once

#include <ostream>

namespace licap {

/// Entry point behind the `licap` binary. Returns the process exit code:
/// 0 on success, 2 on usage errors, 1 on any other failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace licap
