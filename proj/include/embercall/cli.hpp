#pragma once

namespace embercall {

/// The `embercall` command line. Returns the process exit code: 0 success,
/// 1 bad input or usage, 2 runtime failure (including a build with failed
/// tasks).
int run_cli(int argc, char** argv);

}  // namespace embercall
