#pragma once

namespace bregsmooth {

// Parses argv and runs one subcommand.  Returns the process exit code:
// 0 success, 2 validation / usage error (single line on stderr), 1
// computational failure (diagnostics JSON on stderr).  Artifacts are
// written atomically; a failed run leaves no partial files.
int run_cli(int argc, const char* const* argv);

const char* library_version();

}  // namespace bregsmooth
