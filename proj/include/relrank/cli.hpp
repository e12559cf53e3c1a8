#pragma once

namespace relrank {

/// Command-line entry point. Returns 0 on success, 1 for invalid input
/// (usage, config, data) and 2 for runtime failures.
int run_cli(int argc, char** argv);

}  // namespace relrank
