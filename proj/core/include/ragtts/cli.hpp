#pragma once

#include <string>
#include <vector>

namespace ragtts {

// Batch-experiment entry point behind the ragtts binary. Returns the process
// exit code: 0 success, 1 usage, 2 data, 3 model.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace ragtts
