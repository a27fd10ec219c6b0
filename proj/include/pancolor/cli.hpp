#pragma once

#include <string>
#include <vector>

namespace pancolor::cli {

// Entry point for the command-line tool. Subcommands: prepare, train, infer,
// evaluate, sharpness-report. Returns 0 on success, 1 on validation/usage
// errors, 2 on runtime failures.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, char** argv);

}  // namespace pancolor::cli
