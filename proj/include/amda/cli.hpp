#pragma once

// Umbrella command-line front end. Subcommands: simulate, augment,
// preprocess, train, predict, evaluate, experiment, alignment.

#include <ostream>
#include <string>
#include <vector>

namespace amda::cli {

/// Name of the environment variable holding the default output directory.
inline constexpr const char* kOutDirEnv = "AMDA_OUT_DIR";

/// Runs one command; `args[0]` is the program name. Returns the process
/// exit status: 0 success, 2 usage, 3 configuration, 4 data, 5 numeric.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace amda::cli
