#pragma once

#include <string>
#include <vector>

namespace mprof::cli {

/// Parses and runs one subcommand. Returns 0 on success, 2 on usage errors
/// and 1 on runtime errors; failures print one JSON error line to stderr.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, const char* const* argv);

}  // namespace mprof::cli
