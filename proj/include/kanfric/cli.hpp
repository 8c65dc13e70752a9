#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kanfric {

/// Entry point of the `kanfric` executable. Returns the process exit code.
int run_cli(int argc, char** argv);

/// Same, with arguments (excluding the program name) and streams supplied
/// by the caller.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Name of the environment variable holding the default output directory.
inline constexpr const char* kOutDirEnv = "KANFRIC_OUT_DIR";

}  // namespace kanfric
