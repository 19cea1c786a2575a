#pragma once

#include <string>

namespace gtdl {

std::string version_string();

/// Entry point of the command-line tool. Returns the process exit code:
/// 0 success, 1 usage error, 2 data/validation error, 3 numeric failure.
int dispatch(int argc, const char* const* argv);

}  // namespace gtdl
