#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace facetts::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

/// Maps a library error to the process exit code.
int exit_code_for(const std::exception& e);

/// Runs one command line (without the program name) and returns the exit code. Nothing is
/// written to disk unless the whole configuration and every input validated.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace facetts::cli
