#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ptmf::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kValidation = 1;
inline constexpr int kIo = 2;

/// Runs one invocation. `args` excludes the program name. Results go to
/// `out`, diagnostics and the resolved configuration to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ptmf::cli
