#pragma once

#include <ostream>

namespace spamdet {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitMissingStage = 2;
inline constexpr int kExitValidation = 3;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spamdet
