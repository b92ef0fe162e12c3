#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace newscls::cli {

// Exit codes of the newscls binary.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;  // input or validation error
inline constexpr int kExitRun = 3;    // run failure

// Runs one command; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace newscls::cli
