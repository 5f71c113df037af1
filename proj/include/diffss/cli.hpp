#pragma once

#include <string>
#include <vector>

namespace diffss {

// Parses argv, dispatches to a subcommand, maps error categories to exit
// codes: 0 success, 2 configuration error, 3 backend error, 4 quality gate.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args without the program name

}  // namespace diffss
