#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sigprop::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode { ok = 0, usage = 1, no_eoc = 2, non_convergence = 3 };

// Runs one command line (args excludes the program name). CSV goes to out
// unless --output is given; diagnostics go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "a:b:step", "x,y,z" or a single value.
std::vector<double> parse_grid(const std::string& text);

} // namespace sigprop::cli
