#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sigprop::csv {

// Shortest representation that round-trips; "inf", "-inf", "nan" otherwise.
std::string num(double v);

std::vector<std::string> split(std::string_view line, char sep = ',');

// Parses a full field as a double (accepts inf/nan); throws DomainError.
double parse_double(std::string_view field);

} // namespace sigprop::csv
