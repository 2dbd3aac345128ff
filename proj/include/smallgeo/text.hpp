#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace smallgeo::text {

// Shortest decimal text that parses back to the identical value.
std::string format_double(double value);
std::string format_float(float value);

double parse_double(std::string_view s);
float parse_float(std::string_view s);
long long parse_int(std::string_view s);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);

std::string join(const std::vector<std::string>& parts, std::string_view delim);

} // namespace smallgeo::text
