#pragma once

#include <string>
#include <vector>

namespace fallmdp {

// Shortest round-trip decimal form of a double ('.' separator, no locale).
std::string fmt_double(double v);

std::vector<std::string> split(const std::string& line, char sep);

double parse_double(const std::string& tok);  // throws MalformedFile
long parse_long(const std::string& tok);      // throws MalformedFile

}  // namespace fallmdp
