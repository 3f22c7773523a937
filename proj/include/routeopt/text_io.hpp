#pragma once

#include <string>
#include <vector>

namespace routeopt {

// Shortest decimal form that round-trips the exact double (%.17g).
std::string fmt_double(double v);

double parse_double(const std::string& s);
long parse_long(const std::string& s);

std::vector<std::string> split(const std::string& s, char sep);
std::string join(const std::vector<std::string>& parts, char sep);

std::string read_file(const std::string& path);          // throws on failure, names the path
void write_file(const std::string& path, const std::string& content);

// 64-bit FNV-1a, used for config hashes embedded in output files.
std::uint64_t fnv1a(const std::string& data);
std::string to_hex(std::uint64_t v);

}  // namespace routeopt
