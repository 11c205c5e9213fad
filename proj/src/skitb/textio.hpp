#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace skitb::text {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Splits a document into lines, stripping a trailing '\r' from each.
std::vector<std::string_view> lines(std::string_view doc);

// Strict parsers; `where` is prefixed to the diagnostic on failure (Parse error).
double parse_double(std::string_view s, const std::string& where);
long long parse_int(std::string_view s, const std::string& where);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace skitb::text
