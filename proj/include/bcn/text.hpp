#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace bcn {

std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string_view> split_char(std::string_view s, char sep);
std::string_view trim(std::string_view s);
// Strict integer/real parsing; BadFormat on trailing garbage.
int parse_int(std::string_view s);
long long parse_i64(std::string_view s);
double parse_double(std::string_view s);

}  // namespace bcn
