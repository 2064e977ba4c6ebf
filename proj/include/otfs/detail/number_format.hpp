#pragma once

#include <string>
#include <string_view>

namespace otfs::detail {

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
// Strict parse of a full token; throws std::invalid_argument on junk.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);
std::string_view trim(std::string_view s);

}  // namespace otfs::detail
