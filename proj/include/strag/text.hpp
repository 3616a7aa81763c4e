#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace strag::text {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

double parse_double(std::string_view s);
unsigned long long parse_u64(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

/// Accepts plain bytes or a K/M/G/T suffix (binary multiples), e.g. "1G", "256MB".
unsigned long long parse_size(std::string_view s);

}  // namespace strag::text
