#pragma once

#include <string>
#include <string_view>

namespace cpt {

/// Parses "HH:MM" or "HH:MM:SS[.fff]" into seconds since midnight.
/// Throws std::invalid_argument on malformed input.
double parse_time_of_day(std::string_view text);

/// Formats seconds since midnight as "HH:MM:SS", with a fractional part only
/// when the value is not a whole second.
std::string format_time_of_day(double seconds);

}  // namespace cpt
