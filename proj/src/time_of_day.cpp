#include "cpt/time_of_day.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cpt {

namespace {

int parse_field(std::string_view text, std::string_view full, int max_value)
{
  if (text.size() != 2 || !std::isdigit(static_cast<unsigned char>(text[0])) ||
      !std::isdigit(static_cast<unsigned char>(text[1]))) {
    throw std::invalid_argument("invalid time of day '" + std::string(full) + "'");
  }
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.size() != 2 || value > max_value) {
    throw std::invalid_argument("invalid time of day '" + std::string(full) + "'");
  }
  return value;
}

}  // namespace

double parse_time_of_day(std::string_view text)
{
  const auto first = text.find(':');
  if (first == std::string_view::npos) {
    throw std::invalid_argument("invalid time of day '" + std::string(text) + "'");
  }
  const int hours = parse_field(text.substr(0, first), text, 24);
  auto rest = text.substr(first + 1);
  const auto second = rest.find(':');
  const int minutes = parse_field(rest.substr(0, second), text, 59);
  double seconds = 0.0;
  if (second != std::string_view::npos) {
    auto sec_text = rest.substr(second + 1);
    const auto dot = std::find(sec_text.begin(), sec_text.end(), '.');
    auto whole = sec_text.substr(0, static_cast<std::size_t>(dot - sec_text.begin()));
    seconds = parse_field(whole, text, 59);
    if (whole.size() < sec_text.size()) {
      double frac = 0.0;
      auto frac_text = sec_text.substr(whole.size());
      auto [ptr, ec] = std::from_chars(frac_text.data(), frac_text.data() + frac_text.size(), frac);
      if (ec != std::errc{} || ptr != frac_text.data() + frac_text.size()) {
        throw std::invalid_argument("invalid time of day '" + std::string(text) + "'");
      }
      seconds += frac;
    }
  }
  const double total = hours * 3600.0 + minutes * 60.0 + seconds;
  if (total > 24 * 3600.0) {
    throw std::invalid_argument("time of day past 24:00 '" + std::string(text) + "'");
  }
  return total;
}

std::string format_time_of_day(double seconds)
{
  const double whole = std::floor(seconds + 1e-9);
  const auto s = static_cast<long long>(whole);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", s / 3600, (s / 60) % 60, s % 60);
  std::string out(buf);
  const double frac = seconds - whole;
  if (frac > 1e-9) {
    std::snprintf(buf, sizeof buf, "%.3f", frac);
    std::size_t len = std::char_traits<char>::length(buf);  // "0.500"
    while (len > 3 && buf[len - 1] == '0') --len;
    out.append(buf + 1, len - 1);
  }
  return out;
}

}  // namespace cpt
