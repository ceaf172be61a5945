#include "cpt/profiles.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

namespace cpt::profiles {

namespace {

constexpr std::string_view kHeader = "t_s,value_kw";

std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_number(std::string_view text, std::size_t line, const char* column)
{
  text = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError(line, "line " + std::to_string(line) + ": invalid " + column + " '" +
                               std::string(text) + "'");
  }
  if (!std::isfinite(value)) {
    throw ParseError(line, "line " + std::to_string(line) + ": non-finite " + column);
  }
  return value;
}

std::string shortest(double v)
{
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

Interpolation parse_interpolation(const std::string& name)
{
  if (name == "hold") {
    return Interpolation::hold;
  }
  if (name == "linear") {
    return Interpolation::linear;
  }
  throw std::invalid_argument("unknown interpolation '" + name + "' (expected hold or linear)");
}

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error(what), line_(line)
{
}

MonotonicityError::MonotonicityError(std::size_t line, const std::string& what)
    : std::runtime_error(what), line_(line)
{
}

TimeSeriesProfile::TimeSeriesProfile(std::vector<Knot> points, Interpolation interpolation)
    : points_(std::move(points)), interpolation_(interpolation)
{
  if (points_.empty()) {
    throw ParseError(0, "no data rows");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i].t_s) || !std::isfinite(points_[i].value_kw)) {
      throw ParseError(i + 1, "knot " + std::to_string(i) + " is not finite");
    }
    if (i > 0 && !(points_[i].t_s > points_[i - 1].t_s)) {
      throw MonotonicityError(i + 1, "knot " + std::to_string(i) +
                                         ": timestamps must be strictly increasing");
    }
  }
}

TimeSeriesProfile load_profile(std::istream& source, Interpolation interpolation)
{
  std::vector<Knot> points;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(source, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) {
      continue;
    }
    if (line == kHeader) {
      if (!points.empty()) {
        throw ParseError(line_no, "line " + std::to_string(line_no) + ": header after data");
      }
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
      throw ParseError(line_no, "line " + std::to_string(line_no) + ": expected two columns");
    }
    Knot knot{parse_number(line.substr(0, comma), line_no, "t_s"),
              parse_number(line.substr(comma + 1), line_no, "value_kw")};
    if (!points.empty() && !(knot.t_s > points.back().t_s)) {
      throw MonotonicityError(line_no, "line " + std::to_string(line_no) +
                                           ": timestamp not strictly increasing");
    }
    points.push_back(knot);
  }
  if (points.empty()) {
    throw ParseError(0, "no data rows");
  }
  return TimeSeriesProfile(std::move(points), interpolation);
}

TimeSeriesProfile load_profile_file(const std::filesystem::path& path, Interpolation interpolation)
{
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open profile '" + path.string() + "'");
  }
  return load_profile(in, interpolation);
}

void serialize(const TimeSeriesProfile& profile, std::ostream& out)
{
  out << kHeader << '\n';
  for (const auto& k : profile.points()) {
    out << shortest(k.t_s) << ',' << shortest(k.value_kw) << '\n';
  }
}

double sample(const TimeSeriesProfile& profile, double t_s)
{
  const auto& pts = profile.points();
  if (t_s <= pts.front().t_s) {
    return pts.front().value_kw;
  }
  if (t_s >= pts.back().t_s) {
    return pts.back().value_kw;
  }
  // first knot strictly after t
  auto upper = std::upper_bound(pts.begin(), pts.end(), t_s,
                                [](double t, const Knot& k) { return t < k.t_s; });
  const Knot& right = *upper;
  const Knot& left = *(upper - 1);
  if (profile.interpolation() == Interpolation::hold) {
    return left.value_kw;
  }
  const double w = (t_s - left.t_s) / (right.t_s - left.t_s);
  return left.value_kw + w * (right.value_kw - left.value_kw);
}

TimeSeriesProfile scale(const TimeSeriesProfile& profile, const ScalingRule& rule)
{
  if (!(rule.factor > 0.0) || !std::isfinite(rule.factor)) {
    throw std::invalid_argument("scaling factor must be > 0");
  }
  std::vector<Knot> out = profile.points();
  for (auto& k : out) {
    k.value_kw *= rule.factor;
    if (rule.clamp_max_kw) {
      k.value_kw = std::min(k.value_kw, *rule.clamp_max_kw);
    }
  }
  return TimeSeriesProfile(std::move(out), profile.interpolation());
}

}  // namespace cpt::profiles
