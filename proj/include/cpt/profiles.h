#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpt::profiles {

enum class Interpolation { hold, linear };

Interpolation parse_interpolation(const std::string& name);

struct Knot {
  double t_s = 0.0;  ///< seconds since scenario epoch
  double value_kw = 0.0;

  bool operator==(const Knot&) const = default;
};

/// Raised for malformed CSV input. line() is 1-based; 0 when the whole
/// input is at fault (e.g. no data rows).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class MonotonicityError : public std::runtime_error {
 public:
  MonotonicityError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Immutable after construction; knots strictly increasing in time.
class TimeSeriesProfile {
 public:
  TimeSeriesProfile(std::vector<Knot> points, Interpolation interpolation = Interpolation::hold);

  const std::vector<Knot>& points() const { return points_; }
  Interpolation interpolation() const { return interpolation_; }

  bool operator==(const TimeSeriesProfile&) const = default;

 private:
  std::vector<Knot> points_;
  Interpolation interpolation_;
};

struct ScalingRule {
  double factor = 1.0;
  std::optional<double> clamp_max_kw;
};

/// Reads the `t_s,value_kw` CSV format. The header row is optional.
TimeSeriesProfile load_profile(std::istream& source, Interpolation interpolation = Interpolation::hold);
TimeSeriesProfile load_profile_file(const std::filesystem::path& path,
                                    Interpolation interpolation = Interpolation::hold);

/// Writes the header and one row per knot using shortest round-trip decimal form.
void serialize(const TimeSeriesProfile& profile, std::ostream& out);

/// Value at t. Outside the knot range the nearest end value is held.
double sample(const TimeSeriesProfile& profile, double t_s);

TimeSeriesProfile scale(const TimeSeriesProfile& profile, const ScalingRule& rule);

}  // namespace cpt::profiles
