#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cpt/profiles.h"

using namespace cpt::profiles;

namespace {

TimeSeriesProfile parse(const std::string& text, Interpolation i = Interpolation::hold)
{
  std::istringstream in(text);
  return load_profile(in, i);
}

}  // namespace

TEST(ProfileParse, TwoPoints)
{
  const auto p = parse("0,5.0\n60,6.0");
  ASSERT_EQ(p.points().size(), 2u);
  EXPECT_EQ(p.points()[0], (Knot{0, 5.0}));
  EXPECT_EQ(p.points()[1], (Knot{60, 6.0}));
}

TEST(ProfileParse, HeaderCrlfAndBlankLines)
{
  const auto p = parse("t_s,value_kw\r\n\r\n0, 5.0\r\n60,6\r\n");
  EXPECT_EQ(p.points().size(), 2u);
}

TEST(ProfileParse, NonMonotonicTimestamps)
{
  try {
    parse("60,1\n0,2\n");
    FAIL();
  } catch (const MonotonicityError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("0,1\n0,2\n"), MonotonicityError);
}

TEST(ProfileParse, EmptyInputHasNoDataRows)
{
  try {
    parse("");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_STREQ(e.what(), "no data rows");
  }
  EXPECT_THROW(parse("t_s,value_kw\n"), ParseError);
}

TEST(ProfileParse, ErrorsCarryLineNumbers)
{
  try {
    parse("0,1\n10,abc\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("0,1,2\n"), ParseError);
  EXPECT_THROW(parse("0,nan\n"), ParseError);
}

TEST(ProfileSample, LinearMidpointAndHold)
{
  const std::vector<Knot> pts{{0, 4}, {100, 8}};
  EXPECT_DOUBLE_EQ(sample(TimeSeriesProfile(pts, Interpolation::linear), 50), 6.0);
  EXPECT_DOUBLE_EQ(sample(TimeSeriesProfile(pts, Interpolation::hold), 50), 4.0);
}

TEST(ProfileSample, OutsideRangeHoldsEndValues)
{
  const TimeSeriesProfile p({{0, 4}, {100, 8}}, Interpolation::linear);
  EXPECT_DOUBLE_EQ(sample(p, -10), 4.0);
  EXPECT_DOUBLE_EQ(sample(p, 1e6), 8.0);
  EXPECT_DOUBLE_EQ(sample(p, 100), 8.0);
}

TEST(ProfileSample, HoldSwitchesExactlyAtKnot)
{
  const TimeSeriesProfile p({{0, 1}, {300, 2}, {600, 3}});
  EXPECT_DOUBLE_EQ(sample(p, 299.999), 1.0);
  EXPECT_DOUBLE_EQ(sample(p, 300), 2.0);
}

// Property: linear samples lie between the neighbouring knot values.
TEST(ProfileSample, LinearIsBoundedByNeighbours)
{
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> v(0, 20);
  std::vector<Knot> pts;
  for (int i = 0; i < 50; ++i) pts.push_back({i * 60.0, v(rng)});
  const TimeSeriesProfile p(pts, Interpolation::linear);
  std::uniform_real_distribution<double> t(0, 49 * 60.0);
  for (int i = 0; i < 5000; ++i) {
    const double x = t(rng);
    const auto k = static_cast<std::size_t>(x / 60.0);
    const double lo = std::min(pts[k].value_kw, pts[std::min<std::size_t>(k + 1, 49)].value_kw);
    const double hi = std::max(pts[k].value_kw, pts[std::min<std::size_t>(k + 1, 49)].value_kw);
    const double s = sample(p, x);
    ASSERT_GE(s, lo - 1e-12);
    ASSERT_LE(s, hi + 1e-12);
  }
}

TEST(ProfileScale, FactorAndClamp)
{
  auto values = [](const TimeSeriesProfile& p) {
    std::vector<double> out;
    for (const auto& k : p.points()) out.push_back(k.value_kw);
    return out;
  };
  const TimeSeriesProfile a({{0, 10}, {1, 20}});
  EXPECT_EQ(values(scale(a, {0.5, {}})), (std::vector<double>{5, 10}));
  const TimeSeriesProfile b({{0, 10}});
  EXPECT_EQ(values(scale(b, {1.0, {}})), (std::vector<double>{10}));
  const TimeSeriesProfile c({{0, 10}, {1, 50}});
  const auto clamped = scale(c, {1.0, 36.0});
  EXPECT_EQ(values(clamped), (std::vector<double>{10, 36}));
  for (const auto& k : clamped.points()) EXPECT_LE(k.value_kw, 36.0);
  EXPECT_THROW(scale(a, {0.0, {}}), std::invalid_argument);
}

TEST(ProfileSerialize, RoundTrip)
{
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> v(-5, 40);
  std::vector<Knot> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({i * 0.1 + 1e-3, v(rng)});
  const TimeSeriesProfile p(pts);
  std::stringstream s;
  serialize(p, s);
  EXPECT_EQ(load_profile(s), p);
}

TEST(ProfileFiles, BundledCurvesLoad)
{
  const auto load = load_profile_file(CPT_SOURCE_DIR "/scenarios/profiles/load.csv");
  const auto pv = load_profile_file(CPT_SOURCE_DIR "/scenarios/profiles/pv.csv");
  EXPECT_EQ(load.points().size(), 70u);
  EXPECT_EQ(pv.points().size(), 70u);
  EXPECT_DOUBLE_EQ(load.points().back().t_s, 5.75 * 3600);
  EXPECT_THROW(load_profile_file("/nonexistent/profile.csv"), std::runtime_error);
}
