#include <gtest/gtest.h>

#include <stdexcept>

#include "cpt/time_of_day.h"

using cpt::format_time_of_day;
using cpt::parse_time_of_day;

TEST(TimeOfDay, ParsesHoursMinutes)
{
  EXPECT_DOUBLE_EQ(parse_time_of_day("09:15"), 9 * 3600 + 15 * 60);
  EXPECT_DOUBLE_EQ(parse_time_of_day("11:30:00"), 41400.0);
  EXPECT_DOUBLE_EQ(parse_time_of_day("14:15:00"), 51300.0);
  EXPECT_DOUBLE_EQ(parse_time_of_day("00:00:01.5"), 1.5);
}

TEST(TimeOfDay, RejectsMalformed)
{
  for (const char* bad : {"", "9", "25:00", "12:60", "12:00:60", "ab:cd", "12:00:00x", "-1:00"}) {
    EXPECT_THROW(parse_time_of_day(bad), std::invalid_argument) << bad;
  }
}

TEST(TimeOfDay, FormatsWholeAndFractionalSeconds)
{
  EXPECT_EQ(format_time_of_day(33300.0), "09:15:00");
  EXPECT_EQ(format_time_of_day(54000.0), "15:00:00");
  EXPECT_EQ(format_time_of_day(1.5), "00:00:01.5");
}

TEST(TimeOfDay, RoundTripsEverySecondOfTheDay)
{
  for (int s = 0; s < 86400; s += 7) {
    EXPECT_DOUBLE_EQ(parse_time_of_day(format_time_of_day(s)), s);
  }
}
