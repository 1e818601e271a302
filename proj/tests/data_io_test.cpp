// Copyright 2026 The dermpc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "dermpc/data_io.hpp"
#include "support/active_set_oracle.hpp"

namespace dermpc {
namespace {

// 2020-08-14T00:00:00Z
constexpr std::int64_t kDay = 1597363200;

ForecastSeries parse(const std::string& text, ColumnSpec spec = {}) {
  std::istringstream in(text);
  return parse_csv(in, spec, "demand.csv");
}

std::string error_of(const std::string& text, ColumnSpec spec = {}) {
  try {
    parse(text, spec);
  } catch (const DataError& e) {
    return e.what();
  }
  return "no error";
}

ForecastSeries constant(double value, std::size_t n, std::int64_t start = kDay) {
  return {start, 300, std::vector<double>(n, value)};
}

TEST(Timestamp, ParsesCommonForms) {
  EXPECT_EQ(parse_timestamp("2020-08-14T00:00:00Z"), kDay);
  EXPECT_EQ(parse_timestamp("2020-08-14 00:05"), kDay + 300);
  EXPECT_EQ(parse_timestamp("2020-08-14"), kDay);
  EXPECT_EQ(parse_timestamp("2020-08-13T17:00:00-07:00"), kDay);
  EXPECT_EQ(parse_timestamp("2020-08-14T05:30:00+05:30"), kDay);
  EXPECT_EQ(parse_timestamp("1970-01-01T00:00:00Z"), 0);
}

TEST(Timestamp, RejectsMalformedText) {
  for (const char* bad : {"", "2020-8-14", "2020-02-30T00:00", "2020-08-14T25:00", "2020-08-14T00:00:00X",
                          "yesterday", "2020-08-14T00:00+7"})
    EXPECT_FALSE(parse_timestamp(bad).has_value()) << bad;
}

TEST(Timestamp, FormatInvertsParse) {
  testing::Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const auto t = static_cast<std::int64_t>(std::floor(rng.uniform(-2e9, 4e9)));
    EXPECT_EQ(parse_timestamp(format_timestamp(t)), t);
  }
  EXPECT_EQ(format_timestamp(kDay + 3661), "2020-08-14T01:01:01Z");
}

TEST(LoadCsv, WellFormedThreeRows) {
  const ForecastSeries s = parse(
      "timestamp,net_demand_gw\n"
      "2020-08-14T00:00:00Z,20.5\n"
      "2020-08-14T00:05:00Z,21\n"
      "2020-08-14T00:10:00Z,21.5\n");
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.start_time, kDay);
  EXPECT_EQ(s.step_seconds, 300);
  EXPECT_EQ(s.values_gw, (std::vector<double>{20.5, 21.0, 21.5}));
}

TEST(LoadCsv, CommentLinesAreSkipped) {
  const ForecastSeries s = parse(
      "# source: synthetic\n"
      "timestamp,net_demand_gw\n"
      "2020-08-14T00:00:00Z,20.5\n"
      "# mid-file note\n"
      "2020-08-14T00:05:00Z,21\n");
  EXPECT_EQ(s.values_gw, (std::vector<double>{20.5, 21.0}));
}

TEST(LoadCsv, ScaleConvertsMegawatts) {
  ColumnSpec spec;
  spec.value_column = "mw";
  spec.scale = 1e-3;
  const ForecastSeries s = parse("other,timestamp,mw\nx,2020-08-14 00:00,21000\ny,2020-08-14 00:05,20500\n", spec);
  EXPECT_DOUBLE_EQ(s.values_gw[0], 21.0);
  EXPECT_DOUBLE_EQ(s.values_gw[1], 20.5);
}

TEST(LoadCsv, ReversedTimestampNamesTheLine) {
  const std::string msg = error_of(
      "timestamp,v\n"
      "2020-08-14T00:05:00Z,1\n"
      "2020-08-14T00:00:00Z,2\n");
  EXPECT_NE(msg.find("demand.csv:3"), std::string::npos) << msg;
  EXPECT_NE(error_of("timestamp,v\n2020-08-14T00:00Z,1\n2020-08-14T00:00Z,2\n").find(":3"), std::string::npos);
}

TEST(LoadCsv, MalformedRowsNameTheLine) {
  EXPECT_NE(error_of("timestamp,v\n2020-08-14T00:00Z,1\n2020-08-14T00:05Z,abc\n").find("demand.csv:3"),
            std::string::npos);
  EXPECT_NE(error_of("timestamp,v\n2020-08-14T00:00Z\n").find("demand.csv:2"), std::string::npos);
  EXPECT_NE(error_of("timestamp,v\nnot-a-time,1\n").find("demand.csv:2"), std::string::npos);
  EXPECT_NE(error_of("time,v\n2020-08-14T00:00Z,1\n").find("timestamp"), std::string::npos);
  EXPECT_NE(error_of("timestamp,v\n").find("no data"), std::string::npos);
  EXPECT_NE(error_of("timestamp,v\n2020-08-14T00:00Z,1\n2020-08-14T00:07Z,1\n2020-08-14T00:10Z,1\n")
                .find("grid"),
            std::string::npos);
}

TEST(LoadCsv, ShortGapsAreInterpolated) {
  const ForecastSeries s = parse(
      "timestamp,v\n"
      "2020-08-14T00:00Z,0\n"
      "2020-08-14T00:05Z,1\n"
      "2020-08-14T00:10Z,\n"
      "2020-08-14T00:25Z,5\n");
  EXPECT_EQ(s.size(), 6u);
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_DOUBLE_EQ(s.values_gw[k], static_cast<double>(k));
}

TEST(LoadCsv, LongGapsAndEdgeGapsAreErrors) {
  const std::string msg =
      error_of("timestamp,v\n2020-08-14T00:00Z,0\n2020-08-14T00:05Z,1\n2020-08-14T00:25Z,5\n", [] {
        ColumnSpec s;
        s.max_gap_steps = 2;
        return s;
      }());
  EXPECT_NE(msg.find("demand.csv:4"), std::string::npos) << msg;
  EXPECT_NE(msg.find("gap"), std::string::npos);
  EXPECT_NE(error_of("timestamp,v\n2020-08-14T00:00Z,\n2020-08-14T00:05Z,1\n").find("start"), std::string::npos);
  EXPECT_NE(error_of("timestamp,v\n2020-08-14T00:00Z,1\n2020-08-14T00:05Z,nan\n").find("end"), std::string::npos);
  ColumnSpec fixed;
  fixed.step_seconds = 300;
  EXPECT_NE(error_of("timestamp,v\n2020-08-14T00:00Z,1\n2020-08-14T00:30Z,2\n", fixed).find("gap"),
            std::string::npos);
}

TEST(LoadCsv, MissingFileNamesThePath) {
  try {
    load_csv("/nonexistent/net_demand.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/net_demand.csv"), std::string::npos);
  }
}

TEST(WriteCsv, RoundTripIsIdentity) {
  testing::Rng rng(17);
  const auto path = std::filesystem::temp_directory_path() / "dermpc_roundtrip.csv";
  for (int trial = 0; trial < 10; ++trial) {
    ForecastSeries s{kDay + 300 * rng.integer(-1000, 1000), trial % 2 ? 300 : 600, {}};
    const int n = rng.integer(1, 400);
    for (int k = 0; k < n; ++k) s.values_gw.push_back(rng.uniform(-50, 50) * std::pow(10.0, rng.integer(-8, 3)));
    write_csv(path.string(), s);
    ColumnSpec spec;
    spec.step_seconds = s.step_seconds;
    EXPECT_EQ(load_csv(path.string(), spec), s);
  }
  std::filesystem::remove(path);
}

TEST(Resample, SameStepIsIdentity) {
  const ForecastSeries s{kDay, 300, {1, 4, 2}};
  EXPECT_EQ(resample(s, 300), s);
}

TEST(Resample, UpsampleInterpolatesMidpoints) {
  const ForecastSeries out = resample({kDay, 600, {0, 2}}, 300);
  EXPECT_EQ(out.step_seconds, 300);
  EXPECT_EQ(out.start_time, kDay);
  EXPECT_EQ(out.values_gw, (std::vector<double>{0, 1, 2}));
}

TEST(Resample, DownsampleAveragesBins) {
  const ForecastSeries out = resample({kDay, 300, {1, 3, 5, 7}}, 600);
  EXPECT_EQ(out.values_gw, (std::vector<double>{2, 6}));
  EXPECT_EQ(resample({kDay, 300, {1, 3, 5}}, 600).values_gw, (std::vector<double>{2, 5}));
}

TEST(Resample, Errors) {
  EXPECT_THROW(resample({kDay, 300, {}}, 600), DataError);
  EXPECT_THROW(resample({kDay, 300, {1}}, 0), DataError);
  EXPECT_THROW(resample({kDay, 300, {1, 2}}, 450), DataError);
}

TEST(Resample, UpsamplingRampKeepsEndpointsAndSamples) {
  testing::Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.uniform(-5, 5), b = rng.uniform(-1, 1);
    const int ratio = rng.integer(2, 6);
    ForecastSeries coarse{kDay, 300 * ratio, {}};
    for (int k = 0; k < 12; ++k) coarse.values_gw.push_back(a + b * k * ratio);
    const ForecastSeries fine = resample(coarse, 300);
    ASSERT_EQ(fine.size(), static_cast<std::size_t>(11 * ratio + 1));
    for (std::size_t j = 0; j < fine.size(); ++j)
      EXPECT_NEAR(fine.values_gw[j], a + b * static_cast<double>(j), 1e-12);
    EXPECT_EQ(fine.values_gw.front(), coarse.values_gw.front());
    EXPECT_NEAR(fine.values_gw.back(), coarse.values_gw.back(), 1e-12);
  }
}

TEST(Resample, RampRoundTripsThroughBinMeans) {
  // A bin mean of a ramp is the ramp at the bin centre, so going fine ->
  // coarse -> fine reproduces the ramp shifted by half a bin.
  testing::Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.uniform(-5, 5), b = rng.uniform(-1, 1);
    const int ratio = rng.integer(2, 6);
    ForecastSeries fine{kDay, 300, {}};
    for (int k = 0; k < 10 * ratio; ++k) fine.values_gw.push_back(a + b * k);
    const ForecastSeries back = resample(resample(fine, 300 * ratio), 300);
    ASSERT_EQ(back.size(), static_cast<std::size_t>(9 * ratio + 1));
    const double shift = 0.5 * (ratio - 1);
    for (std::size_t j = 0; j < back.size(); ++j)
      EXPECT_NEAR(back.values_gw[j], a + b * (static_cast<double>(j) + shift), 1e-12);
  }
}

TEST(ForecastWindow, NoDisturbanceIsBaseSlice) {
  ForecastProvider p{ForecastSeries{kDay, 300, {1, 2, 3, 4, 5, 6}}, std::nullopt, 2};
  EXPECT_EQ(p.window(1, 4), (std::vector<double>{2, 3, 4, 5}));
}

TEST(ForecastWindow, DisturbancePerturbsHeadOnly) {
  ForecastProvider p{constant(10.0, 20), constant(1.0, 20), 2};
  EXPECT_EQ(p.window(0, 4), (std::vector<double>{11, 11, 10, 10}));
  EXPECT_EQ(p.window(6, 4), (std::vector<double>{11, 11, 10, 10}));
  p.perturb_whole_horizon = true;
  EXPECT_EQ(p.window(6, 4), (std::vector<double>{11, 11, 11, 11}));
  EXPECT_EQ(p.realized(3), 11.0);
}

TEST(ForecastWindow, TailEqualsBaseForRandomData) {
  testing::Rng rng(31);
  ForecastSeries base{kDay, 300, {}}, dist{kDay - 600, 300, {}};
  for (int k = 0; k < 100; ++k) base.values_gw.push_back(rng.uniform(10, 40));
  for (int k = 0; k < 110; ++k) dist.values_gw.push_back(rng.uniform(-2, 2));
  const ForecastProvider p{base, dist, 6};
  for (int trial = 0; trial < 50; ++trial) {
    const int tau = rng.integer(1, 40);
    const long t0 = rng.integer(0, 100 - tau);
    const auto w = p.window(t0, tau);
    for (int k = 0; k < tau; ++k) {
      const double expected = base.values_gw[t0 + k] + (k < 6 ? dist.values_gw[t0 + k + 2] : 0.0);
      EXPECT_EQ(w[k], expected);
    }
  }
}

TEST(ForecastWindow, RangeAndAlignmentErrors) {
  ForecastProvider p{constant(10.0, 8), constant(1.0, 8), 2};
  EXPECT_THROW(p.window(6, 4), DataError);
  EXPECT_THROW(p.window(-1, 2), DataError);
  EXPECT_NO_THROW(p.require_coverage(8));
  EXPECT_THROW(p.require_coverage(9), DataError);
  ForecastProvider late{constant(10.0, 8), constant(1.0, 8, kDay + 300), 2};
  EXPECT_THROW(late.require_coverage(8), DataError);
  ForecastProvider off_grid{constant(10.0, 8), constant(1.0, 8, kDay + 7), 2};
  EXPECT_THROW(off_grid.window(0, 2), DataError);
  ForecastProvider coarse{constant(10.0, 8), ForecastSeries{kDay, 600, {1, 1}}, 2};
  EXPECT_THROW(coarse.window(0, 2), DataError);
}

}  // namespace
}  // namespace dermpc
