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

#include <sstream>

#include "dermpc/config.hpp"

namespace dermpc {
namespace {

RunConfig parse(const std::string& text, const std::filesystem::path& base = "/cfg") {
  std::istringstream in(text);
  return parse_run_config(in, "run.cfg", base);
}

TEST(RunConfigFile, ParsesEveryKind) {
  const RunConfig c = parse(
      "# comment\n"
      "net_demand = data/ld.csv\n"
      "net_demand_scale = 1e-3\n"
      "disturbance = /abs/brd.csv   # trailing\n"
      "tau_hours = 12\n"
      "shift_minutes = 15\n"
      "kappa_g = 4.5\n"
      "max_iter = 2000\n"
      "synthetic = yes\n"
      "perturb_whole_horizon = false\n");
  EXPECT_EQ(c.net_demand, "/cfg/data/ld.csv");
  EXPECT_EQ(c.disturbance, "/abs/brd.csv");
  EXPECT_EQ(c.net_demand_scale, 1e-3);
  EXPECT_EQ(c.tau_hours, 12.0);
  EXPECT_EQ(c.shift_minutes, 15.0);
  EXPECT_EQ(c.kappa_g, 4.5);
  EXPECT_EQ(c.max_iter, 2000);
  EXPECT_TRUE(c.synthetic);
  EXPECT_FALSE(c.perturb_whole_horizon);
  EXPECT_EQ(c.out_dir, "out");
}

TEST(RunConfigFile, ErrorsNameTheLine) {
  auto message = [](const std::string& text) {
    try {
      parse(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("tau_hours = 24\nhorizon = 3\n").find("run.cfg:2"), std::string::npos);
  EXPECT_NE(message("kappa_g = ten\n").find("run.cfg:1"), std::string::npos);
  EXPECT_NE(message("synthetic = maybe\n").find("boolean"), std::string::npos);
  EXPECT_NE(message("max_iter = 2.5\n").find("integer"), std::string::npos);
  EXPECT_NE(message("just words\n").find("key = value"), std::string::npos);
  EXPECT_THROW(load_run_config("/nonexistent/run.cfg"), ConfigError);
}

TEST(RunConfigFile, OverridesShadowFileValues) {
  RunConfig c = parse("tau_hours = 12\nkappa_g = 3\nout_dir = results\n");
  RunOverrides o;
  o.tau_hours = 6.0;
  o.out_dir = "elsewhere";
  apply_overrides(c, o);
  EXPECT_EQ(c.tau_hours, 6.0);
  EXPECT_EQ(c.out_dir, "elsewhere");
  EXPECT_EQ(c.kappa_g, 3.0);
  apply_overrides(c, RunOverrides{});
  EXPECT_EQ(c.tau_hours, 6.0);
}

TEST(MpcConfigFrom, ConvertsUnitsAndChecksShift) {
  RunConfig c;
  const MpcConfig m = mpc_config_from(c);
  EXPECT_EQ(m.horizon_steps, 288);
  EXPECT_EQ(m.shift_steps, 6);
  EXPECT_DOUBLE_EQ(m.step_hours, 1.0 / 12);
  c.tau_hours = 0.25;
  try {
    mpc_config_from(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("0 < t_s <= tau"), std::string::npos);
  }
  c.tau_hours = 24;
  c.shift_minutes = 7;
  EXPECT_THROW(mpc_config_from(c), ConfigError);
  c.shift_minutes = 0;
  EXPECT_THROW(mpc_config_from(c), ConfigError);
}

TEST(BuildScenario, SyntheticCoversTheRun) {
  RunConfig c;
  c.synthetic = true;
  c.duration_hours = 24;
  const Scenario sc = build_scenario(c);
  EXPECT_EQ(sc.duration_steps, 288);
  EXPECT_EQ(sc.fleet.size(), 5u);
  EXPECT_GE(static_cast<long>(sc.provider.base.size()), sc.required_coverage());
  ASSERT_TRUE(sc.provider.disturbance.has_value());
  EXPECT_EQ(sc.provider.injection_window_steps, 6);
  EXPECT_EQ(sc.settings.eps_primal, 1e-6);
}

TEST(BuildScenario, ShippedCsvSample) {
  const Scenario sc = build_scenario(load_run_config(DERMPC_DATA_DIR "/csv_sample.cfg"));
  EXPECT_EQ(sc.duration_steps, 288);
  EXPECT_EQ(sc.provider.base.size(), 576u);
  EXPECT_EQ(sc.fleet[4].id, "EVs");
  EXPECT_DOUBLE_EQ(sc.fleet[4].beta_hours, 300.0 / 3600.0);
}

TEST(BuildScenario, DataErrorsNameThePath) {
  RunConfig c;
  c.net_demand = "/nonexistent/ld.csv";
  try {
    build_scenario(c);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/ld.csv"), std::string::npos);
  }
  RunConfig none;
  EXPECT_THROW(build_scenario(none), ConfigError);
  RunConfig too_long = load_run_config(DERMPC_DATA_DIR "/csv_sample.cfg");
  too_long.duration_hours = 48;
  EXPECT_THROW(build_scenario(too_long), DataError);
  RunConfig bad_fleet;
  bad_fleet.synthetic = true;
  bad_fleet.fleet_file = "/nonexistent/fleet.txt";
  EXPECT_THROW(build_scenario(bad_fleet), DataError);
}

}  // namespace
}  // namespace dermpc
