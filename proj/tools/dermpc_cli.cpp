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

// dermpc: closed-loop DER dispatch runs and TCL limit derivation.
//
// Exit codes: 0 success, 1 unexpected error, 2 configuration error,
// 3 data error, 4 solver failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <fmt/format.h>

#include "dermpc/battery_model.hpp"
#include "dermpc/config.hpp"
#include "dermpc/errors.hpp"
#include "dermpc/sim_harness.hpp"

namespace {

enum ExitCode { kOk = 0, kUnexpected = 1, kConfig = 2, kData = 3, kSolver = 4 };

struct RunArgs {
  std::string config_path;
  dermpc::RunOverrides overrides;
};

void add_run_options(CLI::App& cmd, RunArgs& args) {
  auto& o = args.overrides;
  cmd.add_option("--config", args.config_path, "key = value config file");
  cmd.add_option("--fleet", o.fleet_file, "DER fleet file (default: built-in five-class fleet)");
  cmd.add_option("--net-demand", o.net_demand, "net-demand CSV");
  cmd.add_option("--disturbance", o.disturbance, "disturbance CSV");
  cmd.add_option("--out-dir", o.out_dir, "output directory");
  cmd.add_option("--tau-hours", o.tau_hours, "MPC horizon in hours");
  cmd.add_option("--shift-minutes", o.shift_minutes, "receding-horizon shift in minutes");
  cmd.add_option("--kappa-g", o.kappa_g, "generation-deviation weight");
  cmd.add_option("--duration-hours", o.duration_hours, "simulated span in hours");
  cmd.add_option("--tol", o.tol, "solver tolerance");
  cmd.add_option("--max-iter", o.max_iter, "solver iteration cap");
  cmd.add_flag("--synthetic{true}", o.synthetic, "use the built-in two-peak scenario");
  cmd.add_flag("--perturb-whole-horizon{true}", o.perturb_whole_horizon,
               "add the disturbance to the whole forecast window");
}

int cmd_run(const RunArgs& args, bool baseline) {
  dermpc::RunConfig config;
  if (!args.config_path.empty()) config = dermpc::load_run_config(args.config_path);
  dermpc::apply_overrides(config, args.overrides);
  dermpc::Scenario scenario = dermpc::build_scenario(config);
  if (baseline) scenario = dermpc::with_ders_disabled(scenario);

  const dermpc::SimulationResult result = dermpc::run(scenario);

  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) throw dermpc::DataError(fmt::format("cannot create output directory '{}': {}", config.out_dir, ec.message()));
  const std::filesystem::path out(config.out_dir);
  const std::string csv = (out / "trajectories.csv").string();
  const std::string metrics = (out / "metrics.txt").string();
  dermpc::write_trajectories_csv(csv, result);
  dermpc::write_metrics(metrics, result.metrics);

  const auto& m = result.metrics;
  fmt::print("{} run: {} steps, {} MPC iterations\n", baseline ? "baseline" : "mpc", m.steps, m.mpc_iterations);
  fmt::print("max ramp g {:.4f} GW/step, l {:.4f} GW/step\n", m.max_ramp_g_gw_per_step, m.max_ramp_l_gw_per_step);
  fmt::print("violations: soc {}, power {}; max balance residual {:.3e} GW\n", m.soc_violations, m.power_violations,
             m.max_balance_residual_gw);
  fmt::print("wrote {}\nwrote {}\n", csv, metrics);
  return kOk;
}

int cmd_derive(const std::string& path, const std::string& id, double beta_seconds, double kappa) {
  std::ifstream in(path);
  if (!in) throw dermpc::DataError("cannot open TCL parameter file '" + path + "'");
  const dermpc::TclParams tcl = dermpc::parse_tcl_params(in, path);
  const dermpc::DerClassParams cls = dermpc::derive_der_class(tcl, id, beta_seconds / dermpc::kSecondsPerHour, kappa);
  fmt::print("alpha = {}\n", cls.alpha);
  fmt::print("C_gwh = {}\n", cls.soc_capacity_gwh);
  fmt::print("eta_plus_gw = {}\n", cls.power_max_gw);
  fmt::print("eta_minus_gw = {}\n", cls.power_min_gw);
  fmt::print("# fleet file line: id alpha beta_seconds C eta_plus eta_minus kappa\n");
  fmt::print("{} {} {} {} {} {} {}\n", cls.id, cls.alpha, beta_seconds,
             cls.soc_capacity_gwh, cls.power_max_gw, cls.power_min_gw, cls.kappa);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Receding-horizon dispatch of DER aggregations"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "closed-loop MPC run; writes trajectories.csv and metrics.txt");
  add_run_options(*run, run_args);

  RunArgs base_args;
  CLI::App* base = app.add_subcommand("baseline", "same as run with every DER power limit forced to zero");
  add_run_options(*base, base_args);

  std::string tcl_path, tcl_id = "tcl";
  double beta_seconds = 300.0, kappa = 1.0;
  CLI::App* derive = app.add_subcommand("derive", "aggregate limits of a TCL population");
  derive->add_option("tcl_file", tcl_path, "key = value TCL parameter file")->required();
  derive->add_option("--id", tcl_id, "class id for the fleet-file line");
  derive->add_option("--beta-seconds", beta_seconds, "step length for the fleet-file line");
  derive->add_option("--kappa", kappa, "SoC weight for the fleet-file line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(run_args, false);
    if (*base) return cmd_run(base_args, true);
    if (*derive) return cmd_derive(tcl_path, tcl_id, beta_seconds, kappa);
  } catch (const dermpc::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const dermpc::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const dermpc::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnexpected;
  }
  return kUnexpected;
}
