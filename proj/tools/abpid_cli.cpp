// abpid command line front end: simulate, tune, region.
//
// Exit codes
//   0  success
//   1  internal error
//   2  usage error (bad flags)
//   3  invalid configuration or input value
//   4  infeasible gains
//   5  simulation fault (outputs are still written)
//   6  I/O failure
//
// Every failure prints one line `error[<kind>]: <message>` to stderr.

#include "abpid/gainmap.hpp"
#include "abpid/harness.hpp"
#include "abpid/scenario_io.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace abpid;

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kInfeasible = 4,
  kFault = 5,
  kIo = 6,
};

/// Failure carrying its exit code and tag.
struct CliError {
  Exit code;
  std::string kind;
  std::string message;
};

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::string g6(double v) { return fmt::format("{:.6g}", v); }

std::pair<double, double> parse_range(const std::string& flag, const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw CliError{kUsage, "usage", fmt::format("{} expects lo,hi", flag)};
  }
  try {
    const double lo = std::stod(text.substr(0, comma));
    const double hi = std::stod(text.substr(comma + 1));
    return {lo, hi};
  } catch (const std::exception&) {
    throw CliError{kUsage, "usage", fmt::format("{} expects two numbers, got '{}'", flag, text)};
  }
}

void write_output(const fs::path& path, std::string_view content) {
  try {
    write_file_atomic(path, content);
  } catch (const std::exception& e) {
    throw CliError{kIo, "io", e.what()};
  }
}

struct SimulateOptions {
  std::string scenario = "figure8";
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::optional<double> kp, kd, ki, gamma, k1, k2;
  std::optional<bool> adjusted;
  std::optional<std::string> robust_mode;
};

RunSpec resolve_spec(const SimulateOptions& o) {
  const fs::path path(o.scenario);
  if (fs::is_regular_file(path)) {
    std::ifstream in(path);
    if (!in) throw CliError{kIo, "io", fmt::format("cannot read {}", o.scenario)};
    return load_run_spec(in);
  }
  for (const auto& name : builtin_scenario_names()) {
    if (name == o.scenario) return builtin_run_spec(name);
  }
  throw CliError{kConfig, "config",
                 fmt::format("'{}' is neither a scenario file nor a built-in scenario ({})",
                             o.scenario, fmt::join(builtin_scenario_names(), ", "))};
}

/// Lateral (x, y) gain override from either gain family.
void apply_lateral_gains(RunSpec& spec, const SimulateOptions& o) {
  const bool pid = o.kp || o.kd || o.ki;
  const bool back = o.k1 || o.k2;
  if (pid && back) {
    throw CliError{kUsage, "usage", "give either --kp/--kd[/--ki] or --k1/--k2, not both"};
  }
  const double gamma = o.gamma.value_or(spec.gains.outer.gamma[0]);
  if (pid) {
    if (!o.kp || !o.kd) throw CliError{kUsage, "usage", "--kp and --kd must be given together"};
    const Vec kP = Vec::Constant(2, *o.kp), kD = Vec::Constant(2, *o.kd);
    const auto g = backstepping_from_pid(kP, kD, Vec::Constant(2, gamma));
    if (o.ki) {
      const double implied = gamma * g.k1[0];
      if (std::abs(*o.ki - implied) > 1e-6 * std::max(1.0, std::abs(implied))) {
        throw CliError{kConfig, "config",
                       fmt::format("--ki {} is inconsistent with kI = gamma k1 = {}", g6(*o.ki),
                                   g6(implied))};
      }
    }
    for (int i = 0; i < 2; ++i) {
      spec.gains.outer.k1[i] = g.k1[i];
      spec.gains.outer.k2[i] = g.k2[i];
      spec.gains.outer.gamma[i] = gamma;
    }
  } else if (back) {
    if (!o.k1 || !o.k2) throw CliError{kUsage, "usage", "--k1 and --k2 must be given together"};
    for (int i = 0; i < 2; ++i) {
      spec.gains.outer.k1[i] = *o.k1;
      spec.gains.outer.k2[i] = *o.k2;
      spec.gains.outer.gamma[i] = gamma;
    }
  } else if (o.gamma) {
    for (int i = 0; i < 2; ++i) spec.gains.outer.gamma[i] = gamma;
  }
}

int cmd_simulate(const SimulateOptions& o) {
  RunSpec spec = resolve_spec(o);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw CliError{kUsage, "usage", fmt::format("--set expects key=value, got '{}'", kv)};
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    apply_setting(spec, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (o.seed) spec.scenario.seed = *o.seed;
  if (o.adjusted) spec.config.adjusted = *o.adjusted;
  if (o.robust_mode) apply_setting(spec, "robust.mode", *o.robust_mode);
  apply_lateral_gains(spec, o);

  const RunResult result = simulate(spec.scenario, spec.gains, spec.config);

  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError{kIo, "io", fmt::format("cannot create {}: {}", o.out, ec.message())};
  std::ostringstream csv;
  write_telemetry_csv(csv, result.telemetry);
  write_output(dir / "telemetry.csv", csv.str());
  write_output(dir / "metrics.json", metrics_json(result, spec.scenario.name));
  write_output(dir / "effective_config.txt", dump_run_spec(spec));

  const auto& m = result.metrics;
  fmt::print("scenario {}: {} samples\n", spec.scenario.name, result.telemetry.size());
  fmt::print("MAE x,y,z [m]: {} {} {}\n", g6(m.mae[0]), g6(m.mae[1]), g6(m.mae[2]));
  fmt::print("max error x,y,z [m]: {} {} {}\n", g6(m.max_error[0]), g6(m.max_error[1]),
             g6(m.max_error[2]));
  fmt::print("saturation count: {}\n", m.saturation_count);
  fmt::print("outputs: {}\n", dir.string());
  if (result.fault) throw CliError{kFault, "fault", *result.fault};
  return kOk;
}

struct TuneOptions {
  std::optional<double> kp, kd, k1, k2;
  double gamma = 0.0;
  bool adjusted = true;
};

int cmd_tune(const TuneOptions& o) {
  const bool pid = o.kp || o.kd;
  const bool back = o.k1 || o.k2;
  if (pid == back) {
    throw CliError{kUsage, "usage", "give exactly one of (--kp, --kd) or (--k1, --k2)"};
  }
  if (pid) {
    if (!o.kp || !o.kd) throw CliError{kUsage, "usage", "--kp and --kd must be given together"};
    const auto r = backstepping_from_pid(*o.kp, *o.kd, o.gamma);
    fmt::print("input: kP={} kD={} gamma={}\n", g6(*o.kp), g6(*o.kd), g6(o.gamma));
    fmt::print("kp_max(kD, gamma) = {}\n", g6(kp_max(*o.kd, o.gamma)));
    if (*o.kp >= 1.0 + o.gamma) fmt::print("kd_min(kP, gamma) = {}\n", g6(kd_min(*o.kp, o.gamma)));
    if (!r.feasible) {
      fmt::print("feasible: no\n");
      throw CliError{kInfeasible, "infeasible", describe_infeasibility(*o.kp, *o.kd, o.gamma)};
    }
    fmt::print("k1 = {}\nk2 = {}\nkI = {}\n", g6(r.k1), g6(r.k2), g6(o.gamma * r.k1));
    fmt::print("feasible: yes{}\n", r.boundary ? " (on the kp_max boundary, k1 = k2)" : "");
    return kOk;
  }
  if (!o.k1 || !o.k2) throw CliError{kUsage, "usage", "--k1 and --k2 must be given together"};
  const auto p = pid_from_backstepping(*o.k1, *o.k2, o.gamma, o.adjusted);
  fmt::print("input: k1={} k2={} gamma={}\n", g6(*o.k1), g6(*o.k2), g6(o.gamma));
  fmt::print("kP = {} ({})\nkD = {}\nkI = {}\n", g6(p.kP), o.adjusted ? "adjusted" : "unadjusted",
             g6(p.kD), g6(p.kI));
  const double kp_adj = o.adjusted ? p.kP : p.kP + o.gamma;
  fmt::print("kp_max(kD, gamma) = {}\n", g6(kp_max(p.kD, o.gamma)));
  fmt::print("kd_min(kP, gamma) = {}\n", g6(kd_min(kp_adj, o.gamma)));
  fmt::print("feasible: yes{}\n", *o.k1 == *o.k2 ? " (on the kp_max boundary, k1 = k2)" : "");
  return kOk;
}

struct RegionOptions {
  std::string kp_range, kd_range;
  double gamma = 0.0;
  int resolution = 101;
  std::string out = "feasibility.csv";
};

int cmd_region(const RegionOptions& o) {
  const auto [kp_lo, kp_hi] = parse_range("--kp-range", o.kp_range);
  const auto [kd_lo, kd_hi] = parse_range("--kd-range", o.kd_range);
  const auto points = feasibility_sweep({kp_lo, kp_hi}, {kd_lo, kd_hi}, o.gamma, o.resolution);
  std::ostringstream csv;
  write_feasibility_csv(csv, points);
  write_output(o.out, csv.str());
  std::size_t feasible = 0;
  for (const auto& p : points) feasible += p.feasible ? 1 : 0;
  fmt::print("{} of {} grid points feasible; written to {}\n", feasible, points.size(), o.out);
  return kOk;
}

int fail(const CliError& e) {
  fmt::print(stderr, "error[{}]: {}\n", e.kind, one_line(e.message));
  return e.code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive backstepping / PID quadrotor tools"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run a scenario and write telemetry");
  simulate_cmd->add_option("--scenario", sim.scenario, "Built-in name or config file path")
      ->capture_default_str();
  simulate_cmd->add_option("--out", sim.out, "Output directory")->capture_default_str();
  simulate_cmd->add_option("--seed", sim.seed, "Noise seed");
  simulate_cmd->add_option("--set", sim.sets, "Override key=value (repeatable)");
  simulate_cmd->add_option("--kp", sim.kp, "Lateral kP (x, y)");
  simulate_cmd->add_option("--kd", sim.kd, "Lateral kD (x, y)");
  simulate_cmd->add_option("--ki", sim.ki, "Lateral kI, checked against gamma k1");
  simulate_cmd->add_option("--k1", sim.k1, "Lateral k1 (x, y)");
  simulate_cmd->add_option("--k2", sim.k2, "Lateral k2 (x, y)");
  simulate_cmd->add_option("--gamma", sim.gamma, "Lateral gamma (x, y)");
  simulate_cmd->add_flag("--adjusted,!--no-adjusted", sim.adjusted, "PID integrator form");
  simulate_cmd->add_option("--robust-mode", sim.robust_mode, "constant or nonlinear")
      ->check(CLI::IsMember({"constant", "nonlinear"}));

  TuneOptions tune;
  auto* tune_cmd = app.add_subcommand("tune", "Convert between PID and backstepping gains");
  tune_cmd->add_option("--kp", tune.kp, "Proportional gain");
  tune_cmd->add_option("--kd", tune.kd, "Derivative gain");
  tune_cmd->add_option("--k1", tune.k1, "First backstepping gain");
  tune_cmd->add_option("--k2", tune.k2, "Second backstepping gain");
  tune_cmd->add_option("--gamma", tune.gamma, "Adaptation gain")->required();
  tune_cmd->add_flag("--adjusted,!--no-adjusted", tune.adjusted, "Report the adjusted kP")
      ->capture_default_str();

  RegionOptions region;
  auto* region_cmd = app.add_subcommand("region", "Sweep the feasible (kP, kD) region to CSV");
  region_cmd->add_option("--kp-range", region.kp_range, "lo,hi")->required();
  region_cmd->add_option("--kd-range", region.kd_range, "lo,hi")->required();
  region_cmd->add_option("--gamma", region.gamma, "Adaptation gain")->capture_default_str();
  region_cmd->add_option("--resolution", region.resolution, "Grid points per axis")
      ->capture_default_str();
  region_cmd->add_option("--out", region.out, "CSV path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail({kUsage, "usage", e.what()});
  }

  try {
    if (*simulate_cmd) return cmd_simulate(sim);
    if (*tune_cmd) return cmd_tune(tune);
    if (*region_cmd) return cmd_region(region);
    return fail({kUsage, "usage", "no subcommand"});
  } catch (const CliError& e) {
    return fail(e);
  } catch (const InfeasibleGains& e) {
    return fail({kInfeasible, "infeasible", e.what()});
  } catch (const ConfigurationError& e) {
    return fail({kConfig, "config", e.what()});
  } catch (const ContractViolation& e) {
    return fail({kConfig, "config", e.what()});
  } catch (const DomainError& e) {
    return fail({kConfig, "config", e.what()});
  } catch (const std::exception& e) {
    return fail({kInternal, "internal", e.what()});
  }
}
