#pragma once

#include "abpid/harness.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace abpid {

/// Everything a `simulate` run needs.
struct RunSpec {
  Scenario scenario;
  LoopGains gains;
  SimConfig config;
};

/// Names accepted by builtin_run_spec.
std::vector<std::string> builtin_scenario_names();

/// "figure8" (baseline gains), "payload_drop" (LoopGains::payload_drop) or "hover".
/// Throws ConfigurationError for unknown names.
RunSpec builtin_run_spec(std::string_view name);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines; `#` starts a comment, blank lines are ignored.
KeyValues parse_key_values(std::istream& in);

/// Applies one dotted key. Vector values are comma separated. Throws
/// ConfigurationError on unknown keys or malformed values.
void apply_setting(RunSpec& spec, std::string_view key, std::string_view value);

/// Builds a spec from a config file. An optional leading `base = <builtin>`
/// selects the defaults the remaining keys override (figure8 otherwise).
RunSpec load_run_spec(std::istream& in);

/// Effective configuration as key = value lines accepted by load_run_spec.
std::string dump_run_spec(const RunSpec& spec);

std::vector<std::string> telemetry_columns();
void write_telemetry_csv(std::ostream& out, std::span<const TelemetryRow> rows);

/// JSON summary: per-axis MAE and max error, RMS control, saturation count,
/// fault record and the disturbance bounds used.
std::string metrics_json(const RunResult& result, const std::string& scenario_name);

/// Writes through a temporary file in the same directory and renames it into
/// place. Throws std::runtime_error on I/O failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace abpid
