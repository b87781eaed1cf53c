#include "abpid/scenario_io.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <system_error>

namespace abpid {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigurationError(fmt::format("{}: '{}' is not a number", key, s));
  }
  return v;
}

long parse_int(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigurationError(fmt::format("{}: '{}' is not an integer", key, s));
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigurationError(fmt::format("{}: '{}' is not a boolean", key, s));
}

Vec parse_vec(std::string_view key, std::string_view text, Eigen::Index n) {
  std::vector<double> values;
  std::string_view rest = text;
  while (true) {
    const auto comma = rest.find(',');
    values.push_back(parse_double(key, rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (static_cast<Eigen::Index>(values.size()) != n) {
    throw ConfigurationError(fmt::format("{}: expected {} comma-separated values", key, n));
  }
  return Eigen::Map<Vec>(values.data(), n);
}

std::string fmt_num(double v) { return fmt::format("{:.17g}", v); }

template <class V>
std::string fmt_vec(const V& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt_num(v[i]);
  }
  return out;
}

std::string kind_name(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kHover: return "hover";
    case TrajectoryKind::kFigureEight: return "figure8";
    case TrajectoryKind::kLateralMove: return "lateral";
  }
  return "figure8";
}

using Setter = std::function<void(RunSpec&, std::string_view key, std::string_view value)>;
using Getter = std::function<std::string(const RunSpec&)>;

struct Field {
  Setter set;
  Getter get;
};

template <class Member>
Field number(Member member) {
  return {[member](RunSpec& s, std::string_view k, std::string_view v) {
            member(s) = parse_double(k, v);
          },
          [member](const RunSpec& s) { return fmt_num(member(const_cast<RunSpec&>(s))); }};
}

template <class Member>
Field vector3(Member member) {
  return {[member](RunSpec& s, std::string_view k, std::string_view v) {
            member(s) = parse_vec(k, v, 3);
          },
          [member](const RunSpec& s) { return fmt_vec(member(const_cast<RunSpec&>(s))); }};
}

/// Ordered registry of every documented key.
const std::vector<std::pair<std::string, Field>>& registry() {
  static const std::vector<std::pair<std::string, Field>> fields = [] {
    std::vector<std::pair<std::string, Field>> f;
    const auto add = [&f](std::string key, Field field) { f.emplace_back(std::move(key), std::move(field)); };

    add("name", {[](RunSpec& s, std::string_view, std::string_view v) { s.scenario.name = trim(v); },
                 [](const RunSpec& s) { return s.scenario.name; }});
    add("duration", number([](RunSpec& s) -> double& { return s.scenario.duration; }));
    add("seed", {[](RunSpec& s, std::string_view k, std::string_view v) {
                   s.scenario.seed = static_cast<std::uint64_t>(parse_int(k, v));
                 },
                 [](const RunSpec& s) { return std::to_string(s.scenario.seed); }});

    add("trajectory.kind",
        {[](RunSpec& s, std::string_view k, std::string_view v) {
           const auto name = trim(v);
           if (name == "hover") s.scenario.trajectory.kind = TrajectoryKind::kHover;
           else if (name == "figure8") s.scenario.trajectory.kind = TrajectoryKind::kFigureEight;
           else if (name == "lateral") s.scenario.trajectory.kind = TrajectoryKind::kLateralMove;
           else throw ConfigurationError(fmt::format("{}: unknown kind '{}'", k, name));
         },
         [](const RunSpec& s) { return kind_name(s.scenario.trajectory.kind); }});
#define ABPID_TRAJ(field) \
  add("trajectory." #field, number([](RunSpec& s) -> double& { return s.scenario.trajectory.field; }))
    ABPID_TRAJ(altitude);
    ABPID_TRAJ(hold);
    ABPID_TRAJ(takeoff);
    ABPID_TRAJ(settle);
    ABPID_TRAJ(land);
    ABPID_TRAJ(amplitude_x);
    ABPID_TRAJ(amplitude_y);
    ABPID_TRAJ(period);
    ABPID_TRAJ(ramp);
    ABPID_TRAJ(move_x);
    ABPID_TRAJ(move_y);
    ABPID_TRAJ(move_duration);
    ABPID_TRAJ(hover_time);
#undef ABPID_TRAJ
    add("trajectory.loops",
        {[](RunSpec& s, std::string_view k, std::string_view v) {
           s.scenario.trajectory.loops = static_cast<int>(parse_int(k, v));
         },
         [](const RunSpec& s) { return std::to_string(s.scenario.trajectory.loops); }});

    add("payload.attached",
        {[](RunSpec& s, std::string_view k, std::string_view v) {
           s.scenario.payload.attached = parse_bool(k, v);
         },
         [](const RunSpec& s) { return std::string(s.scenario.payload.attached ? "true" : "false"); }});
    add("payload.mass", number([](RunSpec& s) -> double& { return s.scenario.payload.mass; }));
    add("payload.position",
        vector3([](RunSpec& s) -> quad::Vec3& { return s.scenario.payload.position; }));
    add("payload.attach_time",
        number([](RunSpec& s) -> double& { return s.scenario.payload.attach_time; }));
    add("payload.detach_time",
        number([](RunSpec& s) -> double& { return s.scenario.payload.detach_time; }));

    const auto gust = [](RunSpec& s) -> quad::WindGust& {
      if (!s.scenario.gust) s.scenario.gust.emplace();
      return *s.scenario.gust;
    };
    add("gust.enabled",
        {[](RunSpec& s, std::string_view k, std::string_view v) {
           if (parse_bool(k, v)) {
             if (!s.scenario.gust) s.scenario.gust.emplace();
           } else {
             s.scenario.gust.reset();
           }
         },
         [](const RunSpec& s) { return std::string(s.scenario.gust ? "true" : "false"); }});
    add("gust.onset", number([gust](RunSpec& s) -> double& { return gust(s).onset; }));
    add("gust.force", vector3([gust](RunSpec& s) -> quad::Vec3& { return gust(s).force; }));
    add("gust.torque", vector3([gust](RunSpec& s) -> quad::Vec3& { return gust(s).torque; }));
    add("gust.profile",
        {[gust](RunSpec& s, std::string_view k, std::string_view v) {
           const auto name = trim(v);
           if (name == "step") gust(s).profile = quad::GustProfile::kStep;
           else if (name == "ramped") gust(s).profile = quad::GustProfile::kRamped;
           else throw ConfigurationError(fmt::format("{}: unknown profile '{}'", k, name));
         },
         [](const RunSpec& s) {
           if (!s.scenario.gust) return std::string("step");
           return std::string(s.scenario.gust->profile == quad::GustProfile::kStep ? "step" : "ramped");
         }});
    add("gust.rise_time", number([gust](RunSpec& s) -> double& { return gust(s).rise_time; }));
    add("gust.duration", number([gust](RunSpec& s) -> double& { return gust(s).duration; }));

    add("noise.position_sigma",
        number([](RunSpec& s) -> double& { return s.scenario.noise.position_sigma; }));
    add("noise.attitude_sigma",
        number([](RunSpec& s) -> double& { return s.scenario.noise.attitude_sigma; }));
    add("noise.rate_sigma", number([](RunSpec& s) -> double& { return s.scenario.noise.rate_sigma; }));
    add("noise.lowpass_tau",
        number([](RunSpec& s) -> double& { return s.scenario.noise.lowpass_tau; }));
    add("noise.feedback_delay",
        {[](RunSpec& s, std::string_view k, std::string_view v) {
           s.scenario.noise.feedback_delay = static_cast<int>(parse_int(k, v));
         },
         [](const RunSpec& s) { return std::to_string(s.scenario.noise.feedback_delay); }});

    const auto gain6 = [&add](const std::string& key, auto pick) {
      add(key, {[pick](RunSpec& s, std::string_view k, std::string_view v) {
                  const Vec x = parse_vec(k, v, 6);
                  pick(s.gains.outer) = x.head(3);
                  pick(s.gains.inner) = x.tail(3);
                },
                [pick](const RunSpec& s) {
                  Vec x(6);
                  x << pick(const_cast<BacksteppingGains&>(s.gains.outer)),
                      pick(const_cast<BacksteppingGains&>(s.gains.inner));
                  return fmt_vec(x);
                }});
    };
    gain6("gains.k1", [](BacksteppingGains& g) -> Vec& { return g.k1; });
    gain6("gains.k2", [](BacksteppingGains& g) -> Vec& { return g.k2; });
    gain6("gains.gamma", [](BacksteppingGains& g) -> Vec& { return g.gamma; });

    add("controller.form",
        {[](RunSpec& s, std::string_view k, std::string_view v) {
           const auto name = trim(v);
           if (name == "pid") s.config.form = ControlForm::kPid;
           else if (name == "arc") s.config.form = ControlForm::kArc;
           else throw ConfigurationError(fmt::format("{}: expected pid or arc", k));
         },
         [](const RunSpec& s) { return std::string(s.config.form == ControlForm::kPid ? "pid" : "arc"); }});
    add("controller.adjusted",
        {[](RunSpec& s, std::string_view k, std::string_view v) { s.config.adjusted = parse_bool(k, v); },
         [](const RunSpec& s) { return std::string(s.config.adjusted ? "true" : "false"); }});
    add("controller.e1_dot_tau", number([](RunSpec& s) -> double& { return s.config.e1_dot_tau; }));
    const auto optional_number = [&add](const std::string& key, auto pick) {
      add(key, {[pick](RunSpec& s, std::string_view k, std::string_view v) {
                  if (trim(v) == "auto") pick(s).reset();
                  else pick(s) = parse_double(k, v);
                },
                [pick](const RunSpec& s) {
                  const auto& o = pick(const_cast<RunSpec&>(s));
                  return o ? fmt_num(*o) : std::string("auto");
                }});
    };
    optional_number("controller.d_bar_outer",
                    [](RunSpec& s) -> std::optional<double>& { return s.config.d_bar_outer; });
    optional_number("controller.d_bar_inner",
                    [](RunSpec& s) -> std::optional<double>& { return s.config.d_bar_inner; });
    add("robust.mode",
        {[](RunSpec& s, std::string_view k, std::string_view v) {
           const auto name = trim(v);
           if (name == "constant") s.config.robust_mode = RobustMode::kConstant;
           else if (name == "nonlinear") s.config.robust_mode = RobustMode::kNonlinear;
           else throw ConfigurationError(fmt::format("{}: expected constant or nonlinear", k));
         },
         [](const RunSpec& s) {
           return std::string(s.config.robust_mode == RobustMode::kConstant ? "constant" : "nonlinear");
         }});
    add("robust.epsilon", number([](RunSpec& s) -> double& { return s.config.robust_epsilon; }));
    add("robust.k20", {[](RunSpec& s, std::string_view k, std::string_view v) {
                         s.config.robust_k20 = parse_vec(k, v, 6);
                       },
                       [](const RunSpec& s) { return fmt_vec(s.config.robust_k20); }});

    add("estimator.enabled",
        {[](RunSpec& s, std::string_view k, std::string_view v) { s.config.rls_enabled = parse_bool(k, v); },
         [](const RunSpec& s) { return std::string(s.config.rls_enabled ? "true" : "false"); }});
    add("estimator.lambda", number([](RunSpec& s) -> double& { return s.config.rls_lambda; }));
    add("estimator.p0", number([](RunSpec& s) -> double& { return s.config.rls_p0; }));
    add("estimator.filter_tau", number([](RunSpec& s) -> double& { return s.config.rls_filter_tau; }));
    add("estimator.theta_limit", number([](RunSpec& s) -> double& { return s.config.theta_limit; }));

    add("sim.dt_plant", number([](RunSpec& s) -> double& { return s.config.dt_plant; }));
    add("sim.dt_control", number([](RunSpec& s) -> double& { return s.config.dt_control; }));
    add("sim.motor_tau", number([](RunSpec& s) -> double& { return s.config.motor_tau; }));
    add("sim.attitude_ref_tau", number([](RunSpec& s) -> double& { return s.config.attitude_ref_tau; }));
    add("sim.max_tilt", number([](RunSpec& s) -> double& { return s.config.max_tilt; }));
    add("sim.score_margin", number([](RunSpec& s) -> double& { return s.config.score_margin; }));

    add("sim.ground_contact",
        {[](RunSpec& s, std::string_view k, std::string_view v) {
           s.config.ground_contact = parse_bool(k, v);
         },
         [](const RunSpec& s) { return std::string(s.config.ground_contact ? "true" : "false"); }});
    add("vehicle.mass", number([](RunSpec& s) -> double& { return s.config.vehicle.mass; }));
    add("vehicle.inertia",
        {[](RunSpec& s, std::string_view k, std::string_view v) {
           s.config.vehicle.inertia = parse_vec(k, v, 3).asDiagonal();
         },
         [](const RunSpec& s) { return fmt_vec(Vec(s.config.vehicle.inertia.diagonal())); }});
    add("vehicle.arm_length", number([](RunSpec& s) -> double& { return s.config.vehicle.arm_length; }));
    add("vehicle.kt", number([](RunSpec& s) -> double& { return s.config.vehicle.kt; }));
    add("vehicle.kq", number([](RunSpec& s) -> double& { return s.config.vehicle.kq; }));
    add("vehicle.omega_sq_max",
        number([](RunSpec& s) -> double& { return s.config.vehicle.omega_sq_max; }));
    return f;
  }();
  return fields;
}

const Field* find_field(std::string_view key) {
  for (const auto& [k, f] : registry()) {
    if (k == key) return &f;
  }
  return nullptr;
}

}  // namespace

std::vector<std::string> builtin_scenario_names() { return {"figure8", "payload_drop", "hover"}; }

RunSpec builtin_run_spec(std::string_view name) {
  if (name == "figure8") return {figure8_scenario(), LoopGains::baseline(), {}};
  if (name == "payload_drop") return {payload_drop_scenario(), LoopGains::payload_drop(), {}};
  if (name == "hover") return {hover_scenario(), LoopGains::baseline(), {}};
  throw ConfigurationError(fmt::format("unknown built-in scenario '{}'", name));
}

KeyValues parse_key_values(std::istream& in) {
  KeyValues out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigurationError(fmt::format("line {}: expected 'key = value'", lineno));
    }
    std::string key = trim(std::string_view(content).substr(0, eq));
    if (key.empty()) throw ConfigurationError(fmt::format("line {}: empty key", lineno));
    out.emplace_back(std::move(key), trim(std::string_view(content).substr(eq + 1)));
  }
  return out;
}

void apply_setting(RunSpec& spec, std::string_view key, std::string_view value) {
  const Field* field = find_field(key);
  if (field == nullptr) throw ConfigurationError(fmt::format("unknown key '{}'", key));
  field->set(spec, key, value);
}

RunSpec load_run_spec(std::istream& in) {
  const auto kv = parse_key_values(in);
  std::string base = "figure8";
  for (const auto& [k, v] : kv) {
    if (k == "base") base = v;
  }
  RunSpec spec = builtin_run_spec(base);
  bool duration_set = false;
  for (const auto& [k, v] : kv) {
    if (k == "base") continue;
    apply_setting(spec, k, v);
    duration_set = duration_set || k == "duration";
  }
  // Trajectory edits move the natural end of the run unless pinned explicitly.
  if (!duration_set) spec.scenario.duration = spec.scenario.trajectory.total_duration();
  return spec;
}

std::string dump_run_spec(const RunSpec& spec) {
  std::string out;
  for (const auto& [k, f] : registry()) {
    if (k.rfind("gust.", 0) == 0 && k != "gust.enabled" && !spec.scenario.gust) continue;
    out += fmt::format("{} = {}\n", k, f.get(spec));
  }
  return out;
}

std::vector<std::string> telemetry_columns() {
  std::vector<std::string> c = {"t", "x", "y", "z", "roll", "pitch", "yaw"};
  for (const char* a : {"x", "y", "z", "roll", "pitch", "yaw"}) c.push_back(std::string(a) + "_d");
  for (const char* a : {"x", "y", "z", "roll", "pitch", "yaw"}) c.push_back("e_" + std::string(a));
  for (const char* a : {"F_tc", "T1c", "T2c", "T3c"}) c.emplace_back(a);
  for (int i = 1; i <= 6; ++i) c.push_back(fmt::format("d_c_hat_{}", i));
  c.emplace_back("theta_hat_rx");
  c.emplace_back("theta_hat_ry");
  for (int i = 1; i <= 4; ++i) c.push_back(fmt::format("omega_sq_{}", i));
  c.emplace_back("payload_attached");
  c.emplace_back("gust_active");
  c.emplace_back("saturated");
  return c;
}

void write_telemetry_csv(std::ostream& out, std::span<const TelemetryRow> rows) {
  const auto cols = telemetry_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  const auto put = [&out](const auto& arr) {
    for (double v : arr) out << ',' << fmt_num(v);
  };
  for (const auto& r : rows) {
    out << fmt_num(r.t);
    put(r.pose);
    put(r.ref);
    put(r.err);
    put(r.u);
    put(r.d_c_hat);
    put(r.theta_hat);
    put(r.omega_sq);
    out << ',' << int(r.payload) << ',' << int(r.gust) << ',' << int(r.saturated) << '\n';
  }
}

std::string metrics_json(const RunResult& result, const std::string& scenario_name) {
  using nlohmann::json;
  const auto& m = result.metrics;
  const std::array<const char*, 6> axes = {"x", "y", "z", "roll", "pitch", "yaw"};
  json mae = json::object(), max_err = json::object();
  for (std::size_t i = 0; i < 6; ++i) {
    mae[axes[i]] = m.mae[i];
    max_err[axes[i]] = m.max_error[i];
  }
  json rms = json::object();
  const std::array<const char*, 4> inputs = {"F_tc", "T1c", "T2c", "T3c"};
  for (std::size_t i = 0; i < 4; ++i) rms[inputs[i]] = m.rms_control[i];
  json j = {{"scenario", scenario_name},
            {"samples", result.telemetry.size()},
            {"mae", mae},
            {"max_error", max_err},
            {"rms_control", rms},
            {"saturation_count", m.saturation_count},
            {"fault", result.fault ? json(*result.fault) : json(nullptr)},
            {"d_bar_outer", result.d_bar_outer},
            {"d_bar_inner", result.d_bar_inner},
            {"rls_resets", result.rls_resets}};
  return j.dump(2) + "\n";
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error(fmt::format("write to {} failed", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error(fmt::format("cannot rename into {}", path.string()));
  }
}

}  // namespace abpid
