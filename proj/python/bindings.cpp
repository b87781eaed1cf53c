#include "abpid/core.hpp"
#include "abpid/estimator.hpp"
#include "abpid/gainmap.hpp"
#include "abpid/harness.hpp"
#include "abpid/quadrotor.hpp"
#include "abpid/scenario_io.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>

namespace py = pybind11;
using namespace abpid;

namespace {

py::dict metrics_dict(const RunMetrics& m) {
  py::dict d;
  d["mae"] = std::vector<double>(m.mae.begin(), m.mae.end());
  d["max_error"] = std::vector<double>(m.max_error.begin(), m.max_error.end());
  d["rms_control"] = std::vector<double>(m.rms_control.begin(), m.rms_control.end());
  d["saturation_count"] = m.saturation_count;
  return d;
}

py::array_t<double> telemetry_array(const std::vector<TelemetryRow>& rows) {
  const auto cols = telemetry_columns().size();
  py::array_t<double> out({rows.size(), cols});
  auto a = out.mutable_unchecked<2>();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    std::size_t c = 0;
    const auto put = [&](double v) { a(static_cast<py::ssize_t>(k), static_cast<py::ssize_t>(c++)) = v; };
    put(r.t);
    for (double v : r.pose) put(v);
    for (double v : r.ref) put(v);
    for (double v : r.err) put(v);
    for (double v : r.u) put(v);
    for (double v : r.d_c_hat) put(v);
    for (double v : r.theta_hat) put(v);
    for (double v : r.omega_sq) put(v);
    put(r.payload);
    put(r.gust);
    put(r.saturated);
  }
  return out;
}

RunSpec make_spec(const std::string& scenario, const std::map<std::string, std::string>& overrides,
                  std::optional<std::uint64_t> seed) {
  RunSpec spec = builtin_run_spec(scenario);
  for (const auto& [k, v] : overrides) apply_setting(spec, k, v);
  if (seed) spec.scenario.seed = *seed;
  return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive robust backstepping and its PID form, with a quadrotor simulator";

  auto base = py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  py::register_exception<ConfigurationError>(m, "ConfigurationError", PyExc_ValueError);
  py::register_exception<InfeasibleGains>(m, "InfeasibleGains", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<SingularityError>(m, "SingularityError", PyExc_ArithmeticError);
  (void)base;

  m.def(
      "proj",
      [](double x_hat, double lo, double hi, double v) { return proj(x_hat, {lo, hi}, v); },
      py::arg("x_hat"), py::arg("lo"), py::arg("hi"), py::arg("v"),
      "Projection of an update direction onto the box [lo, hi].");

  m.def(
      "error_signals",
      [](const Vec& x1, const Vec& x2, const Vec& x1d, const Vec& x1d_dot, const Vec& k1) {
        const auto e = error_signals(x1, x2, x1d, x1d_dot, k1);
        py::dict d;
        d["e1"] = e.e1;
        d["e1_dot"] = e.e1_dot;
        d["e2"] = e.e2;
        d["alpha"] = e.alpha;
        return d;
      },
      py::arg("x1"), py::arg("x2"), py::arg("x1d"), py::arg("x1d_dot"), py::arg("k1"));

  m.def(
      "pid_from_backstepping",
      [](double k1, double k2, double gamma, bool adjusted) {
        const auto p = pid_from_backstepping(k1, k2, gamma, adjusted);
        return py::make_tuple(p.kP, p.kD, p.kI);
      },
      py::arg("k1"), py::arg("k2"), py::arg("gamma"), py::arg("adjusted") = true,
      "Returns (kP, kD, kI).");

  py::class_<GainConversionResult>(m, "GainConversion")
      .def_readonly("k1", &GainConversionResult::k1)
      .def_readonly("k2", &GainConversionResult::k2)
      .def_readonly("discriminant", &GainConversionResult::discriminant)
      .def_readonly("boundary", &GainConversionResult::boundary)
      .def_readonly("feasible", &GainConversionResult::feasible)
      .def("__repr__", [](const GainConversionResult& r) {
        return "GainConversion(k1=" + std::to_string(r.k1) + ", k2=" + std::to_string(r.k2) +
               ", feasible=" + (r.feasible ? "True" : "False") + ")";
      });

  m.def("backstepping_from_pid",
        py::overload_cast<double, double, double>(&backstepping_from_pid), py::arg("kP"),
        py::arg("kD"), py::arg("gamma"));
  m.def("kp_max", &kp_max, py::arg("kD"), py::arg("gamma"));
  m.def("kd_min", &kd_min, py::arg("kP"), py::arg("gamma"));
  m.def("describe_infeasibility", &describe_infeasibility, py::arg("kP"), py::arg("kD"),
        py::arg("gamma"));

  m.def(
      "feasibility_sweep",
      [](std::pair<double, double> kp, std::pair<double, double> kd, double gamma,
         int resolution) {
        const auto pts = feasibility_sweep({kp.first, kp.second}, {kd.first, kd.second}, gamma,
                                           resolution);
        py::array_t<double> out({pts.size(), std::size_t{6}});
        auto a = out.mutable_unchecked<2>();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t i = 0; i < pts.size(); ++i) {
          const auto k = static_cast<py::ssize_t>(i);
          a(k, 0) = pts[i].kP;
          a(k, 1) = pts[i].kD;
          a(k, 2) = pts[i].gamma;
          a(k, 3) = pts[i].feasible ? 1.0 : 0.0;
          a(k, 4) = pts[i].k1.value_or(nan);
          a(k, 5) = pts[i].k2.value_or(nan);
        }
        return out;
      },
      py::arg("kp_range"), py::arg("kd_range"), py::arg("gamma"), py::arg("resolution"),
      "Rows of (kP, kD, gamma, feasible, k1, k2); k1/k2 are NaN where infeasible.");

  m.def(
      "rls_update",
      [](const Vec& theta_hat, const Mat& P, double lambda, const Vec& regressor,
         double residual, double bound) {
        RlsState s{theta_hat, P, lambda};
        const std::vector<Bounds1D> b(static_cast<std::size_t>(theta_hat.size()),
                                      Bounds1D::symmetric(bound));
        const auto next = rls_update(s, regressor, residual, b);
        return py::make_tuple(next.theta_hat, next.P);
      },
      py::arg("theta_hat"), py::arg("P"), py::arg("lam"), py::arg("regressor"),
      py::arg("residual"), py::arg("bound") = std::numeric_limits<double>::infinity(),
      "One scalar-measurement RLS step; returns (theta_hat, P).");

  m.def(
      "world_force",
      [](const quad::Vec3& eta, double thrust) { return quad::world_force(eta, thrust); },
      py::arg("eta"), py::arg("thrust"));
  m.def(
      "thrust_and_attitude_from_u",
      [](const quad::Vec3& u, double yaw) {
        const auto r = quad::thrust_and_attitude_from_u(u, yaw);
        return py::make_tuple(r.thrust, r.roll, r.pitch);
      },
      py::arg("u"), py::arg("yaw"), "Returns (thrust, roll, pitch).");
  m.def(
      "rotor_mixing",
      [](double thrust, const quad::Vec3& torque) {
        const auto c = quad::rotor_mixing(thrust, torque, quad::QuadrotorParams::qball2());
        return py::make_tuple(c.omega_sq, c.saturated);
      },
      py::arg("thrust"), py::arg("torque"), "Squared rotor speeds and a saturation flag.");

  m.def("builtin_scenarios", &builtin_scenario_names);
  m.def("telemetry_columns", &telemetry_columns);
  m.def(
      "effective_config",
      [](const std::string& scenario, const std::map<std::string, std::string>& overrides) {
        return dump_run_spec(make_spec(scenario, overrides, std::nullopt));
      },
      py::arg("scenario") = "figure8",
      py::arg("overrides") = std::map<std::string, std::string>{});
  m.def(
      "simulate",
      [](const std::string& scenario, const std::map<std::string, std::string>& overrides,
         std::optional<std::uint64_t> seed) {
        const auto spec = make_spec(scenario, overrides, seed);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = simulate(spec.scenario, spec.gains, spec.config);
        }
        py::dict out = metrics_dict(r.metrics);
        out["fault"] = r.fault ? py::object(py::str(*r.fault)) : py::object(py::none());
        out["telemetry"] = telemetry_array(r.telemetry);
        out["columns"] = telemetry_columns();
        out["d_bar_outer"] = r.d_bar_outer;
        out["d_bar_inner"] = r.d_bar_inner;
        return out;
      },
      py::arg("scenario") = "figure8",
      py::arg("overrides") = std::map<std::string, std::string>{},
      py::arg("seed") = py::none(),
      "Runs a built-in scenario with dotted-key overrides. Returns metrics, the fault record "
      "and the telemetry as an (N, columns) array.");
}
