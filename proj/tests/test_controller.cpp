#include "abpid/controller.hpp"
#include "abpid/gainmap.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace abpid;
using abpid::testing::Gen;

namespace {

BacksteppingGains scalar_gains(double k1, double k2, double gamma) {
  return {Vec::Constant(1, k1), Vec::Constant(1, k2), Vec::Constant(1, gamma)};
}

SystemModel double_integrator(int n) {
  return constant_model(Vec::Zero(n), Mat::Zero(n, 1), Mat::Identity(n, n), {Bounds1D{-1, 1}});
}

Vec v1(double x) { return Vec::Constant(1, x); }

/// Random 6-axis model with state-independent terms.
SystemModel random_model(Gen& gen, int n, int l) {
  std::vector<Bounds1D> tb;
  for (int i = 0; i < l; ++i) tb.push_back(Bounds1D::symmetric(gen.uniform(0.5, 2.0)));
  return constant_model(gen.vec(n, -3, 3), gen.mat(n, l, -2, 2), gen.invertible(n), tb);
}

BacksteppingGains random_gains(Gen& gen, int n) {
  return {gen.vec(n, 0.1, 10.0), gen.vec(n, 0.1, 10.0), gen.vec(n, 0.0, 3.0)};
}

}  // namespace

TEST_CASE("control_arc is zero at perfect tracking with cancelled drift") {
  const Vec theta = (Vec(1) << 0.5).finished();
  const Mat phi = (Mat(2, 1) << 2.0, -4.0).finished();
  const Vec f = -phi * theta;
  const auto model = constant_model(f, phi, Mat::Identity(2, 2), {Bounds1D{-1, 1}});
  const auto gains = BacksteppingGains{Vec::Ones(2), Vec::Ones(2), Vec::Ones(2)};
  const auto state = ControllerState::initial(2, 1.0);
  const auto errs = error_signals(Vec::Zero(2), Vec::Zero(2), Vec::Zero(2), Vec::Zero(2),
                                  Vec::Ones(2));
  const auto out = control_arc(model, {}, errs, Vec::Zero(2), theta, state, gains, {}, 0.01);
  CHECK(out.u.norm() == 0.0);
  CHECK(out.state.d_c_hat.norm() == 0.0);
}

TEST_CASE("control_arc on the scalar double integrator") {
  const auto model = double_integrator(1);
  const auto errs = error_signals(v1(1.0), v1(0.0), v1(0.0), v1(0.0), v1(1.0));
  const auto ad = alpha_dot(v1(0.0), errs.e1_dot, v1(1.0));
  const auto out = control_arc(model, {}, errs, ad, v1(0.0), ControllerState::initial(1, 1.0),
                               scalar_gains(1, 1, 0), {}, 0.01);
  CHECK(out.u[0] == doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("control_arc advances d_c_hat by gamma e2 dt") {
  const auto model = double_integrator(1);
  const auto errs = error_signals(v1(0.5), v1(0.2), v1(0.0), v1(0.0), v1(2.0));
  const auto out = control_arc(model, {}, errs, v1(0.0), v1(0.0),
                               ControllerState::initial(1, 10.0), scalar_gains(2, 1, 3), {}, 0.01);
  CHECK(out.state.d_c_hat[0] == doctest::Approx(3.0 * (0.2 + 2.0 * 0.5) * 0.01));
  CHECK(out.state.u_prev[0] == out.u[0]);
}

TEST_CASE("control_arc rejects singular g_hat and NaN inputs") {
  Mat g = Mat::Identity(2, 2);
  g(1, 1) = 0.0;
  auto model = double_integrator(2);
  model.g_hat = [g](const StatePoint&) { return g; };
  const auto errs = error_signals(Vec::Zero(2), Vec::Zero(2), Vec::Zero(2), Vec::Zero(2),
                                  Vec::Ones(2));
  const BacksteppingGains gains{Vec::Ones(2), Vec::Ones(2), Vec::Ones(2)};
  CHECK_THROWS_AS(control_arc(model, {}, errs, Vec::Zero(2), v1(0.0),
                              ControllerState::initial(2, 1.0), gains, {}, 0.01),
                  SingularityError);

  const auto good = double_integrator(2);
  auto bad = errs;
  bad.e1[0] = std::nan("");
  CHECK_THROWS_AS(control_arc(good, {}, bad, Vec::Zero(2), v1(0.0),
                              ControllerState::initial(2, 1.0), gains, {}, 0.01),
                  ContractViolation);
}

TEST_CASE("robust term examples") {
  ErrorSignals errs;
  errs.e2 = Vec::Zero(2);
  RobustTermConfig nl{RobustMode::kNonlinear, 0.5, {}};
  CHECK(robust_term(errs, 3.0, nl).norm() == 0.0);

  errs.e2 = v1(1.0);
  CHECK(robust_term(errs, 2.0, nl)[0] == doctest::Approx(-2.0));

  RobustTermConfig constant{RobustMode::kConstant, 1.0, v1(0.7)};
  CHECK(robust_term(errs, 0.0, constant)[0] == doctest::Approx(-0.7));
  CHECK(robust_term(errs, 0.0, RobustTermConfig{})[0] == 0.0);
}

TEST_CASE("robust term opposes e2 on every axis") {
  Gen gen(31);
  for (int trial = 0; trial < 20000; ++trial) {
    ErrorSignals errs;
    errs.e2 = gen.vec(4, -10, 10);
    const RobustTermConfig nl{RobustMode::kNonlinear, gen.uniform(1e-3, 10), {}};
    const RobustTermConfig cm{RobustMode::kConstant, 1.0, gen.vec(4, 0.0, 10)};
    for (const auto& cfg : {nl, cm}) {
      const Vec ur = robust_term(errs, gen.uniform(0, 10), cfg);
      REQUIRE(errs.e2.dot(ur) <= 0.0);
      for (int i = 0; i < 4; ++i) REQUIRE(ur[i] * errs.e2[i] <= 0.0);
    }
  }
}

TEST_CASE("robust term rejects invalid configuration") {
  ErrorSignals errs;
  errs.e2 = v1(1.0);
  CHECK_THROWS_AS(robust_term(errs, 1.0, {RobustMode::kNonlinear, 0.0, {}}), ConfigurationError);
  CHECK_THROWS_AS(robust_term(errs, 1.0, {RobustMode::kConstant, 1.0, v1(-1.0)}),
                  ConfigurationError);
  CHECK_THROWS_AS(robust_term(errs, -1.0, {}), ContractViolation);
}

TEST_CASE("h bound examples") {
  auto model = constant_model(Vec::Zero(1), Mat::Zero(1, 1), Mat::Identity(1, 1),
                              {Bounds1D{-0.1, 0.1}}, 0.0);
  CHECK(h_bound(model, Mat::Zero(1, 1), Vec::Zero(1)) == 0.0);
  model.delta_bar = 0.1;
  CHECK(h_bound(model, Mat::Ones(1, 1), Vec::Zero(1)) == doctest::Approx(0.3));
}

TEST_CASE("h bound is monotone in every bound") {
  Gen gen(32);
  for (int trial = 0; trial < 2000; ++trial) {
    auto model = random_model(gen, 3, 2);
    model.g_min = model.g_min - gen.mat(3, 3, 0.0, 0.5).cwiseAbs();
    model.delta_bar = gen.uniform(0, 1);
    const Mat phi = gen.mat(3, 2, -2, 2);
    const Vec u = gen.vec(3, -5, 5);
    const double h0 = h_bound(model, phi, u);
    auto wider = model;
    wider.theta_bounds[0].hi += gen.uniform(0, 1);
    wider.g_max(0, 0) += gen.uniform(0, 1);
    wider.delta_bar += gen.uniform(0, 1);
    REQUIRE(h_bound(wider, phi, u) >= h0);
  }
}

TEST_CASE("control_pid example with the baseline lateral gains") {
  const auto model = double_integrator(1);
  const auto gains = scalar_gains(1, 1, 0.4);
  const auto pid = pid_from_backstepping(gains, true);
  CHECK(pid.kP[0] == doctest::Approx(2.4));
  CHECK(pid.kD[0] == doctest::Approx(2.0));
  CHECK(pid.kI[0] == doctest::Approx(0.4));
  const StatePoint p{0.0, v1(1.0), v1(0.0)};
  const Reference ref{v1(0.0), v1(0.0), v1(0.0)};
  const auto out =
      control_pid(model, p, ref, v1(0.0), ControllerState::initial(1, 1.0, pid.kI), pid, gains,
                  true, 0.01);
  CHECK(out.u[0] == doctest::Approx(-2.4).epsilon(1e-15));
  CHECK(out.state.e1_integral[0] == doctest::Approx(0.01));
}

TEST_CASE("control_pid is zero at the fixed point") {
  const Vec theta = (Vec(1) << 0.3).finished();
  const Mat phi = (Mat(2, 1) << 1.0, 2.0).finished();
  const auto model = constant_model(-phi * theta, phi, 2.0 * Mat::Identity(2, 2),
                                    {Bounds1D{-1, 1}});
  const BacksteppingGains gains{Vec::Ones(2), Vec::Ones(2), Vec::Ones(2)};
  const auto pid = pid_from_backstepping(gains, true);
  const StatePoint p{0.0, Vec::Ones(2), Vec::Zero(2)};
  const Reference ref{Vec::Ones(2), Vec::Zero(2), Vec::Zero(2)};
  const auto out = control_pid(model, p, ref, theta, ControllerState::initial(2, 1.0, pid.kI),
                               pid, gains, true, 0.01);
  CHECK(out.u.norm() == 0.0);
}

TEST_CASE("zero-error fixed point is held for one step") {
  // X2' = f + phi theta + g U with theta_hat = theta: one exact ZOH step stays put.
  const int n = 3;
  Gen gen(33);
  const Vec theta = gen.vec(2, -0.5, 0.5);
  const Mat phi = gen.mat(n, 2, -1, 1);
  const Vec f = gen.vec(n, -2, 2);
  const Mat g = gen.invertible(n);
  const auto model = constant_model(f, phi, g, {Bounds1D{-1, 1}, Bounds1D{-1, 1}});
  const auto gains = random_gains(gen, n);
  const Vec x1 = gen.vec(n, -1, 1);
  const auto errs = error_signals(x1, Vec::Zero(n), x1, Vec::Zero(n), gains.k1);
  const auto out = control_arc(model, {}, errs, Vec::Zero(n), theta,
                               ControllerState::initial(n, 1.0), gains, {}, 1e-3);
  const Vec accel = f + phi * theta + g * out.u;
  const double dt = 1e-3;
  const Vec x1_next = x1 + 0.5 * dt * dt * accel;
  const Vec x2_next = dt * accel;
  CHECK((x1_next - x1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(x2_next.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(out.state.d_c_hat.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("control_pid rejects gains that do not match the backstepping set") {
  const auto model = double_integrator(1);
  const auto gains = scalar_gains(1, 1, 0.4);
  auto pid = pid_from_backstepping(gains, true);
  pid.kP[0] += 0.1;
  const StatePoint p{0.0, v1(0.0), v1(0.0)};
  const Reference ref{v1(0.0), v1(0.0), v1(0.0)};
  CHECK_THROWS_AS(control_pid(model, p, ref, v1(0.0), ControllerState::initial(1, 1.0), pid,
                              gains, true, 0.01),
                  ConfigurationError);
  // Unadjusted gains under the adjusted flag are also inconsistent.
  const auto unadjusted = pid_from_backstepping(gains, false);
  CHECK_THROWS_AS(control_pid(model, p, ref, v1(0.0), ControllerState::initial(1, 1.0),
                              unadjusted, gains, true, 0.01),
                  ConfigurationError);
}

TEST_CASE("property: ARC law equals the unadjusted PID law with matched states") {
  Gen gen(34);
  const int n = 6, l = 2;
  for (int trial = 0; trial < 5000; ++trial) {
    const auto model = random_model(gen, n, l);
    const auto gains = random_gains(gen, n);
    const RobustTermConfig robust{RobustMode::kConstant, 1.0, gen.vec(n, 0.0, 2.0)};
    const auto folded = fold_robust_gain(gains, robust);
    const auto pid = pid_from_backstepping(folded, false);

    const StatePoint p{0.0, gen.vec(n, -2, 2), gen.vec(n, -2, 2)};
    const Reference ref{gen.vec(n, -2, 2), gen.vec(n, -2, 2), gen.vec(n, -2, 2)};
    const Vec theta_hat = gen.vec(l, -0.5, 0.5);
    const double d_bar = 100.0;
    auto pid_state = ControllerState::initial(n, d_bar, pid.kI);
    pid_state.e1_integral = gen.vec(n, -1, 1);
    auto arc_state = ControllerState::initial(n, d_bar, pid.kI);
    arc_state.d_c_hat = pid.kI.cwiseProduct(pid_state.e1_integral);

    const auto errs = error_signals(p.x1, p.x2, ref.x1d, ref.x1d_dot, gains.k1);
    const Vec ad = alpha_dot(ref.x1d_ddot, errs.e1_dot, gains.k1);
    const auto arc = control_arc(model, p, errs, ad, theta_hat, arc_state, gains, robust, 0.0);
    const auto pidout = control_pid(model, p, ref, theta_hat, pid_state, pid, folded, false, 0.0);
    REQUIRE((arc.u - pidout.u).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, arc.u.norm()));
  }
}

TEST_CASE("property: adjusted PID matches ARC when d_c_hat absorbs gamma e1") {
  Gen gen(35);
  const int n = 3, l = 1;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto model = random_model(gen, n, l);
    const auto gains = random_gains(gen, n);
    const auto pid = pid_from_backstepping(gains, true);
    const StatePoint p{0.0, gen.vec(n, -2, 2), gen.vec(n, -2, 2)};
    const Reference ref{gen.vec(n, -2, 2), gen.vec(n, -2, 2), gen.vec(n, -2, 2)};
    const Vec theta_hat = gen.vec(l, -0.5, 0.5);
    auto pid_state = ControllerState::initial(n, 1e3, pid.kI);
    pid_state.e1_integral = gen.vec(n, -1, 1);
    const auto errs = error_signals(p.x1, p.x2, ref.x1d, ref.x1d_dot, gains.k1);
    auto arc_state = ControllerState::initial(n, 1e3, pid.kI);
    arc_state.d_c_hat =
        pid.kI.cwiseProduct(pid_state.e1_integral) + gains.gamma.cwiseProduct(errs.e1);
    const auto arc = control_arc(model, p, errs, alpha_dot(ref.x1d_ddot, errs.e1_dot, gains.k1),
                                 theta_hat, arc_state, gains, {}, 0.0);
    const auto pidout = control_pid(model, p, ref, theta_hat, pid_state, pid, gains, true, 0.0);
    REQUIRE((arc.u - pidout.u).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, arc.u.norm()));
  }
}

TEST_CASE("ARC and unadjusted PID loops produce the same closed-loop run") {
  const int n = 2;
  const auto model = double_integrator(n);
  const BacksteppingGains gains{(Vec(2) << 1.0, 3.0).finished(), (Vec(2) << 1.0, 0.5).finished(),
                                (Vec(2) << 0.4, 2.0).finished()};
  LoopOptions arc_opts, pid_opts;
  arc_opts.form = ControlForm::kArc;
  pid_opts.form = ControlForm::kPid;
  pid_opts.adjusted = false;
  IcsLoop arc(gains, arc_opts, 0.5), pid(gains, pid_opts, 0.5);
  Vec xa = (Vec(2) << 1.0, -0.5).finished(), va = Vec::Zero(2);
  Vec xp = xa, vp = va;
  const double dt = 1e-3;
  const Vec bias = (Vec(2) << 0.3, -0.2).finished();  // constant unknown disturbance
  // The slowest closed-loop pole of the first axis sits near -0.26, so run long enough to settle.
  for (int k = 0; k < 30000; ++k) {
    const double t = k * dt;
    const Reference ref{(Vec(2) << std::sin(t), 0.0).finished(),
                        (Vec(2) << std::cos(t), 0.0).finished(),
                        (Vec(2) << -std::sin(t), 0.0).finished()};
    const Vec ua = arc.step(model, {t, xa, va}, ref, v1(0.0), dt);
    const Vec up = pid.step(model, {t, xp, vp}, ref, v1(0.0), dt);
    REQUIRE((ua - up).cwiseAbs().maxCoeff() < 1e-9);
    xa += dt * va + 0.5 * dt * dt * (ua + bias);
    va += dt * (ua + bias);
    xp += dt * vp + 0.5 * dt * dt * (up + bias);
    vp += dt * (up + bias);
  }
  CHECK((arc.state().d_c_hat - pid.state().d_c_hat).cwiseAbs().maxCoeff() < 1e-9);
  // The integral action has learned the constant disturbance.
  CHECK(arc.state().d_c_hat[0] == doctest::Approx(0.3).epsilon(0.05));
  CHECK(arc.state().d_c_hat[1] == doctest::Approx(-0.2).epsilon(0.05));
}

TEST_CASE("property: d_c_hat and the integral never leave their sets") {
  Gen gen(36);
  const int n = 3;
  const auto model = double_integrator(n);
  for (int seq = 0; seq < 20; ++seq) {
    const auto gains = random_gains(gen, n);
    const double d_bar = gen.uniform(0.01, 2.0);
    const auto pid = pid_from_backstepping(gains, true);
    auto arc_state = ControllerState::initial(n, d_bar, pid.kI);
    auto pid_state = arc_state;
    for (int k = 0; k < 2000; ++k) {
      const double dt = gen.uniform(1e-4, 0.05);
      const StatePoint p{0.0, gen.vec(n, -20, 20), gen.vec(n, -20, 20)};
      const Reference ref{gen.vec(n, -1, 1), gen.vec(n, -1, 1), gen.vec(n, -1, 1)};
      const auto errs = error_signals(p.x1, p.x2, ref.x1d, ref.x1d_dot, gains.k1);
      arc_state = control_arc(model, p, errs, Vec::Zero(n), v1(0.0), arc_state, gains, {}, dt)
                      .state;
      pid_state = control_pid(model, p, ref, v1(0.0), pid_state, pid, gains, true, dt).state;
      for (int i = 0; i < n; ++i) {
        REQUIRE(std::abs(arc_state.d_c_hat[i]) <= d_bar);
        REQUIRE(std::abs(pid_state.e1_integral[i]) <= pid_state.integral_bound[i]);
        REQUIRE(std::abs(pid_state.d_c_hat[i]) <= d_bar * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("integral bounds follow d_bar / kI") {
  const auto s = ControllerState::initial(2, 2.0, (Vec(2) << 0.5, 0.0).finished());
  CHECK(s.integral_bound[0] == doctest::Approx(4.0));
  CHECK(std::isinf(s.integral_bound[1]));
  CHECK_THROWS_AS(ControllerState::initial(2, -1.0), ConfigurationError);
}

TEST_CASE("Lyapunov function decreases on the nominal scalar plant") {
  const double k1 = 2.0, k2 = 1.5, gamma = 0.8, dt = 1e-3;
  const auto model = double_integrator(1);
  const auto gains = scalar_gains(k1, k2, gamma);
  auto state = ControllerState::initial(1, 5.0);
  state.d_c_hat[0] = 0.4;  // true d_c is zero
  double x = 0.5, v = -0.3;
  const auto lyapunov = [&](double t, const ControllerState& s) {
    const auto errs = error_signals(v1(x), v1(v), v1(std::sin(t)), v1(std::cos(t)), v1(k1));
    const double dtil = -s.d_c_hat[0];
    return 0.5 * errs.e1[0] * errs.e1[0] + 0.5 * errs.e2[0] * errs.e2[0] +
           0.5 * dtil * dtil / gamma;
  };
  double v_prev = lyapunov(0.0, state);
  const double v0 = v_prev;
  double worst = -1.0;
  for (int k = 0; k < 5000; ++k) {
    const double t = k * dt;
    const auto errs = error_signals(v1(x), v1(v), v1(std::sin(t)), v1(std::cos(t)), v1(k1));
    const auto out = control_arc(model, {}, errs, alpha_dot(v1(-std::sin(t)), errs.e1_dot, v1(k1)),
                                 v1(0.0), state, gains, {}, dt);
    state = out.state;
    const double u = out.u[0];
    x += dt * v + 0.5 * dt * dt * u;
    v += dt * u;
    const double v_next = lyapunov(t + dt, state);
    worst = std::max(worst, v_next - v_prev);
    v_prev = v_next;
  }
  CHECK(worst <= 1e-6);
  CHECK(v_prev < 0.05 * v0);
}

TEST_CASE("e1_dot filter passes through when disabled") {
  auto s = ControllerState::initial(2, 1.0);
  const Vec raw = (Vec(2) << 0.3, -7.0).finished();
  CHECK(filter_e1_dot(raw, s, 0.0, 0.01) == raw);
}

TEST_CASE("e1_dot filter step response settles within 1% after 5 tau") {
  auto s = ControllerState::initial(1, 1.0);
  const double tau = 0.05, dt = 1e-4;
  Vec y;
  for (int k = 0; k < static_cast<int>(5 * tau / dt); ++k) y = filter_e1_dot(v1(1.0), s, tau, dt);
  CHECK(std::abs(y[0] - 1.0) < 0.01);
}

TEST_CASE("e1_dot filter attenuates its corner frequency by 1/sqrt(2)") {
  auto s = ControllerState::initial(1, 1.0);
  const double tau = 0.05, dt = 1e-5;
  const double w = 1.0 / tau;
  double peak = 0.0;
  const double t_end = 20.0 * 2.0 * std::numbers::pi / w;
  for (double t = 0.0; t < t_end; t += dt) {
    const double y = filter_e1_dot(v1(std::sin(w * t)), s, tau, dt)[0];
    if (t > 0.5 * t_end) peak = std::max(peak, std::abs(y));
  }
  CHECK(peak == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.05));
}

TEST_CASE("filter_e1_dot rejects negative time constants") {
  auto s = ControllerState::initial(1, 1.0);
  CHECK_THROWS_AS(filter_e1_dot(v1(1.0), s, -0.1, 0.01), ContractViolation);
}

TEST_CASE("IcsLoop folds k20 into the PID gains") {
  LoopOptions opts;
  opts.robust = {RobustMode::kConstant, 1.0, v1(0.5)};
  IcsLoop loop(scalar_gains(1, 1, 0.4), opts, 1.0);
  CHECK(loop.pid().kP[0] == doctest::Approx(1.0 + 1.0 * 1.5 + 0.4));
  CHECK(loop.pid().kD[0] == doctest::Approx(2.5));
}

TEST_CASE("IcsLoop rejects invalid gains") {
  CHECK_THROWS_AS(IcsLoop(scalar_gains(0, 1, 0.4), {}, 1.0), ConfigurationError);
  CHECK_THROWS_AS(IcsLoop(scalar_gains(1, 1, -0.4), {}, 1.0), ConfigurationError);
}
