#include "abpid/core.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace abpid;
using abpid::testing::Gen;
using abpid::testing::max_abs_diff;

TEST_CASE("proj stops drive at the upper bound") {
  CHECK(proj(1.0, {-1.0, 1.0}, 0.5) == 0.0);
}

TEST_CASE("proj stops drive at the lower bound") {
  CHECK(proj(-1.0, {-1.0, 1.0}, -0.5) == 0.0);
}

TEST_CASE("proj passes interior values through") {
  CHECK(proj(0.2, {-1.0, 1.0}, -0.5) == -0.5);
  CHECK(proj(0.2, {-1.0, 1.0}, 0.5) == 0.5);
}

TEST_CASE("proj lets a saturated estimate move back inside") {
  CHECK(proj(1.0, {-1.0, 1.0}, -0.3) == -0.3);
  CHECK(proj(-1.0, {-1.0, 1.0}, 0.3) == 0.3);
}

TEST_CASE("proj treats values within the saturation tolerance as on the bound") {
  CHECK(proj(1.0 - 0.5e-9, {-1.0, 1.0}, 2.0) == 0.0);
  CHECK(proj(1.0 + 0.5e-9, {-1.0, 1.0}, 2.0) == 0.0);
  CHECK(proj(1.0 - 1e-6, {-1.0, 1.0}, 2.0) == 2.0);
}

TEST_CASE("proj rejects estimates outside the bounds and NaN") {
  CHECK_THROWS_AS(proj(1.1, {-1.0, 1.0}, 0.0), ContractViolation);
  CHECK_THROWS_AS(proj(-1.1, {-1.0, 1.0}, 0.0), ContractViolation);
  CHECK_THROWS_AS(proj(std::nan(""), {-1.0, 1.0}, 0.0), ContractViolation);
  CHECK_THROWS_AS(proj(0.0, {-1.0, 1.0}, std::nan("")), ContractViolation);
}

TEST_CASE("proj_vec is the identity when every axis is interior") {
  const std::vector<Bounds1D> b(3, Bounds1D{-1.0, 1.0});
  const Vec x = Vec::Zero(3);
  const Vec v = (Vec(3) << 0.3, -2.0, 7.0).finished();
  CHECK(proj_vec(x, b, v) == v);
}

TEST_CASE("proj_vec zeroes only the saturated axis") {
  const std::vector<Bounds1D> b(2, Bounds1D{-1.0, 1.0});
  const Vec x = (Vec(2) << 1.0, 0.0).finished();
  const Vec v = (Vec(2) << 0.7, 0.4).finished();
  const Vec out = proj_vec(x, b, v);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.4);
}

TEST_CASE("proj_vec matches a scalar loop on random saturation patterns") {
  Gen gen(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 3;
    std::vector<Bounds1D> b;
    Vec x(n), v = gen.vec(n, -2.0, 2.0);
    for (int i = 0; i < n; ++i) {
      const double lo = gen.uniform(-2.0, 0.0), hi = gen.uniform(0.0, 2.0);
      b.push_back({lo, hi});
      switch (gen.integer(0, 2)) {
        case 0: x[i] = lo; break;
        case 1: x[i] = hi; break;
        default: x[i] = gen.uniform(lo, hi);
      }
    }
    const Vec out = proj_vec(x, b, v);
    for (int i = 0; i < n; ++i) {
      double expected = v[i];
      if (x[i] == b[i].hi && v[i] > 0.0) expected = 0.0;
      if (x[i] == b[i].lo && v[i] < 0.0) expected = 0.0;
      CHECK(out[i] == expected);
    }
  }
}

TEST_CASE("proj_vec rejects mismatched dimensions") {
  const std::vector<Bounds1D> b(2, Bounds1D{-1.0, 1.0});
  CHECK_THROWS_AS(proj_vec(Vec::Zero(3), b, Vec::Zero(3)), ContractViolation);
  CHECK_THROWS_AS(proj_vec(Vec::Zero(2), b, Vec::Zero(3)), ContractViolation);
}

TEST_CASE("projected Euler steps never leave the bounds") {
  Gen gen(12);
  const std::vector<Bounds1D> b = {{-0.5, 0.5}, {0.0, 2.0}, {-3.0, -1.0}};
  Vec x = (Vec(3) << 0.0, 1.0, -2.0).finished();
  for (int k = 0; k < 20000; ++k) {
    const double dt = gen.uniform(0.0, 0.05);
    x = projected_euler_step(x, b, gen.vec(3, -50.0, 50.0), dt);
    for (int i = 0; i < 3; ++i) REQUIRE(b[i].contains(x[i]));
  }
}

TEST_CASE("projected Euler step reduces to forward Euler inside the set") {
  const std::vector<Bounds1D> b(2, Bounds1D{-10.0, 10.0});
  const Vec x = (Vec(2) << 1.0, -1.0).finished();
  const Vec r = (Vec(2) << 2.0, 3.0).finished();
  const Vec next = projected_euler_step(x, b, r, 0.1);
  CHECK(next[0] == doctest::Approx(1.2));
  CHECK(next[1] == doctest::Approx(-0.7));
}

TEST_CASE("error signals vanish under perfect tracking") {
  const Vec x1 = (Vec(2) << 0.3, -1.0).finished();
  const Vec x2 = (Vec(2) << 0.1, 0.2).finished();
  const auto s = error_signals(x1, x2, x1, x2, Vec::Ones(2));
  CHECK(s.e1.norm() == 0.0);
  CHECK(s.e2.norm() == 0.0);
  CHECK(s.e1_dot.norm() == 0.0);
}

TEST_CASE("error signals with a unit position error") {
  const Vec one = Vec::Ones(1), zero = Vec::Zero(1);
  const auto s = error_signals(one, zero, zero, zero, one);
  CHECK(s.e1[0] == 1.0);
  CHECK(s.e2[0] == 1.0);
  CHECK(s.alpha[0] == -1.0);
}

TEST_CASE("e2 equals e1_dot + k1 e1 on random 6-axis inputs") {
  Gen gen(13);
  for (int trial = 0; trial < 10000; ++trial) {
    const Vec k1 = gen.vec(6, 0.01, 40);
    const auto s = error_signals(gen.vec(6, -5, 5), gen.vec(6, -5, 5), gen.vec(6, -5, 5),
                                 gen.vec(6, -5, 5), k1);
    const Vec residual = s.e2 - (s.e1_dot + k1.cwiseProduct(s.e1));
    REQUIRE(residual.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("error signals are linear in the state for fixed references") {
  Gen gen(14);
  for (int trial = 0; trial < 500; ++trial) {
    const Vec r = gen.vec(4, -1, 1), rd = gen.vec(4, -1, 1), k1 = gen.vec(4, 0.1, 5);
    const Vec a1 = gen.vec(4, -1, 1), a2 = gen.vec(4, -1, 1);
    const Vec b1 = gen.vec(4, -1, 1), b2 = gen.vec(4, -1, 1);
    const double s = gen.uniform(-2, 2);
    // Deviations from the reference point are linear in the state.
    const auto at_ref = error_signals(r, rd, r, rd, k1);
    const auto fa = error_signals(Vec(r + a1), Vec(rd + a2), r, rd, k1);
    const auto fb = error_signals(Vec(r + b1), Vec(rd + b2), r, rd, k1);
    const auto fab = error_signals(Vec(r + a1 + s * b1), Vec(rd + a2 + s * b2), r, rd, k1);
    CHECK(at_ref.e1.norm() == 0.0);
    CHECK(max_abs_diff(fab.e1, Vec(fa.e1 + s * fb.e1)) < 1e-12);
    CHECK(max_abs_diff(fab.e2, Vec(fa.e2 + s * fb.e2)) < 1e-12);
    CHECK(max_abs_diff(fab.e1_dot, Vec(fa.e1_dot + s * fb.e1_dot)) < 1e-12);
  }
}

TEST_CASE("error signals reject bad inputs") {
  CHECK_THROWS_AS(error_signals(Vec::Zero(2), Vec::Zero(3), Vec::Zero(2), Vec::Zero(2),
                                Vec::Ones(2)),
                  ContractViolation);
  CHECK_THROWS_AS(error_signals(Vec::Zero(2), Vec::Zero(2), Vec::Zero(2), Vec::Zero(2),
                                Vec::Zero(2)),
                  ContractViolation);
}

TEST_CASE("bounds validation and helpers") {
  CHECK_THROWS_AS(Bounds1D({1.0, -1.0}).validate(), ConfigurationError);
  CHECK_NOTHROW(Bounds1D({-1.0, -1.0}).validate());
  CHECK(Bounds1D::symmetric(2.0).hi == 2.0);
  CHECK(Bounds1D::unbounded().contains(1e300));
  CHECK(Bounds1D({0.0, 1.0}).clamp(3.0) == 1.0);
}

TEST_CASE("system model validation") {
  const Mat g = Mat::Identity(2, 2);
  auto m = constant_model(Vec::Zero(2), Mat::Zero(2, 1), g, {Bounds1D{-1, 1}});
  CHECK(m.n == 2);
  CHECK(m.l == 1);

  SUBCASE("theta bounds must be ordered") {
    m.theta_bounds = {Bounds1D{1, -1}};
    CHECK_THROWS_AS(m.validate(), ConfigurationError);
  }
  SUBCASE("g bounds must be ordered") {
    m.g_min = 2.0 * g;
    CHECK_THROWS_AS(m.validate(), ConfigurationError);
  }
  SUBCASE("delta_bar must be non-negative") {
    m.delta_bar = -1.0;
    CHECK_THROWS_AS(m.validate(), ConfigurationError);
  }
  SUBCASE("theta bound count must equal l") {
    m.theta_bounds.clear();
    CHECK_THROWS_AS(m.validate(), ConfigurationError);
  }
}

TEST_CASE("g_hat is rejected when ill-conditioned") {
  Mat bad = Mat::Identity(2, 2);
  bad(1, 1) = 1e-9;
  auto m = constant_model(Vec::Zero(2), Mat::Zero(2, 1), Mat::Identity(2, 2), {Bounds1D{-1, 1}});
  m.g_hat = [bad](const StatePoint&) { return bad; };
  CHECK_THROWS_AS(m.checked_g_hat({}), SingularityError);

  Mat ok = Mat::Identity(2, 2);
  ok(1, 1) = 1e-7;
  m.g_hat = [ok](const StatePoint&) { return ok; };
  CHECK_NOTHROW(m.checked_g_hat({}));
  CHECK(condition_number(ok) == doctest::Approx(1e7));
  CHECK(std::isinf(condition_number(Mat::Zero(2, 2))));
}

TEST_CASE("non-finite g_hat is a contract violation") {
  auto m = constant_model(Vec::Zero(1), Mat::Zero(1, 1), Mat::Identity(1, 1), {Bounds1D{-1, 1}});
  m.g_hat = [](const StatePoint&) {
    return Mat::Constant(1, 1, std::numeric_limits<double>::quiet_NaN());
  };
  CHECK_THROWS_AS(m.checked_g_hat({}), ContractViolation);
}
