#include <doctest.h>

#include "locomimic/vhipm.hpp"

#include <random>

using namespace locomimic;

namespace {

SupportSet square(double side) {
  const double h = side / 2;
  return {{Vec3(h, h, 0), Vec3(h, -h, 0), Vec3(-h, h, 0), Vec3(-h, -h, 0)}};
}

double cop_of(const SupportSet& s, const std::vector<double>& w) {
  return vhipm::compute_cop(s, std::span<const double>(w)).x();
}

}  // namespace

TEST_CASE("compute_cop") {
  const SupportSet one{{Vec3(0.3, -0.2, 0.1)}};
  const std::vector<double> w1{1.0};
  CHECK(vhipm::compute_cop(one, std::span<const double>(w1)) == Vec3(0.3, -0.2, 0.1));
  const SupportSet two{{Vec3(0, 0, 0), Vec3(1, 0, 0)}};
  CHECK(cop_of(two, {0.5, 0.5}) == 0.5);
  const std::vector<double> q(4, 0.25);
  CHECK(vhipm::compute_cop(square(0.4), std::span<const double>(q)).norm() < 1e-15);
  CHECK_THROWS_AS(vhipm::compute_cop(SupportSet{}, std::span<const double>()), FlightPhaseError);
  CHECK_THROWS_AS(cop_of(two, {0.6, 0.5}), InvalidParameter);
  CHECK_THROWS_AS(cop_of(two, {1.1, -0.1}), InvalidParameter);
  CHECK_THROWS_AS(cop_of(two, {1.0}), InvalidParameter);
}

TEST_CASE("CoP stays in the hull (barycentric oracle)") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const SupportSet tri{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}};
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> w{u(rng), u(rng), u(rng)};
    const double s = w[0] + w[1] + w[2];
    for (double& x : w) x /= s;
    const Vec3 c = vhipm::compute_cop(tri, std::span<const double>(w));
    // Barycentric coordinates of c in the unit triangle.
    CHECK(c.x() >= -1e-15);
    CHECK(c.y() >= -1e-15);
    CHECK(c.x() + c.y() <= 1.0 + 1e-15);
  }
}

TEST_CASE("continuous_accel") {
  const SupportSet s{{Vec3::Zero()}};
  const PendulumState up{Vec3(0, 0, 0.32), Vec3::Zero()};
  CHECK(vhipm::continuous_accel(up, ControlInput::uniform(1), s).norm() < 1e-15);
  const Vec3 a2 = vhipm::continuous_accel(up, ControlInput::uniform(1, 2.0), s);
  CHECK(a2.head<2>().norm() < 1e-15);
  CHECK(a2.z() == doctest::Approx(2.0).epsilon(1e-14));
  const PendulumState off{Vec3(0.1, 0, 0.32), Vec3::Zero()};
  CHECK(vhipm::continuous_accel(off, ControlInput::uniform(1), s).x() == doctest::Approx(0.1 * 9.81 / 0.32).epsilon(1e-14));
  CHECK(vhipm::continuous_accel(up, ControlInput::uniform(0, 5.0), SupportSet{}) == GravityVector{}.g);
  const PendulumState low{Vec3(0, 0, 0.04), Vec3::Zero()};
  CHECK_THROWS_AS(vhipm::continuous_accel(low, ControlInput::uniform(1), s), SingularityError);
}

TEST_CASE("discrete_step") {
  const SupportSet s{{Vec3::Zero()}};
  const Vec3 r(0, 0, 0.32);
  CHECK(vhipm::discrete_step(r, r, ControlInput::uniform(1), s, 0.025) == r);
  const Vec3 prev(-0.01, 0, 0.32), curr(0, 0, 0.32);
  const SupportSet under{{Vec3(0, 0, 0)}};
  CHECK((vhipm::discrete_step(prev, curr, ControlInput::uniform(1), under, 0.025) - Vec3(0.01, 0, 0.32)).norm() < 1e-15);
  const Vec3 z(0, 0, 0.4);
  CHECK(vhipm::discrete_step(z, z, ControlInput{}, SupportSet{}, 0.02).z() == doctest::Approx(0.4 - 9.81 * 0.0004).epsilon(1e-14));
  CHECK(std::abs(vhipm::discrete_step(z, z, ControlInput{}, SupportSet{}, 0.02).z() - 0.3961) < 5e-5);
  CHECK_THROWS_AS(vhipm::discrete_step(z, z, ControlInput{}, SupportSet{}, 0.0), InvalidParameter);
}

TEST_CASE("flight second difference equals gravity") {
  Vec3 prev(0, 0, 0.4), curr(0.01, 0.002, 0.41);
  const double dt = 0.025;
  for (int k = 0; k < 10; ++k) {
    const Vec3 next = vhipm::discrete_step(prev, curr, ControlInput{}, SupportSet{}, dt);
    const Vec3 dd = (next - 2 * curr + prev) / (dt * dt);
    CHECK((dd - GravityVector{}.g).norm() < 1e-9);
    prev = curr;
    curr = next;
  }
}

TEST_CASE("second-order convergence to the continuous dynamics") {
  // Oracle: RK4 at a very fine step on r'' = a(r, u(t)).
  const SupportSet s{{Vec3(0.05, 0.02, 0)}};
  auto hdd = [](double t) { return 1.5 * std::sin(3 * t); };
  auto accel = [&](const Vec3& r, double t) {
    return vhipm::continuous_accel(r, ControlInput::uniform(1, hdd(t)), s);
  };
  const Vec3 r0(0.0, 0.0, 0.32), v0(0.1, -0.05, 0.0);
  const double T = 0.2;
  auto reference = [&] {
    const int n = 20000;
    const double h = T / n;
    Vec3 r = r0, v = v0;
    for (int i = 0; i < n; ++i) {
      const double t = i * h;
      const Vec3 k1r = v, k1v = accel(r, t);
      const Vec3 k2r = v + 0.5 * h * k1v, k2v = accel(r + 0.5 * h * k1r, t + 0.5 * h);
      const Vec3 k3r = v + 0.5 * h * k2v, k3v = accel(r + 0.5 * h * k2r, t + 0.5 * h);
      const Vec3 k4r = v + h * k3v, k4v = accel(r + h * k3r, t + h);
      r += h / 6 * (k1r + 2 * k2r + 2 * k3r + k4r);
      v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    }
    return r;
  }();
  auto verlet = [&](int n) {
    const double dt = T / n;
    // Second-order start: r_{-1} from a Taylor expansion.
    Vec3 prev = r0 - v0 * dt + 0.5 * accel(r0, 0.0) * dt * dt, curr = r0;
    for (int k = 0; k < n; ++k) {
      const Vec3 next = vhipm::discrete_step(prev, curr, ControlInput::uniform(1, hdd(k * dt)), s, dt);
      prev = curr;
      curr = next;
    }
    return curr;
  };
  const double e1 = (verlet(40) - reference).norm();
  const double e2 = (verlet(80) - reference).norm();
  const double order = std::log2(e1 / e2);
  CHECK(order > 1.8);
  CHECK(order < 2.2);
}

TEST_CASE("horizontal translation equivariance") {
  const Vec3 d(0.7, -1.3, 0.0);
  const SupportSet s{{Vec3(0.1, 0.1, 0), Vec3(-0.1, -0.05, 0)}};
  SupportSet t = s;
  for (auto& f : t.footholds) f += d;
  ControlInput u;
  u.h_ddot = 0.4;
  u.weights = {0.3, 0.7};
  Vec3 p0(0, 0, 0.32), c0(0.002, 0.001, 0.321);
  Vec3 p1 = p0 + d, c1 = c0 + d;
  for (int k = 0; k < 20; ++k) {
    const Vec3 n0 = vhipm::discrete_step(p0, c0, u, s, 0.025);
    const Vec3 n1 = vhipm::discrete_step(p1, c1, u, t, 0.025);
    CHECK((n1 - d - n0).norm() < 1e-12);
    p0 = c0;
    c0 = n0;
    p1 = c1;
    c1 = n1;
  }
}
