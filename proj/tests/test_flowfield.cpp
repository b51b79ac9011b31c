#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "flowrec/flowfield.hpp"

using namespace flowrec;
using Catch::Approx;

namespace {

AnalyticFlow unit_cylinder() {
  AnalyticFlow flow;
  flow.freestream = 1.0;
  flow.obstacles = {{{0.0, 0.0}, 1.0}};
  return flow;
}

AnalyticFlow two_cylinders() {
  AnalyticFlow flow;
  flow.freestream = 2.0;
  flow.obstacles = {{{-3.0, 0.0}, 1.2}, {{2.0, 1.0}, 0.8}};
  return flow;
}

}  // namespace

TEST_CASE("stream value vanishes on a single cylinder surface") {
  const auto flow = unit_cylinder();
  for (int k = 0; k < 64; ++k) {
    const double th = 2.0 * M_PI * k / 64.0;
    const auto s = eval_potential(flow, {std::cos(th), std::sin(th)});
    CHECK(std::abs(s.psi) < 1e-12);
  }
}

TEST_CASE("single cylinder spot values") {
  const auto flow = unit_cylinder();

  // psi(0, 2) = 2 * (1 - 1/4)
  CHECK(eval_potential(flow, {0.0, 2.0}).psi == Approx(1.5).margin(1e-15));

  // f'(2i) = 1 - 1/(2i)^2 = 1.25, so (u, v) = (1.25, 0)
  const auto vel = eval_velocity(flow, {0.0, 2.0});
  CHECK(vel.u == Approx(1.25).margin(1e-15));
  CHECK(vel.v == Approx(0.0).margin(1e-15));
}

TEST_CASE("velocity stagnates at the fore and aft points") {
  const auto flow = unit_cylinder();
  for (double sx : {-1.0, 1.0}) {
    const auto vel = eval_velocity(flow, {sx, 0.0});
    CHECK(std::abs(vel.u) < 1e-15);
    CHECK(std::abs(vel.v) < 1e-15);
  }
}

TEST_CASE("multi-obstacle potential matches real-arithmetic superposition") {
  const auto flow = two_cylinders();
  std::mt19937_64 rng(11u);
  std::uniform_real_distribution<double> coord(-8.0, 8.0);
  int checked = 0;
  while (checked < 200) {
    const PlanarPoint p{coord(rng), coord(rng)};
    bool near_pole = false;
    for (const auto& ob : flow.obstacles) {
      const double d = std::hypot(p.x - ob.center.x, p.y - ob.center.y);
      if (d < 0.2) near_pole = true;
    }
    if (near_pole) continue;
    ++checked;

    // per-term identities: Re(w + a^2/w) = x'(1 + a^2/|w|^2),
    //                      Im(w + a^2/w) = y'(1 - a^2/|w|^2)
    double phi = 0.0, psi = 0.0;
    for (const auto& ob : flow.obstacles) {
      const double xr = p.x - ob.center.x;
      const double yr = p.y - ob.center.y;
      const double r2 = xr * xr + yr * yr;
      const double a2 = ob.radius * ob.radius;
      phi += xr * (1.0 + a2 / r2);
      psi += yr * (1.0 - a2 / r2);
    }
    phi *= flow.freestream;
    psi *= flow.freestream;

    const auto s = eval_potential(flow, p);
    CHECK(s.phi == Approx(phi).margin(1e-11));
    CHECK(s.psi == Approx(psi).margin(1e-11));
  }
}

TEST_CASE("velocity is the gradient of phi and the rotated gradient of psi") {
  const auto flow = two_cylinders();
  std::mt19937_64 rng(12u);
  std::uniform_real_distribution<double> coord(-8.0, 8.0);
  const double h = 1e-4;
  int checked = 0;
  while (checked < 100) {
    const PlanarPoint p{coord(rng), coord(rng)};
    bool far_enough = true;
    for (const auto& ob : flow.obstacles) {
      const double d = std::hypot(p.x - ob.center.x, p.y - ob.center.y);
      if (d < 2.0 * ob.radius) far_enough = false;
    }
    if (!far_enough) continue;
    ++checked;

    const auto vel = eval_velocity(flow, p);
    const auto xp = eval_potential(flow, {p.x + h, p.y});
    const auto xm = eval_potential(flow, {p.x - h, p.y});
    const auto yp = eval_potential(flow, {p.x, p.y + h});
    const auto ym = eval_potential(flow, {p.x, p.y - h});

    const double u_phi = (xp.phi - xm.phi) / (2.0 * h);
    const double v_phi = (yp.phi - ym.phi) / (2.0 * h);
    const double u_psi = (yp.psi - ym.psi) / (2.0 * h);
    const double v_psi = -(xp.psi - xm.psi) / (2.0 * h);

    CHECK(vel.u == Approx(u_phi).margin(1e-6));
    CHECK(vel.v == Approx(v_phi).margin(1e-6));
    CHECK(vel.u == Approx(u_psi).margin(1e-6));
    CHECK(vel.v == Approx(v_psi).margin(1e-6));
  }
}

TEST_CASE("stream function is harmonic away from the poles") {
  const auto flow = two_cylinders();
  std::mt19937_64 rng(13u);
  std::uniform_real_distribution<double> coord(-8.0, 8.0);
  const double h = 1e-3;
  int checked = 0;
  while (checked < 100) {
    const PlanarPoint p{coord(rng), coord(rng)};
    bool far_enough = true;
    for (const auto& ob : flow.obstacles) {
      const double d = std::hypot(p.x - ob.center.x, p.y - ob.center.y);
      if (d < 1.5 * ob.radius) far_enough = false;
    }
    if (!far_enough) continue;
    ++checked;

    const double c = eval_potential(flow, p).psi;
    const double lap = (eval_potential(flow, {p.x + h, p.y}).psi +
                        eval_potential(flow, {p.x - h, p.y}).psi +
                        eval_potential(flow, {p.x, p.y + h}).psi +
                        eval_potential(flow, {p.x, p.y - h}).psi - 4.0 * c) /
                       (h * h);
    CHECK(std::abs(lap) < 1e-4 * std::abs(flow.freestream));
  }
}

TEST_CASE("far-field speed approaches obstacle count times freestream") {
  const auto flow = two_cylinders();
  const double expected = flow.obstacles.size() * flow.freestream;
  for (double th : {0.1, 1.3, 2.9, 4.2, 5.5}) {
    const PlanarPoint p{100.0 * std::cos(th), 100.0 * std::sin(th)};
    const auto vel = eval_velocity(flow, p);
    const double speed = std::hypot(vel.u, vel.v);
    CHECK(speed == Approx(expected).epsilon(0.01));
  }
}

TEST_CASE("single-cylinder flow is antisymmetric about the x axis") {
  const auto flow = unit_cylinder();
  std::mt19937_64 rng(14u);
  std::uniform_real_distribution<double> coord(-6.0, 6.0);
  int checked = 0;
  while (checked < 100) {
    const PlanarPoint p{coord(rng), coord(rng)};
    if (std::hypot(p.x, p.y) < 1.1) continue;
    ++checked;
    const PlanarPoint q{p.x, -p.y};
    CHECK(eval_potential(flow, p).psi == Approx(-eval_potential(flow, q).psi).margin(1e-12));
    const auto vp = eval_velocity(flow, p);
    const auto vq = eval_velocity(flow, q);
    CHECK(vp.u == Approx(vq.u).margin(1e-12));
    CHECK(vp.v == Approx(-vq.v).margin(1e-12));
  }
}

TEST_CASE("evaluation at an obstacle center is rejected") {
  const auto flow = two_cylinders();
  CHECK_THROWS_AS(eval_potential(flow, {-3.0, 0.0}), PoleSingularity);
  CHECK_THROWS_AS(eval_velocity(flow, {2.0, 1.0}), PoleSingularity);
  CHECK_THROWS_AS(eval_potential(flow, {2.0 + 0.5 * kPoleEpsilon, 1.0}), PoleSingularity);
  // just outside the guard radius is fine
  CHECK_NOTHROW(eval_potential(flow, {2.0 + 2.0 * kPoleEpsilon, 1.0}));
}
