#pragma once

#include <complex>
#include <vector>

#include "flowrec/errors.hpp"

namespace flowrec {

struct PlanarPoint {
  double x = 0.0;  // m
  double y = 0.0;  // m
};

// circular cross-section of a cylindrical unsafe zone
struct ObstacleSpec {
  PlanarPoint center;
  double radius = 0.0;  // m, > 0
};

// Superposition of ideal cylinder flows, one term per obstacle:
//   f(z) = u_inf * sum_h (z - z_h + a_h^2 / (z - z_h))
// Each term alone has zero stream value on its own circle |z - z_h| = a_h.
// With several obstacles the circles are only approximate level sets; the
// discrete solve is what enforces them exactly.
struct AnalyticFlow {
  double freestream = 1.0;  // u_inf, m/s, > 0
  std::vector<ObstacleSpec> obstacles;
};

inline constexpr double kPoleEpsilon = 1e-9;  // m, closest admissible approach to a center

struct PotentialSample {
  double phi = 0.0;  // velocity potential, m^2/s
  double psi = 0.0;  // stream function, m^2/s
};

struct FlowVelocity {
  double u = 0.0;  // m/s
  double v = 0.0;  // m/s
};

namespace detail {

inline std::complex<double> to_complex(PlanarPoint p) { return {p.x, p.y}; }

inline void check_poles(const AnalyticFlow& flow, PlanarPoint p) {
  for (const auto& ob : flow.obstacles) {
    const double dx = p.x - ob.center.x;
    const double dy = p.y - ob.center.y;
    if (dx * dx + dy * dy < kPoleEpsilon * kPoleEpsilon) {
      throw PoleSingularity("evaluation point coincides with an obstacle center");
    }
  }
}

}  // namespace detail

// phi = Re f, psi = Im f
inline PotentialSample eval_potential(const AnalyticFlow& flow, PlanarPoint p) {
  detail::check_poles(flow, p);
  const std::complex<double> z = detail::to_complex(p);
  std::complex<double> f{0.0, 0.0};
  for (const auto& ob : flow.obstacles) {
    const std::complex<double> w = z - detail::to_complex(ob.center);
    f += w + (ob.radius * ob.radius) / w;
  }
  f *= flow.freestream;
  return {f.real(), f.imag()};
}

// (u, v) from the conjugate of the complex velocity:
//   f'(z) = u_inf * sum_h (1 - a_h^2 / (z - z_h)^2),  u = Re f', v = -Im f'
inline FlowVelocity eval_velocity(const AnalyticFlow& flow, PlanarPoint p) {
  detail::check_poles(flow, p);
  const std::complex<double> z = detail::to_complex(p);
  std::complex<double> df{0.0, 0.0};
  for (const auto& ob : flow.obstacles) {
    const std::complex<double> w = z - detail::to_complex(ob.center);
    df += 1.0 - (ob.radius * ob.radius) / (w * w);
  }
  df *= flow.freestream;
  return {df.real(), -df.imag()};
}

}  // namespace flowrec
