#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "flowrec/errors.hpp"
#include "flowrec/fdm.hpp"
#include "flowrec/reference.hpp"

namespace flowrec {

struct TraceConfig {
  double step_dt = 0.0;               // s; <= 0 picks min(dx, dy) / (4 * speed)
  double horizon = 60.0;              // s, hard cap on traced time
  double psi_drift_tolerance = 1e-3;  // accumulated per-step budget, in units of gain * dy
};

// streamline sampled at uniform time spacing, traversed at constant speed
struct PlanarPath {
  double speed = 0.0;  // m/s
  double psi_0 = 0.0;  // stream value of the level set, m^2/s
  std::vector<double> times;
  std::vector<PlanarPoint> points;
};

// stream value whose level set the quad will slide along
inline double assign_stream_value(const StreamFieldGrid& field, PlanarPoint start) {
  return sample_psi(field, start);
}

// Integrate dr/dt = speed * dir(r) with the classical fourth-order scheme.
// Leaving the rectangle (including the half-cell stencil margin) ends the
// path cleanly; obstacle penetration and stagnation propagate as errors.
inline PlanarPath trace(const StreamFieldGrid& field, PlanarPoint start, double speed,
                        const TraceConfig& cfg = {}) {
  if (!(speed > 0.0)) {
    throw Error("trace speed must be positive");
  }
  const auto& g = field.grid;
  const double dt = cfg.step_dt > 0.0 ? cfg.step_dt : std::min(g.dx(), g.dy()) / (4.0 * speed);
  const double step_budget = cfg.psi_drift_tolerance * std::abs(field.boundary_gain) * g.dy();

  PlanarPath path;
  path.speed = speed;
  path.psi_0 = sample_psi(field, start);
  path.times.push_back(0.0);
  path.points.push_back(start);

  const long max_steps = std::lround(std::floor(cfg.horizon / dt + 1e-9));
  for (long k = 0; k < max_steps; ++k) {
    const PlanarPoint r = path.points.back();
    PlanarPoint r_new;
    try {
      const auto d1 = sample_velocity_direction(field, r);
      const PlanarPoint p2{r.x + 0.5 * dt * speed * d1.u, r.y + 0.5 * dt * speed * d1.v};
      const auto d2 = sample_velocity_direction(field, p2);
      const PlanarPoint p3{r.x + 0.5 * dt * speed * d2.u, r.y + 0.5 * dt * speed * d2.v};
      const auto d3 = sample_velocity_direction(field, p3);
      const PlanarPoint p4{r.x + dt * speed * d3.u, r.y + dt * speed * d3.v};
      const auto d4 = sample_velocity_direction(field, p4);
      r_new = {r.x + dt * speed * (d1.u + 2.0 * d2.u + 2.0 * d3.u + d4.u) / 6.0,
               r.y + dt * speed * (d1.v + 2.0 * d2.v + 2.0 * d3.v + d4.v) / 6.0};
    } catch (const OutOfDomain&) {
      break;
    }
    double psi_new = 0.0;
    try {
      psi_new = sample_psi(field, r_new);
    } catch (const OutOfDomain&) {
      break;
    }
    const double drift = std::abs(psi_new - path.psi_0);
    if (drift > step_budget * static_cast<double>(k + 1)) {
      throw DriftExceeded("stream value drifted " + std::to_string(drift) + " after " +
                          std::to_string(k + 1) + " steps (budget " +
                          std::to_string(step_budget * static_cast<double>(k + 1)) + ")");
    }
    path.times.push_back(dt * static_cast<double>(k + 1));
    path.points.push_back(r_new);
  }
  return path;
}

struct FitOptions {
  double segment_duration = 2.0;  // s, target knot spacing
  double max_deviation = 0.05;    // m, fit acceptance threshold
};

// Piecewise quintic with jerk-continuous joints, fitted to a planar path by
// constrained least squares. Altitude is held constant.
struct ReferenceTrajectory {
  double t_start = 0.0;
  double t_end = 0.0;
  double altitude = 0.0;       // m
  std::vector<double> knots;   // n_seg + 1 ascending times
  // monomial coefficients in the centered local coordinate
  // u = 2 (t - knots[j]) / (knots[j+1] - knots[j]) - 1
  std::vector<std::array<double, 6>> coeff_x, coeff_y;

  int segment_of(double t) const {
    const auto it = std::upper_bound(knots.begin(), knots.end(), t);
    const long j = (it - knots.begin()) - 1;
    return static_cast<int>(std::clamp<long>(j, 0, static_cast<long>(coeff_x.size()) - 1));
  }

  // time derivative of order 0..3 of the planar position
  Eigen::Vector2d eval_xy(double t, int order) const {
    const int j = segment_of(t);
    const double len = knots[static_cast<std::size_t>(j) + 1] - knots[static_cast<std::size_t>(j)];
    const double u = 2.0 * (t - knots[static_cast<std::size_t>(j)]) / len - 1.0;
    const double scale = std::pow(2.0 / len, order);
    double vx = 0.0, vy = 0.0;
    double u_pow = 1.0;
    for (int k = order; k < 6; ++k) {
      double fact = 1.0;
      for (int m = 0; m < order; ++m) fact *= static_cast<double>(k - m);
      vx += fact * coeff_x[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] * u_pow;
      vy += fact * coeff_y[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] * u_pow;
      u_pow *= u;
    }
    return {scale * vx, scale * vy};
  }

  // clamped to the validity window; z is constant
  ReferenceSample sample(double t) const {
    const double tc = std::clamp(t, t_start, t_end);
    ReferenceSample s;
    const auto p = eval_xy(tc, 0);
    const auto v = eval_xy(tc, 1);
    const auto a = eval_xy(tc, 2);
    const auto jrk = eval_xy(tc, 3);
    s.position = {p.x(), p.y(), altitude};
    s.velocity = {v.x(), v.y(), 0.0};
    s.acceleration = {a.x(), a.y(), 0.0};
    s.jerk = {jrk.x(), jrk.y(), 0.0};
    return s;
  }
};

inline ReferenceTrajectory fit_reference(const PlanarPath& path, double altitude,
                                         const FitOptions& opt = {}) {
  const std::size_t n = path.points.size();
  if (n < 2 || path.times.size() != n) {
    throw Error("path needs at least two samples to fit");
  }
  const double t0 = path.times.front();
  const double t1 = path.times.back();
  if (!(t1 > t0)) {
    throw Error("path duration must be positive");
  }

  const int n_seg =
      std::max(1, static_cast<int>(std::llround((t1 - t0) / opt.segment_duration)));
  const int n_coef = 6 * n_seg;

  ReferenceTrajectory traj;
  traj.t_start = t0;
  traj.t_end = t1;
  traj.altitude = altitude;
  traj.knots.resize(static_cast<std::size_t>(n_seg) + 1);
  for (int j = 0; j <= n_seg; ++j) {
    traj.knots[static_cast<std::size_t>(j)] = t0 + (t1 - t0) * j / n_seg;
  }
  traj.coeff_x.assign(static_cast<std::size_t>(n_seg), {});
  traj.coeff_y.assign(static_cast<std::size_t>(n_seg), {});

  // least-squares system, one row per sample
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), n_coef);
  Eigen::VectorXd bx(static_cast<Eigen::Index>(n)), by(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = path.times[i];
    const int j = traj.segment_of(t);
    const double len = traj.knots[static_cast<std::size_t>(j) + 1] - traj.knots[static_cast<std::size_t>(j)];
    const double u = 2.0 * (t - traj.knots[static_cast<std::size_t>(j)]) / len - 1.0;
    double u_pow = 1.0;
    for (int k = 0; k < 6; ++k) {
      A(static_cast<Eigen::Index>(i), 6 * j + k) = u_pow;
      u_pow *= u;
    }
    bx[static_cast<Eigen::Index>(i)] = path.points[i].x;
    by[static_cast<Eigen::Index>(i)] = path.points[i].y;
  }

  // joint constraints: derivatives 0..3 continuous across every interior knot
  Eigen::MatrixXd N;
  if (n_seg == 1) {
    N = Eigen::MatrixXd::Identity(n_coef, n_coef);
  } else {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(4 * (n_seg - 1), n_coef);
    int row = 0;
    for (int j = 0; j + 1 < n_seg; ++j) {
      const double len_l = traj.knots[static_cast<std::size_t>(j) + 1] - traj.knots[static_cast<std::size_t>(j)];
      const double len_r = traj.knots[static_cast<std::size_t>(j) + 2] - traj.knots[static_cast<std::size_t>(j) + 1];
      for (int m = 0; m <= 3; ++m) {
        const double sl = std::pow(2.0 / len_l, m);
        const double sr = std::pow(2.0 / len_r, m);
        for (int k = m; k < 6; ++k) {
          double fact = 1.0;
          for (int q = 0; q < m; ++q) fact *= static_cast<double>(k - q);
          // left segment at u = +1, right segment at u = -1
          C(row, 6 * j + k) += sl * fact;
          C(row, 6 * (j + 1) + k) -= sr * fact * (((k - m) % 2 == 0) ? 1.0 : -1.0);
        }
        ++row;
      }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
    const Eigen::Index rank = svd.rank();
    N = svd.matrixV().rightCols(n_coef - rank);
  }

  const Eigen::MatrixXd AN = A * N;
  const auto qr = AN.colPivHouseholderQr();
  const Eigen::VectorXd cx = N * qr.solve(bx);
  const Eigen::VectorXd cy = N * qr.solve(by);
  for (int j = 0; j < n_seg; ++j) {
    for (int k = 0; k < 6; ++k) {
      traj.coeff_x[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = cx[6 * j + k];
      traj.coeff_y[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = cy[6 * j + k];
    }
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = traj.eval_xy(path.times[i], 0);
    worst = std::max(worst, std::hypot(p.x() - path.points[i].x, p.y() - path.points[i].y));
  }
  if (worst > opt.max_deviation) {
    throw FitToleranceExceeded("fit deviates " + std::to_string(worst) + " m from the path (limit " +
                               std::to_string(opt.max_deviation) + " m)");
  }
  return traj;
}

}  // namespace flowrec
