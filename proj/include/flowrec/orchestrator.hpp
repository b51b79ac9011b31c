#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "flowrec/errors.hpp"
#include "flowrec/fdm.hpp"
#include "flowrec/flc.hpp"
#include "flowrec/quadrotor.hpp"
#include "flowrec/streamline.hpp"

namespace flowrec {

struct RecoveryQuad {
  int id = 0;
  ExtendedState state;  // state when the failures are detected
};

// everything needed to plan and verify one recovery episode
struct RecoveryScenario {
  GridSpec grid;
  double boundary_gain = 1.0;  // K, m/s
  std::vector<ObstacleSpec> obstacles;
  std::vector<std::optional<double>> obstacle_psi;  // per-obstacle level override
  std::vector<RecoveryQuad> healthy;
  QuadParams params;
  OuterGains gains;
  double sim_dt = 1e-3;               // s
  double horizon = 60.0;              // s, trace/simulation cap per quad
  double psi_drift_tolerance = 1e-3;  // per-step budget, units of gain * dy
  double v_min = 0.5;                 // m/s, speed bracket
  double v_max = 6.0;
  double v_tolerance = 0.01;          // m/s
  int max_feasibility_sims = 20;
  double v_increment = 0.25;          // m/s, step of the incremental strategy
};

// level start state: at rest with hover thrust and zero heading
inline ExtendedState hover_state_at(const Eigen::Vector3d& position, const QuadParams& qp) {
  ExtendedState s;
  s.position = position;
  s.thrust = qp.mass * qp.gravity;
  return s;
}

struct QuadSimSample {
  double t = 0.0;
  ExtendedState state;
  ReferenceSample ref;
  Wrench wrench;
  RotorSpeeds rotors;
};

struct QuadSimRecord {
  int quad_id = 0;
  double psi_0 = 0.0;
  PlanarPath path;
  ReferenceTrajectory reference;
  std::vector<QuadSimSample> samples;
};

struct LogSummary {
  double max_rotor_speed = 0.0;
  double min_clearance = std::numeric_limits<double>::infinity();  // to obstacle centers
  double max_tracking_error = 0.0;
};

struct SimulationLog {
  double speed = 0.0;
  double sim_dt = 0.0;
  std::vector<QuadSimRecord> quads;
  LogSummary summary;
};

// number of worker threads for per-quad simulation; sequential by default
inline int recovery_thread_count() {
  const char* env = std::getenv("FLOWREC_THREADS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

// Full pipeline at one sliding speed: solve the field, then per healthy quad
// trace its level set, fit the reference and fly it closed loop. Per-quad
// failures surface as RecoveryAborted tagged with the quad id (the failure
// with the lowest list index wins, independent of threading).
inline SimulationLog simulate_recovery(const RecoveryScenario& sc, double speed) {
  const auto classification = discretize(sc.grid, sc.obstacles);
  const auto field =
      solve_stream(classification, assemble_laplacian(classification),
                   boundary_values(classification, sc.boundary_gain, sc.obstacle_psi),
                   sc.boundary_gain);

  SimulationLog log;
  log.speed = speed;
  log.sim_dt = sc.sim_dt;
  log.quads.resize(sc.healthy.size());

  const auto run_one = [&](std::size_t qi) {
    const auto& quad = sc.healthy[qi];
    try {
      QuadSimRecord rec;
      rec.quad_id = quad.id;
      TraceConfig tc;
      tc.horizon = sc.horizon;
      tc.psi_drift_tolerance = sc.psi_drift_tolerance;
      rec.path = trace(field, {quad.state.position.x(), quad.state.position.y()}, speed, tc);
      rec.psi_0 = rec.path.psi_0;
      rec.reference = fit_reference(rec.path, quad.state.position.z());

      ExtendedState state = quad.state;
      const double T = rec.reference.t_end - rec.reference.t_start;
      const long steps = std::lround(std::floor(T / sc.sim_dt + 1e-9));
      rec.samples.reserve(static_cast<std::size_t>(steps) + 1);
      for (long k = 0; k <= steps; ++k) {
        const double t = rec.reference.t_start + sc.sim_dt * static_cast<double>(k);
        const ReferenceSample ref = rec.reference.sample(t);
        const ControlOutput out = control_step(state, ref, sc.gains, sc.params);
        rec.samples.push_back({t, state, ref, out.wrench, out.rotors});
        if (k < steps) state = step_rk4(state, out.input, sc.sim_dt, sc.params);
      }
      log.quads[qi] = std::move(rec);
    } catch (const Error& e) {
      throw RecoveryAborted(quad.id, e.what());
    }
  };

  const int n_threads =
      std::min<int>(recovery_thread_count(), static_cast<int>(sc.healthy.size()));
  if (n_threads <= 1) {
    for (std::size_t qi = 0; qi < sc.healthy.size(); ++qi) run_one(qi);
  } else {
    std::vector<std::exception_ptr> failures(sc.healthy.size());
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int w = 0; w < n_threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t qi = static_cast<std::size_t>(w); qi < sc.healthy.size();
             qi += static_cast<std::size_t>(n_threads)) {
          try {
            run_one(qi);
          } catch (...) {
            failures[qi] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }

  auto& sm = log.summary;
  for (const auto& q : log.quads) {
    for (const auto& s : q.samples) {
      sm.max_rotor_speed = std::max(sm.max_rotor_speed, s.rotors.max());
      sm.max_tracking_error =
          std::max(sm.max_tracking_error, (s.state.position - s.ref.position).norm());
      for (const auto& ob : sc.obstacles) {
        const double d = std::hypot(s.state.position.x() - ob.center.x,
                                    s.state.position.y() - ob.center.y);
        sm.min_clearance = std::min(sm.min_clearance, d);
      }
    }
  }
  return log;
}

struct SafetyVerdict {
  struct Violation {
    int quad_id = 0;
    int rotor = 0;  // 0-based
    double time = 0.0;
  };
  bool safe = true;
  double max_rotor_speed = 0.0;
  std::optional<Violation> first_violation;
};

// every rotor of every quad must spin, and none faster than the bound
inline SafetyVerdict check_safety(const SimulationLog& log, double rotor_speed_max) {
  SafetyVerdict v;
  for (const auto& q : log.quads) {
    for (const auto& s : q.samples) {
      v.max_rotor_speed = std::max(v.max_rotor_speed, s.rotors.max());
      for (int i = 0; i < 4; ++i) {
        const double w = s.rotors.omega[static_cast<std::size_t>(i)];
        if (w > 0.0 && w <= rotor_speed_max) continue;
        const SafetyVerdict::Violation cand{q.quad_id, i, s.t};
        if (!v.first_violation ||
            std::tie(cand.time, cand.quad_id, cand.rotor) <
                std::tie(v.first_violation->time, v.first_violation->quad_id,
                         v.first_violation->rotor)) {
          v.first_violation = cand;
        }
      }
    }
  }
  v.safe = !v.first_violation.has_value();
  return v;
}

// smallest distance from any simulated position to any obstacle center
inline double check_clearance(const SimulationLog& log,
                              const std::vector<ObstacleSpec>& obstacles) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : log.quads) {
    for (const auto& s : q.samples) {
      for (const auto& ob : obstacles) {
        best = std::min(best, std::hypot(s.state.position.x() - ob.center.x,
                                         s.state.position.y() - ob.center.y));
      }
    }
  }
  return best;
}

enum class SpeedSearchStrategy { Bisect, Incremental };

struct SpeedSearchResult {
  double v_star = 0.0;
  SimulationLog log;  // the simulation at v_star
  int feasibility_evals = 0;
};

// Largest common sliding speed that keeps every rotor inside the envelope.
// Any error thrown while simulating a candidate above the lower bound counts
// as infeasible; an unflyable lower bound is an error of its own.
inline SpeedSearchResult max_safe_speed(const RecoveryScenario& sc,
                                        SpeedSearchStrategy strategy = SpeedSearchStrategy::Bisect) {
  if (!(sc.v_min > 0.0) || !(sc.v_max > sc.v_min)) {
    throw Error("speed bracket must satisfy 0 < v_min < v_max");
  }
  if (!(sc.v_tolerance > 0.0)) throw Error("speed tolerance must be positive");
  if (strategy == SpeedSearchStrategy::Incremental && !(sc.v_increment > 0.0)) {
    throw Error("speed increment must be positive");
  }

  int evals = 0;
  const auto try_speed = [&](double v) -> std::optional<SimulationLog> {
    if (evals >= sc.max_feasibility_sims) {
      throw BisectionBudgetExceeded("budget of " + std::to_string(sc.max_feasibility_sims) +
                                    " feasibility simulations exhausted");
    }
    ++evals;
    SimulationLog log = simulate_recovery(sc, v);
    if (check_safety(log, sc.params.rotor_speed_max).safe) return log;
    return std::nullopt;
  };

  std::optional<SimulationLog> best_log;
  try {
    best_log = try_speed(sc.v_min);
  } catch (const BisectionBudgetExceeded&) {
    throw;
  } catch (const Error& e) {
    throw LowerBoundUnsafe(std::string("lower speed bound is not flyable: ") + e.what());
  }
  if (!best_log) {
    throw LowerBoundUnsafe("lower speed bound violates the rotor envelope");
  }
  double lo = sc.v_min;

  const auto probe = [&](double v) -> std::optional<SimulationLog> {
    try {
      return try_speed(v);
    } catch (const BisectionBudgetExceeded&) {
      throw;
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  if (strategy == SpeedSearchStrategy::Incremental) {
    while (lo < sc.v_max - 1e-12) {
      const double v_next = std::min(lo + sc.v_increment, sc.v_max);
      auto log = probe(v_next);
      if (!log) break;
      lo = v_next;
      best_log = std::move(log);
    }
    return {lo, std::move(*best_log), evals};
  }

  auto hi_log = probe(sc.v_max);
  if (hi_log) return {sc.v_max, std::move(*hi_log), evals};
  double hi = sc.v_max;
  while (hi - lo > sc.v_tolerance) {
    const double mid = 0.5 * (lo + hi);
    auto log = probe(mid);
    if (log) {
      lo = mid;
      best_log = std::move(log);
    } else {
      hi = mid;
    }
  }
  return {lo, std::move(*best_log), evals};
}

}  // namespace flowrec
