#pragma once

#include <stdexcept>
#include <string>

namespace flowrec {

// Base for everything thrown by this library. Subclasses exist so callers can
// distinguish configuration mistakes from numerical failures without string
// matching.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- flow field evaluation ---

// evaluation point within kPoleEpsilon of an obstacle center
struct PoleSingularity : Error {
  using Error::Error;
};

// --- discretization / solve ---

struct ObstacleTouchesBoundary : Error {
  using Error::Error;
};

// obstacle so small no grid node falls inside it
struct ObstacleUnresolved : Error {
  using Error::Error;
};

struct SolverDiverged : Error {
  using Error::Error;
};

// --- field sampling ---

struct OutOfDomain : Error {
  using Error::Error;
};

struct InsideObstacle : Error {
  using Error::Error;
};

// interpolated velocity magnitude below the stagnation threshold
struct StagnationPoint : Error {
  using Error::Error;
};

// --- streamline tracing / reference fitting ---

// traced point's stream value wandered off the level set by more than budget
struct DriftExceeded : Error {
  using Error::Error;
};

struct FitToleranceExceeded : Error {
  using Error::Error;
};

// --- vehicle / control ---

// |cos(theta)| below threshold; Euler kinematics degenerate
struct GimbalLock : Error {
  using Error::Error;
};

// wrench requires a negative squared rotor speed
struct InfeasibleWrench : Error {
  using Error::Error;
};

// thrust too small to decouple the translational loop
struct ThrustSingular : Error {
  using Error::Error;
};

// stacked decoupling matrix numerically singular
struct SingularDecoupling : Error {
  using Error::Error;
};

// --- speed search ---

struct LowerBoundUnsafe : Error {
  using Error::Error;
};

struct BisectionBudgetExceeded : Error {
  using Error::Error;
};

// --- orchestration / config ---

// wraps any failure during one quad's recovery sim, tagged with the quad id
struct RecoveryAborted : Error {
  int quad_id;
  RecoveryAborted(int id, const std::string& what)
      : Error("quad " + std::to_string(id) + ": " + what), quad_id(id) {}
};

// scenario file malformed: unknown key, wrong type, missing field, bad value
struct SchemaError : Error {
  using Error::Error;
};

}  // namespace flowrec
