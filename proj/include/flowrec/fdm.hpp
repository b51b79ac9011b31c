#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowrec/errors.hpp"
#include "flowrec/flowfield.hpp"

namespace flowrec {

// Rectangular node grid, nx * ny nodes including the boundary ring.
// Node (ix, iy) maps to flat index iy * nx + ix.
struct GridSpec {
  double x_min = 0.0, x_max = 1.0;  // m
  double y_min = 0.0, y_max = 1.0;  // m
  int nx = 3, ny = 3;               // node counts per axis, >= 3

  double dx() const { return (x_max - x_min) / (nx - 1); }
  double dy() const { return (y_max - y_min) / (ny - 1); }
  int node_count() const { return nx * ny; }
  int index(int ix, int iy) const { return iy * nx + ix; }
  double x_at(int ix) const { return x_min + ix * dx(); }
  double y_at(int iy) const { return y_min + iy * dy(); }
  bool contains(PlanarPoint p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
};

enum class NodeKind : std::uint8_t {
  Boundary,  // on the rectangle edge, value prescribed
  Failed,    // inside a closed obstacle disk, value prescribed
  Free,      // interior unknown
};

struct NodeClassification {
  GridSpec grid;
  std::vector<ObstacleSpec> obstacles;
  std::vector<NodeKind> kind;    // size nx * ny
  std::vector<int> obstacle_of;  // containing obstacle index, -1 for non-failed nodes
  int boundary_count = 0;
  int failed_count = 0;
  int free_count = 0;
};

inline NodeClassification discretize(const GridSpec& grid,
                                     const std::vector<ObstacleSpec>& obstacles) {
  if (!(grid.x_min < grid.x_max) || !(grid.y_min < grid.y_max)) {
    throw Error("grid extents are empty or inverted");
  }
  if (grid.nx < 3 || grid.ny < 3) {
    throw Error("grid needs at least 3 nodes per axis");
  }
  for (std::size_t h = 0; h < obstacles.size(); ++h) {
    const auto& ob = obstacles[h];
    if (!(ob.radius > 0.0)) {
      throw Error("obstacle " + std::to_string(h) + " has non-positive radius");
    }
    if (ob.center.x - ob.radius <= grid.x_min || ob.center.x + ob.radius >= grid.x_max ||
        ob.center.y - ob.radius <= grid.y_min || ob.center.y + ob.radius >= grid.y_max) {
      throw ObstacleTouchesBoundary("obstacle " + std::to_string(h) +
                                    " touches the domain boundary");
    }
  }

  NodeClassification out;
  out.grid = grid;
  out.obstacles = obstacles;
  out.kind.assign(static_cast<std::size_t>(grid.node_count()), NodeKind::Free);
  out.obstacle_of.assign(static_cast<std::size_t>(grid.node_count()), -1);
  std::vector<int> nodes_inside(obstacles.size(), 0);

  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const std::size_t i = static_cast<std::size_t>(grid.index(ix, iy));
      if (ix == 0 || ix == grid.nx - 1 || iy == 0 || iy == grid.ny - 1) {
        out.kind[i] = NodeKind::Boundary;
        ++out.boundary_count;
        continue;
      }
      const double x = grid.x_at(ix);
      const double y = grid.y_at(iy);
      int owner = -1;
      for (std::size_t h = 0; h < obstacles.size(); ++h) {
        const double ddx = x - obstacles[h].center.x;
        const double ddy = y - obstacles[h].center.y;
        // closed disk: nodes exactly on the circle count as failed
        if (ddx * ddx + ddy * ddy <= obstacles[h].radius * obstacles[h].radius) {
          owner = static_cast<int>(h);
          break;
        }
      }
      if (owner >= 0) {
        out.kind[i] = NodeKind::Failed;
        out.obstacle_of[i] = owner;
        ++nodes_inside[static_cast<std::size_t>(owner)];
        ++out.failed_count;
      } else {
        ++out.free_count;
      }
    }
  }

  for (std::size_t h = 0; h < obstacles.size(); ++h) {
    if (nodes_inside[h] == 0) {
      throw ObstacleUnresolved("obstacle " + std::to_string(h) +
                               " contains no grid node; refine the grid or grow the radius");
    }
  }
  return out;
}

// Graph Laplacian over the 5-point stencil. Free rows carry (4, -1, -1, -1, -1);
// rows of prescribed nodes are identically zero, so the zero eigenvalue has
// multiplicity boundary_count + failed_count and the free-free block is SPD.
inline Eigen::SparseMatrix<double> assemble_laplacian(const NodeClassification& c) {
  const auto& g = c.grid;
  const int m = g.node_count();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(5) * static_cast<std::size_t>(c.free_count));
  for (int iy = 1; iy < g.ny - 1; ++iy) {
    for (int ix = 1; ix < g.nx - 1; ++ix) {
      const int i = g.index(ix, iy);
      if (c.kind[static_cast<std::size_t>(i)] != NodeKind::Free) continue;
      trips.emplace_back(i, i, 4.0);
      trips.emplace_back(i, g.index(ix + 1, iy), -1.0);
      trips.emplace_back(i, g.index(ix - 1, iy), -1.0);
      trips.emplace_back(i, g.index(ix, iy + 1), -1.0);
      trips.emplace_back(i, g.index(ix, iy - 1), -1.0);
    }
  }
  Eigen::SparseMatrix<double> L(m, m);
  L.setFromTriplets(trips.begin(), trips.end());
  return L;
}

// Prescribed values: gain * y on the whole rectangle edge, a constant on each
// failed region (0 unless overridden per obstacle).
inline std::unordered_map<int, double> boundary_values(
    const NodeClassification& c, double gain,
    const std::vector<std::optional<double>>& obstacle_psi = {}) {
  if (!obstacle_psi.empty() && obstacle_psi.size() != c.obstacles.size()) {
    throw Error("obstacle_psi must match the obstacle count");
  }
  std::unordered_map<int, double> bc;
  bc.reserve(static_cast<std::size_t>(c.boundary_count + c.failed_count));
  const auto& g = c.grid;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const int i = g.index(ix, iy);
      const NodeKind k = c.kind[static_cast<std::size_t>(i)];
      if (k == NodeKind::Boundary) {
        bc.emplace(i, gain * g.y_at(iy));
      } else if (k == NodeKind::Failed) {
        double value = 0.0;
        const int h = c.obstacle_of[static_cast<std::size_t>(i)];
        if (!obstacle_psi.empty() && h >= 0 && obstacle_psi[static_cast<std::size_t>(h)]) {
          value = *obstacle_psi[static_cast<std::size_t>(h)];
        }
        bc.emplace(i, value);
      }
    }
  }
  return bc;
}

struct SolveOptions {
  int direct_node_limit = 40000;  // sparse direct factorization up to this many grid nodes
  double cg_tolerance = 1e-10;
  int cg_max_iterations = 0;  // 0 keeps Eigen's default
};

struct StreamFieldGrid {
  GridSpec grid;
  NodeClassification classification;
  std::vector<double> psi;     // nodal stream values, index = iy * nx + ix, m^2/s
  double boundary_gain = 0.0;  // gain K used for the edge values, m/s

  double psi_at(int ix, int iy) const {
    return psi[static_cast<std::size_t>(grid.index(ix, iy))];
  }
};

// Eliminate prescribed nodes and solve the free-free system
//   L_cc psi_c = -L_cf psi_fixed.
inline StreamFieldGrid solve_stream(const NodeClassification& c,
                                    const Eigen::SparseMatrix<double>& L,
                                    const std::unordered_map<int, double>& bc, double gain,
                                    const SolveOptions& opt = {}) {
  const int m = c.grid.node_count();
  if (L.rows() != m || L.cols() != m) {
    throw Error("laplacian dimension does not match the grid");
  }

  std::vector<int> free_index(static_cast<std::size_t>(m), -1);
  int n_free = 0;
  for (int i = 0; i < m; ++i) {
    if (c.kind[static_cast<std::size_t>(i)] == NodeKind::Free) free_index[static_cast<std::size_t>(i)] = n_free++;
  }
  auto fixed_value = [&](int i) {
    const auto it = bc.find(i);
    if (it == bc.end()) {
      throw Error("no prescribed value for fixed node " + std::to_string(i));
    }
    return it->second;
  };

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_free);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(L.nonZeros()));
  for (int col = 0; col < L.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(L, col); it; ++it) {
      const int row = static_cast<int>(it.row());
      const int ri = free_index[static_cast<std::size_t>(row)];
      if (ri < 0) continue;  // prescribed rows are identically zero
      const int ci = free_index[static_cast<std::size_t>(col)];
      if (ci >= 0) {
        trips.emplace_back(ri, ci, it.value());
      } else {
        rhs[ri] -= it.value() * fixed_value(col);
      }
    }
  }
  Eigen::SparseMatrix<double> Lcc(n_free, n_free);
  Lcc.setFromTriplets(trips.begin(), trips.end());

  Eigen::VectorXd sol(n_free);
  if (n_free == 0) {
    // nothing to solve; field is fully prescribed
  } else if (m <= opt.direct_node_limit) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Lcc);
    if (ldlt.info() != Eigen::Success) throw SolverDiverged("sparse factorization failed");
    sol = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success) throw SolverDiverged("sparse back-substitution failed");
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(opt.cg_tolerance);
    if (opt.cg_max_iterations > 0) cg.setMaxIterations(opt.cg_max_iterations);
    cg.compute(Lcc);
    sol = cg.solve(rhs);
    if (cg.info() != Eigen::Success) {
      throw SolverDiverged("conjugate gradient stalled after " +
                           std::to_string(cg.iterations()) + " iterations (residual " +
                           std::to_string(cg.error()) + ")");
    }
  }

  StreamFieldGrid field;
  field.grid = c.grid;
  field.classification = c;
  field.boundary_gain = gain;
  field.psi.assign(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    const int fi = free_index[static_cast<std::size_t>(i)];
    field.psi[static_cast<std::size_t>(i)] = fi >= 0 ? sol[fi] : fixed_value(i);
  }
  return field;
}

namespace detail {

// bilinear interpolation on the nodal grid; no validity checks
inline double bilinear(const StreamFieldGrid& f, PlanarPoint p) {
  const auto& g = f.grid;
  int ix = static_cast<int>(std::floor((p.x - g.x_min) / g.dx()));
  int iy = static_cast<int>(std::floor((p.y - g.y_min) / g.dy()));
  ix = std::clamp(ix, 0, g.nx - 2);
  iy = std::clamp(iy, 0, g.ny - 2);
  const double tx = (p.x - g.x_at(ix)) / g.dx();
  const double ty = (p.y - g.y_at(iy)) / g.dy();
  return (1.0 - tx) * (1.0 - ty) * f.psi_at(ix, iy) + tx * (1.0 - ty) * f.psi_at(ix + 1, iy) +
         (1.0 - tx) * ty * f.psi_at(ix, iy + 1) + tx * ty * f.psi_at(ix + 1, iy + 1);
}

inline void check_sample_point(const StreamFieldGrid& f, PlanarPoint p) {
  if (!f.grid.contains(p)) {
    throw OutOfDomain("sample point outside the grid rectangle");
  }
  for (const auto& ob : f.classification.obstacles) {
    const double ddx = p.x - ob.center.x;
    const double ddy = p.y - ob.center.y;
    if (ddx * ddx + ddy * ddy <= ob.radius * ob.radius) {
      throw InsideObstacle("sample point inside an obstacle disk");
    }
  }
}

}  // namespace detail

inline double sample_psi(const StreamFieldGrid& f, PlanarPoint p) {
  detail::check_sample_point(f, p);
  return detail::bilinear(f, p);
}

// Unit flow direction (psi_y, -psi_x) from central differences of the
// interpolant, step h = min(dx, dy)/2. The stencil reads raw interpolant
// values so it may dip into the smeared obstacle region, but the whole
// stencil must stay inside the rectangle. Pass stag_epsilon < 0 to use the
// default threshold 1e-6 * |gain| * dy.
inline FlowVelocity sample_velocity_direction(const StreamFieldGrid& f, PlanarPoint p,
                                              double stag_epsilon = -1.0) {
  detail::check_sample_point(f, p);
  const auto& g = f.grid;
  const double h = 0.5 * std::min(g.dx(), g.dy());
  if (p.x - h < g.x_min || p.x + h > g.x_max || p.y - h < g.y_min || p.y + h > g.y_max) {
    throw OutOfDomain("difference stencil leaves the grid rectangle");
  }
  const double dpsi_dx =
      (detail::bilinear(f, {p.x + h, p.y}) - detail::bilinear(f, {p.x - h, p.y})) / (2.0 * h);
  const double dpsi_dy =
      (detail::bilinear(f, {p.x, p.y + h}) - detail::bilinear(f, {p.x, p.y - h})) / (2.0 * h);
  const double gx = dpsi_dy;
  const double gy = -dpsi_dx;
  const double norm = std::hypot(gx, gy);
  const double eps = stag_epsilon >= 0.0 ? stag_epsilon : 1e-6 * std::abs(f.boundary_gain) * g.dy();
  if (!(norm > eps)) {
    throw StagnationPoint("flow direction vanishes at the sample point");
  }
  return {gx / norm, gy / norm};
}

}  // namespace flowrec
