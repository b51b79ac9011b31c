#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowrec/fdm.hpp"
#include "flowrec/orchestrator.hpp"

namespace flowrec {

namespace detail {

// %.17g round-trips a double exactly through text
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// stream-field grid file: header (bounds, node counts, boundary gain), then
// one line of nodal values per grid row, bottom row first

inline constexpr const char* kFieldFileMagic = "flowrec-field 1";

inline void write_field_file(const std::string& path, const StreamFieldGrid& field) {
  auto out = detail::open_out(path);
  const auto& g = field.grid;
  out << kFieldFileMagic << '\n';
  out << detail::fmt(g.x_min) << ' ' << detail::fmt(g.x_max) << ' '
      << detail::fmt(g.y_min) << ' ' << detail::fmt(g.y_max) << '\n';
  out << g.nx << ' ' << g.ny << '\n';
  out << detail::fmt(field.boundary_gain) << '\n';
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      if (ix) out << ' ';
      out << detail::fmt(field.psi_at(ix, iy));
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

// the nodal data alone; obstacle geometry is not stored in the file
struct FieldFileData {
  GridSpec grid;
  double boundary_gain = 0.0;
  std::vector<double> psi;  // node-major, same layout as StreamFieldGrid
};

inline FieldFileData read_field_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != kFieldFileMagic) throw Error(path + ": not a field file");
  FieldFileData f;
  in >> f.grid.x_min >> f.grid.x_max >> f.grid.y_min >> f.grid.y_max;
  in >> f.grid.nx >> f.grid.ny;
  in >> f.boundary_gain;
  if (!in || f.grid.nx < 3 || f.grid.ny < 3) throw Error(path + ": bad header");
  f.psi.resize(f.grid.node_count());
  for (int iy = 0; iy < f.grid.ny; ++iy) {
    for (int ix = 0; ix < f.grid.nx; ++ix) {
      in >> f.psi[static_cast<std::size_t>(f.grid.index(ix, iy))];
    }
  }
  if (!in) throw Error(path + ": truncated node data");
  return f;
}

// ---------------------------------------------------------------------------
// contour extraction (marching squares with shared-edge crossings)

struct ContourPolyline {
  double level = 0.0;
  std::vector<PlanarPoint> points;
};

namespace detail {

// crossings are computed once per grid edge, so the two cells sharing an edge
// agree bit-for-bit and chaining can key on edge ids alone
inline std::vector<ContourPolyline> contour_at_level(const StreamFieldGrid& field,
                                                     double level) {
  const auto& g = field.grid;
  const long n_hor = static_cast<long>(g.nx - 1) * g.ny;  // ids of horizontal edges
  const auto hor_id = [&](int ix, int iy) {
    return static_cast<long>(iy) * (g.nx - 1) + ix;
  };
  const auto ver_id = [&](int ix, int iy) {
    return n_hor + static_cast<long>(iy) * g.nx + ix;
  };
  const auto inside = [&](int ix, int iy) { return field.psi_at(ix, iy) > level; };
  const auto cross = [&](int ix0, int iy0, int ix1, int iy1) -> PlanarPoint {
    const double v0 = field.psi_at(ix0, iy0), v1 = field.psi_at(ix1, iy1);
    const double t = (level - v0) / (v1 - v0);
    return {g.x_at(ix0) + t * (g.x_at(ix1) - g.x_at(ix0)),
            g.y_at(iy0) + t * (g.y_at(iy1) - g.y_at(iy0))};
  };

  std::map<long, PlanarPoint> crossing;  // edge id -> interpolated point
  std::vector<std::pair<long, long>> segments;

  for (int iy = 0; iy + 1 < g.ny; ++iy) {
    for (int ix = 0; ix + 1 < g.nx; ++ix) {
      const bool a = inside(ix, iy), b = inside(ix + 1, iy);
      const bool c = inside(ix + 1, iy + 1), d = inside(ix, iy + 1);
      const int code = (a ? 1 : 0) | (b ? 2 : 0) | (c ? 4 : 0) | (d ? 8 : 0);
      if (code == 0 || code == 15) continue;

      const long bottom = hor_id(ix, iy), top = hor_id(ix, iy + 1);
      const long left = ver_id(ix, iy), right = ver_id(ix + 1, iy);
      const auto put = [&](long edge, int x0, int y0, int x1, int y1) {
        if (!crossing.count(edge)) crossing[edge] = cross(x0, y0, x1, y1);
      };
      const auto seg = [&](long e1, long e2) { segments.emplace_back(e1, e2); };
      if (a != b) put(bottom, ix, iy, ix + 1, iy);
      if (b != c) put(right, ix + 1, iy, ix + 1, iy + 1);
      if (d != c) put(top, ix, iy + 1, ix + 1, iy + 1);
      if (a != d) put(left, ix, iy, ix, iy + 1);

      switch (code) {
        case 1: case 14: seg(bottom, left); break;
        case 2: case 13: seg(bottom, right); break;
        case 3: case 12: seg(left, right); break;
        case 4: case 11: seg(right, top); break;
        case 6: case 9:  seg(bottom, top); break;
        case 7: case 8:  seg(left, top); break;
        case 5: case 10: {
          // saddle: split by the cell-center value
          const double center = 0.25 * (field.psi_at(ix, iy) + field.psi_at(ix + 1, iy) +
                                        field.psi_at(ix + 1, iy + 1) +
                                        field.psi_at(ix, iy + 1));
          const bool center_in = center > level;
          if ((code == 5) == center_in) {
            seg(bottom, right);
            seg(top, left);
          } else {
            seg(bottom, left);
            seg(top, right);
          }
          break;
        }
        default: break;
      }
    }
  }

  // each edge borders at most two segments, so the graph is chains and loops
  std::map<long, std::vector<std::size_t>> at_edge;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    at_edge[segments[s].first].push_back(s);
    at_edge[segments[s].second].push_back(s);
  }
  std::vector<bool> used(segments.size(), false);
  std::vector<ContourPolyline> lines;

  // follow unused segments outward from an edge until the chain (or loop) ends
  const auto extend = [&](long from) {
    std::vector<long> edges;
    long cur = from;
    while (true) {
      std::size_t next = segments.size();
      for (std::size_t cand : at_edge[cur]) {
        if (!used[cand]) {
          next = cand;
          break;
        }
      }
      if (next == segments.size()) break;
      used[next] = true;
      cur = segments[next].first == cur ? segments[next].second : segments[next].first;
      edges.push_back(cur);
    }
    return edges;
  };

  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (used[s]) continue;
    used[s] = true;
    const long e0 = segments[s].first, e1 = segments[s].second;
    const auto forward = extend(e1);
    const auto backward = extend(e0);

    ContourPolyline line;
    line.level = level;
    for (auto it = backward.rbegin(); it != backward.rend(); ++it) {
      line.points.push_back(crossing.at(*it));
    }
    line.points.push_back(crossing.at(e0));
    line.points.push_back(crossing.at(e1));
    for (long e : forward) line.points.push_back(crossing.at(e));
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace detail

inline std::vector<ContourPolyline> extract_contours(const StreamFieldGrid& field,
                                                     const std::vector<double>& levels) {
  std::vector<ContourPolyline> all;
  for (double level : levels) {
    auto lines = detail::contour_at_level(field, level);
    all.insert(all.end(), std::make_move_iterator(lines.begin()),
               std::make_move_iterator(lines.end()));
  }
  return all;
}

inline void write_contour_csv(const std::string& path,
                              const std::vector<ContourPolyline>& lines) {
  auto out = detail::open_out(path);
  out << "level_m2_per_s,x_m,y_m\n";
  for (const auto& line : lines) {
    for (const auto& p : line.points) {
      out << detail::fmt(line.level) << ',' << detail::fmt(p.x) << ',' << detail::fmt(p.y)
          << '\n';
    }
  }
  if (!out) throw Error("failed writing " + path);
}

// ---------------------------------------------------------------------------
// trajectory artifacts

inline void write_path_csv(const std::string& path, const PlanarPath& planar) {
  auto out = detail::open_out(path);
  out << "t_s,x_m,y_m\n";
  for (std::size_t i = 0; i < planar.points.size(); ++i) {
    out << detail::fmt(planar.times[i]) << ',' << detail::fmt(planar.points[i].x) << ','
        << detail::fmt(planar.points[i].y) << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

// reference and its derivatives through jerk, sampled on the control grid
inline void write_plan_csv(const std::string& path, const ReferenceTrajectory& ref,
                           double dt) {
  auto out = detail::open_out(path);
  out << "t_s,xd_m,yd_m,zd_m,"
         "vxd_m_per_s,vyd_m_per_s,vzd_m_per_s,"
         "axd_m_per_s2,ayd_m_per_s2,azd_m_per_s2,"
         "jxd_m_per_s3,jyd_m_per_s3,jzd_m_per_s3\n";
  const double T = ref.t_end - ref.t_start;
  const long steps = std::lround(std::floor(T / dt + 1e-9));
  for (long k = 0; k <= steps; ++k) {
    const double t = ref.t_start + dt * static_cast<double>(k);
    const auto s = ref.sample(t);
    out << detail::fmt(t);
    for (const auto* v : {&s.position, &s.velocity, &s.acceleration, &s.jerk}) {
      out << ',' << detail::fmt(v->x()) << ',' << detail::fmt(v->y()) << ','
          << detail::fmt(v->z());
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

// flown trajectory next to its reference, plus attitude and rotor speeds
inline void write_recovery_csv(const std::string& path, const QuadSimRecord& rec) {
  auto out = detail::open_out(path);
  out << "t_s,x_m,y_m,z_m,xd_m,yd_m,zd_m,roll_rad,pitch_rad,yaw_rad,"
         "rotor1_rad_per_s,rotor2_rad_per_s,rotor3_rad_per_s,rotor4_rad_per_s\n";
  for (const auto& s : rec.samples) {
    out << detail::fmt(s.t);
    out << ',' << detail::fmt(s.state.position.x()) << ','
        << detail::fmt(s.state.position.y()) << ',' << detail::fmt(s.state.position.z());
    out << ',' << detail::fmt(s.ref.position.x()) << ',' << detail::fmt(s.ref.position.y())
        << ',' << detail::fmt(s.ref.position.z());
    out << ',' << detail::fmt(s.state.euler.x()) << ',' << detail::fmt(s.state.euler.y())
        << ',' << detail::fmt(s.state.euler.z());
    for (double w : s.rotors.omega) out << ',' << detail::fmt(w);
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

inline void write_summary_json(const std::string& path, double v_star,
                               const SimulationLog& log, int iterations) {
  nlohmann::json j;
  j["v_star"] = v_star;
  j["max_rotor_speed"] = log.summary.max_rotor_speed;
  j["min_clearance"] = log.summary.min_clearance;
  j["max_tracking_error"] = log.summary.max_tracking_error;
  j["iterations"] = iterations;
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path);
}

}  // namespace flowrec
