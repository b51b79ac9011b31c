#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "flowrec/orchestrator.hpp"

namespace flowrec {

// a scenario document: the recovery problem plus artifact plumbing
struct ScenarioFile {
  RecoveryScenario scenario;
  std::string output_dir = ".";
  long random_seed = 0;  // reserved; the pipeline is deterministic
};

namespace detail {

using nlohmann::json;

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
}

// strict schema: anything we did not ask for is a likely typo
inline void reject_unknown_keys(const json& obj, const std::string& where,
                                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw SchemaError(where + ": unknown key \"" + item.key() + "\"");
  }
}

inline double get_number(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) throw SchemaError(where + ": missing key \"" + key + "\"");
  const auto& v = obj.at(key);
  if (!v.is_number()) throw SchemaError(where + ": \"" + key + "\" must be a number");
  return v.get<double>();
}

inline double get_number_or(const json& obj, const std::string& where, const char* key,
                            double fallback) {
  return obj.contains(key) ? get_number(obj, where, key) : fallback;
}

inline long get_integer(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) throw SchemaError(where + ": missing key \"" + key + "\"");
  const auto& v = obj.at(key);
  if (!v.is_number_integer())
    throw SchemaError(where + ": \"" + key + "\" must be an integer");
  return v.get<long>();
}

inline long get_integer_or(const json& obj, const std::string& where, const char* key,
                           long fallback) {
  return obj.contains(key) ? get_integer(obj, where, key) : fallback;
}

inline void require_positive(double v, const std::string& where, const char* key) {
  if (!(v > 0.0)) {
    throw SchemaError(where + ": \"" + key + "\" must be positive");
  }
}

}  // namespace detail

inline ScenarioFile parse_scenario(const nlohmann::json& root) {
  using detail::get_integer;
  using detail::get_integer_or;
  using detail::get_number;
  using detail::get_number_or;
  using detail::require_object;
  using detail::require_positive;

  require_object(root, "scenario");
  detail::reject_unknown_keys(root, "scenario",
                              {"grid", "boundary_gain_m_per_s", "obstacles", "quadrotors",
                               "vehicle", "gains", "simulation", "speed_search",
                               "output_dir", "random_seed"});

  ScenarioFile file;
  auto& sc = file.scenario;

  if (!root.contains("grid")) throw SchemaError("scenario: missing key \"grid\"");
  {
    const auto& g = root.at("grid");
    require_object(g, "grid");
    detail::reject_unknown_keys(
        g, "grid", {"x_min_m", "x_max_m", "y_min_m", "y_max_m", "nx_nodes", "ny_nodes"});
    sc.grid.x_min = get_number(g, "grid", "x_min_m");
    sc.grid.x_max = get_number(g, "grid", "x_max_m");
    sc.grid.y_min = get_number(g, "grid", "y_min_m");
    sc.grid.y_max = get_number(g, "grid", "y_max_m");
    sc.grid.nx = static_cast<int>(get_integer(g, "grid", "nx_nodes"));
    sc.grid.ny = static_cast<int>(get_integer(g, "grid", "ny_nodes"));
    if (!(sc.grid.x_max > sc.grid.x_min) || !(sc.grid.y_max > sc.grid.y_min)) {
      throw SchemaError("grid: extents must satisfy x_min < x_max and y_min < y_max");
    }
    if (sc.grid.nx < 3 || sc.grid.ny < 3) {
      throw SchemaError("grid: nx_nodes and ny_nodes must be at least 3");
    }
    // the solver treats cells as squares; insist the spacing really is one
    if (std::abs(sc.grid.dx() / sc.grid.dy() - 1.0) > 1e-6) {
      throw SchemaError("grid: node spacing must be square (dx == dy)");
    }
  }

  sc.boundary_gain = get_number_or(root, "scenario", "boundary_gain_m_per_s", 1.0);
  if (sc.boundary_gain == 0.0) {
    throw SchemaError("scenario: \"boundary_gain_m_per_s\" must be nonzero");
  }

  if (root.contains("obstacles")) {
    const auto& arr = root.at("obstacles");
    if (!arr.is_array()) throw SchemaError("obstacles: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "obstacles[" + std::to_string(i) + "]";
      const auto& o = arr[i];
      require_object(o, where);
      detail::reject_unknown_keys(o, where,
                                  {"center_x_m", "center_y_m", "radius_m", "psi_m2_per_s"});
      ObstacleSpec ob;
      ob.center.x = get_number(o, where, "center_x_m");
      ob.center.y = get_number(o, where, "center_y_m");
      ob.radius = get_number(o, where, "radius_m");
      require_positive(ob.radius, where, "radius_m");
      if (!(ob.center.x - ob.radius > sc.grid.x_min) ||
          !(ob.center.x + ob.radius < sc.grid.x_max) ||
          !(ob.center.y - ob.radius > sc.grid.y_min) ||
          !(ob.center.y + ob.radius < sc.grid.y_max)) {
        throw SchemaError(where + ": disk must lie strictly inside the grid");
      }
      sc.obstacles.push_back(ob);
      if (o.contains("psi_m2_per_s")) {
        sc.obstacle_psi.push_back(get_number(o, where, "psi_m2_per_s"));
      } else {
        sc.obstacle_psi.push_back(std::nullopt);
      }
    }
    for (std::size_t i = 0; i < sc.obstacles.size(); ++i) {
      for (std::size_t j = i + 1; j < sc.obstacles.size(); ++j) {
        const double d = std::hypot(sc.obstacles[i].center.x - sc.obstacles[j].center.x,
                                    sc.obstacles[i].center.y - sc.obstacles[j].center.y);
        if (!(d > sc.obstacles[i].radius + sc.obstacles[j].radius)) {
          throw SchemaError("obstacles[" + std::to_string(i) + "] and obstacles[" +
                            std::to_string(j) + "] overlap");
        }
      }
    }
  }

  if (root.contains("vehicle")) {
    const auto& v = root.at("vehicle");
    require_object(v, "vehicle");
    detail::reject_unknown_keys(
        v, "vehicle",
        {"mass_kg", "gravity_m_per_s2", "arm_length_m", "inertia_xx_kg_m2",
         "inertia_yy_kg_m2", "inertia_zz_kg_m2", "thrust_coeff_n_s2", "drag_coeff_nm_s2",
         "rotor_speed_max_rad_per_s"});
    auto& qp = sc.params;
    qp.mass = get_number_or(v, "vehicle", "mass_kg", qp.mass);
    qp.gravity = get_number_or(v, "vehicle", "gravity_m_per_s2", qp.gravity);
    qp.arm_length = get_number_or(v, "vehicle", "arm_length_m", qp.arm_length);
    qp.inertia.x() = get_number_or(v, "vehicle", "inertia_xx_kg_m2", qp.inertia.x());
    qp.inertia.y() = get_number_or(v, "vehicle", "inertia_yy_kg_m2", qp.inertia.y());
    qp.inertia.z() = get_number_or(v, "vehicle", "inertia_zz_kg_m2", qp.inertia.z());
    qp.thrust_coeff = get_number_or(v, "vehicle", "thrust_coeff_n_s2", qp.thrust_coeff);
    qp.drag_torque_coeff =
        get_number_or(v, "vehicle", "drag_coeff_nm_s2", qp.drag_torque_coeff);
    qp.rotor_speed_max =
        get_number_or(v, "vehicle", "rotor_speed_max_rad_per_s", qp.rotor_speed_max);
    require_positive(qp.mass, "vehicle", "mass_kg");
    require_positive(qp.gravity, "vehicle", "gravity_m_per_s2");
    require_positive(qp.arm_length, "vehicle", "arm_length_m");
    require_positive(qp.inertia.x(), "vehicle", "inertia_xx_kg_m2");
    require_positive(qp.inertia.y(), "vehicle", "inertia_yy_kg_m2");
    require_positive(qp.inertia.z(), "vehicle", "inertia_zz_kg_m2");
    require_positive(qp.thrust_coeff, "vehicle", "thrust_coeff_n_s2");
    require_positive(qp.drag_torque_coeff, "vehicle", "drag_coeff_nm_s2");
    require_positive(qp.rotor_speed_max, "vehicle", "rotor_speed_max_rad_per_s");
  }

  if (root.contains("gains")) {
    const auto& g = root.at("gains");
    require_object(g, "gains");
    detail::reject_unknown_keys(g, "gains", {"k1", "k2", "k3", "k4", "k5", "k6"});
    auto& k = sc.gains;
    k.k1 = get_number_or(g, "gains", "k1", k.k1);
    k.k2 = get_number_or(g, "gains", "k2", k.k2);
    k.k3 = get_number_or(g, "gains", "k3", k.k3);
    k.k4 = get_number_or(g, "gains", "k4", k.k4);
    k.k5 = get_number_or(g, "gains", "k5", k.k5);
    k.k6 = get_number_or(g, "gains", "k6", k.k6);
    for (const auto& [name, val] : {std::pair<const char*, double>{"k1", k.k1},
                                    {"k2", k.k2},
                                    {"k3", k.k3},
                                    {"k4", k.k4},
                                    {"k5", k.k5},
                                    {"k6", k.k6}}) {
      require_positive(val, "gains", name);
    }
  }

  if (root.contains("simulation")) {
    const auto& s = root.at("simulation");
    require_object(s, "simulation");
    detail::reject_unknown_keys(s, "simulation",
                                {"dt_s", "horizon_s", "psi_drift_tolerance_rel"});
    sc.sim_dt = get_number_or(s, "simulation", "dt_s", sc.sim_dt);
    sc.horizon = get_number_or(s, "simulation", "horizon_s", sc.horizon);
    sc.psi_drift_tolerance =
        get_number_or(s, "simulation", "psi_drift_tolerance_rel", sc.psi_drift_tolerance);
    require_positive(sc.sim_dt, "simulation", "dt_s");
    require_positive(sc.horizon, "simulation", "horizon_s");
    require_positive(sc.psi_drift_tolerance, "simulation", "psi_drift_tolerance_rel");
  }

  if (root.contains("speed_search")) {
    const auto& s = root.at("speed_search");
    require_object(s, "speed_search");
    detail::reject_unknown_keys(s, "speed_search",
                                {"v_min_m_per_s", "v_max_m_per_s", "tolerance_m_per_s",
                                 "max_simulations", "increment_m_per_s"});
    sc.v_min = get_number_or(s, "speed_search", "v_min_m_per_s", sc.v_min);
    sc.v_max = get_number_or(s, "speed_search", "v_max_m_per_s", sc.v_max);
    sc.v_tolerance = get_number_or(s, "speed_search", "tolerance_m_per_s", sc.v_tolerance);
    sc.max_feasibility_sims = static_cast<int>(
        get_integer_or(s, "speed_search", "max_simulations", sc.max_feasibility_sims));
    sc.v_increment = get_number_or(s, "speed_search", "increment_m_per_s", sc.v_increment);
    require_positive(sc.v_min, "speed_search", "v_min_m_per_s");
    require_positive(sc.v_tolerance, "speed_search", "tolerance_m_per_s");
    require_positive(sc.v_increment, "speed_search", "increment_m_per_s");
    if (!(sc.v_max > sc.v_min)) {
      throw SchemaError("speed_search: v_max_m_per_s must exceed v_min_m_per_s");
    }
    if (sc.max_feasibility_sims < 1) {
      throw SchemaError("speed_search: \"max_simulations\" must be at least 1");
    }
  }

  if (root.contains("quadrotors")) {
    const auto& arr = root.at("quadrotors");
    if (!arr.is_array()) throw SchemaError("quadrotors: expected an array");
    std::set<long> seen;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "quadrotors[" + std::to_string(i) + "]";
      const auto& q = arr[i];
      require_object(q, where);
      detail::reject_unknown_keys(q, where, {"id", "start_x_m", "start_y_m", "altitude_m"});
      const long id = get_integer(q, where, "id");
      if (!seen.insert(id).second) {
        throw SchemaError(where + ": duplicate id " + std::to_string(id));
      }
      const double x = get_number(q, where, "start_x_m");
      const double y = get_number(q, where, "start_y_m");
      const double z = get_number(q, where, "altitude_m");
      if (!sc.grid.contains({x, y})) {
        throw SchemaError(where + ": start lies outside the grid");
      }
      for (std::size_t h = 0; h < sc.obstacles.size(); ++h) {
        const auto& ob = sc.obstacles[h];
        const double clearance =
            std::hypot(x - ob.center.x, y - ob.center.y) - ob.radius;
        if (!(clearance > 0.0)) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.3f", clearance);
          throw SchemaError(where + ": start is inside obstacles[" + std::to_string(h) +
                            "] (clearance " + buf + " m)");
        }
      }
      sc.healthy.push_back({static_cast<int>(id), hover_state_at({x, y, z}, sc.params)});
    }
  }

  file.output_dir = root.value("output_dir", std::string("."));
  if (root.contains("output_dir") && !root.at("output_dir").is_string()) {
    throw SchemaError("scenario: \"output_dir\" must be a string");
  }
  file.random_seed = get_integer_or(root, "scenario", "random_seed", 0);
  return file;
}

inline ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open scenario file: " + path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return parse_scenario(root);
}

// inverse of parse_scenario; parse(serialize(f)) is semantically identical to f
inline nlohmann::json scenario_to_json(const ScenarioFile& file) {
  using nlohmann::json;
  const auto& sc = file.scenario;
  json root;
  root["grid"] = {{"x_min_m", sc.grid.x_min}, {"x_max_m", sc.grid.x_max},
                  {"y_min_m", sc.grid.y_min}, {"y_max_m", sc.grid.y_max},
                  {"nx_nodes", sc.grid.nx},   {"ny_nodes", sc.grid.ny}};
  root["boundary_gain_m_per_s"] = sc.boundary_gain;
  root["obstacles"] = json::array();
  for (std::size_t i = 0; i < sc.obstacles.size(); ++i) {
    json o = {{"center_x_m", sc.obstacles[i].center.x},
              {"center_y_m", sc.obstacles[i].center.y},
              {"radius_m", sc.obstacles[i].radius}};
    if (i < sc.obstacle_psi.size() && sc.obstacle_psi[i]) {
      o["psi_m2_per_s"] = *sc.obstacle_psi[i];
    }
    root["obstacles"].push_back(std::move(o));
  }
  root["quadrotors"] = json::array();
  for (const auto& q : sc.healthy) {
    root["quadrotors"].push_back({{"id", q.id},
                                  {"start_x_m", q.state.position.x()},
                                  {"start_y_m", q.state.position.y()},
                                  {"altitude_m", q.state.position.z()}});
  }
  root["vehicle"] = {{"mass_kg", sc.params.mass},
                     {"gravity_m_per_s2", sc.params.gravity},
                     {"arm_length_m", sc.params.arm_length},
                     {"inertia_xx_kg_m2", sc.params.inertia.x()},
                     {"inertia_yy_kg_m2", sc.params.inertia.y()},
                     {"inertia_zz_kg_m2", sc.params.inertia.z()},
                     {"thrust_coeff_n_s2", sc.params.thrust_coeff},
                     {"drag_coeff_nm_s2", sc.params.drag_torque_coeff},
                     {"rotor_speed_max_rad_per_s", sc.params.rotor_speed_max}};
  root["gains"] = {{"k1", sc.gains.k1}, {"k2", sc.gains.k2}, {"k3", sc.gains.k3},
                   {"k4", sc.gains.k4}, {"k5", sc.gains.k5}, {"k6", sc.gains.k6}};
  root["simulation"] = {{"dt_s", sc.sim_dt},
                        {"horizon_s", sc.horizon},
                        {"psi_drift_tolerance_rel", sc.psi_drift_tolerance}};
  root["speed_search"] = {{"v_min_m_per_s", sc.v_min},
                          {"v_max_m_per_s", sc.v_max},
                          {"tolerance_m_per_s", sc.v_tolerance},
                          {"max_simulations", sc.max_feasibility_sims},
                          {"increment_m_per_s", sc.v_increment}};
  root["output_dir"] = file.output_dir;
  root["random_seed"] = file.random_seed;
  return root;
}

}  // namespace flowrec
