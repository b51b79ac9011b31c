#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowrec/io.hpp"
#include "flowrec/scenario.hpp"

namespace fs = std::filesystem;
using namespace flowrec;

namespace {

std::string pick_out_dir(const std::string& flag, const ScenarioFile& file) {
  return flag.empty() ? file.output_dir : flag;
}

StreamFieldGrid solve_scenario_field(const RecoveryScenario& sc) {
  const auto cls = discretize(sc.grid, sc.obstacles);
  return solve_stream(cls, assemble_laplacian(cls),
                      boundary_values(cls, sc.boundary_gain, sc.obstacle_psi),
                      sc.boundary_gain);
}

int cmd_solve_field(const std::string& scenario_path, const std::string& out_flag) {
  const auto file = load_scenario(scenario_path);
  const auto& sc = file.scenario;
  const auto field = solve_scenario_field(sc);

  double lo = field.psi[0], hi = field.psi[0];
  for (double v : field.psi) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // a ladder of levels across the field plus each quad's own streamline
  std::vector<double> levels;
  constexpr int kLadder = 21;
  for (int i = 1; i <= kLadder; ++i) {
    levels.push_back(lo + (hi - lo) * i / (kLadder + 1));
  }
  for (const auto& q : sc.healthy) {
    levels.push_back(
        sample_psi(field, {q.state.position.x(), q.state.position.y()}));
  }
  const auto lines = extract_contours(field, levels);

  const std::string out_dir = pick_out_dir(out_flag, file);
  fs::create_directories(out_dir);
  const std::string field_path = out_dir + "/field.txt";
  const std::string contour_path = out_dir + "/contours.csv";
  write_field_file(field_path, field);
  write_contour_csv(contour_path, lines);

  std::printf("field %dx%d, psi in [%g, %g], %zu contour polylines\n", sc.grid.nx,
              sc.grid.ny, lo, hi, lines.size());
  std::printf("wrote %s\nwrote %s\n", field_path.c_str(), contour_path.c_str());
  return 0;
}

int cmd_plan(const std::string& scenario_path, const std::string& out_flag, double speed) {
  if (!(speed > 0.0)) throw SchemaError("--speed must be positive");
  const auto file = load_scenario(scenario_path);
  const auto& sc = file.scenario;
  if (sc.healthy.empty()) throw SchemaError("scenario has no quadrotors to plan for");

  const auto field = solve_scenario_field(sc);
  TraceConfig tc;
  tc.horizon = sc.horizon;
  tc.psi_drift_tolerance = sc.psi_drift_tolerance;

  // plan everything before writing anything
  std::vector<ReferenceTrajectory> refs;
  refs.reserve(sc.healthy.size());
  for (const auto& q : sc.healthy) {
    const auto path =
        trace(field, {q.state.position.x(), q.state.position.y()}, speed, tc);
    refs.push_back(fit_reference(path, q.state.position.z()));
  }

  const std::string out_dir = pick_out_dir(out_flag, file);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < sc.healthy.size(); ++i) {
    const std::string csv =
        out_dir + "/quad_" + std::to_string(sc.healthy[i].id) + "_plan.csv";
    write_plan_csv(csv, refs[i], sc.sim_dt);
    std::printf("quad %d: %.2f s reference, wrote %s\n", sc.healthy[i].id,
                refs[i].t_end - refs[i].t_start, csv.c_str());
  }
  return 0;
}

int cmd_recover(const std::string& scenario_path, const std::string& out_flag,
                const std::string& strategy) {
  const auto file = load_scenario(scenario_path);
  const auto& sc = file.scenario;
  if (sc.healthy.empty()) throw SchemaError("scenario has no quadrotors to recover");

  const auto result = max_safe_speed(sc, strategy == "incremental"
                                             ? SpeedSearchStrategy::Incremental
                                             : SpeedSearchStrategy::Bisect);

  const std::string out_dir = pick_out_dir(out_flag, file);
  fs::create_directories(out_dir);
  for (const auto& rec : result.log.quads) {
    const std::string csv =
        out_dir + "/quad_" + std::to_string(rec.quad_id) + "_recovery.csv";
    write_recovery_csv(csv, rec);
    std::printf("quad %d: %zu samples, wrote %s\n", rec.quad_id, rec.samples.size(),
                csv.c_str());
  }
  const std::string summary_path = out_dir + "/summary.json";
  write_summary_json(summary_path, result.v_star, result.log, result.feasibility_evals);

  std::printf(
      "v* = %.4f m/s after %d feasibility simulations; max rotor %.2f rad/s; "
      "min clearance %.3f m; max tracking error %.4f m\n",
      result.v_star, result.feasibility_evals, result.log.summary.max_rotor_speed,
      result.log.summary.min_clearance, result.log.summary.max_tracking_error);
  std::printf("wrote %s\n", summary_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streamline-based recovery planning for quadrotor teams"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir;
  double speed = 0.0;
  std::string strategy = "bisect";

  auto* solve = app.add_subcommand(
      "solve-field", "solve the stream field; write the grid file and contour CSV");
  solve->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  solve->add_option("--out", out_dir, "output directory (default: scenario's output_dir)");

  auto* plan = app.add_subcommand(
      "plan", "trace recovery paths at a fixed speed; write per-quad reference CSVs");
  plan->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  plan->add_option("--out", out_dir, "output directory (default: scenario's output_dir)");
  plan->add_option("--speed", speed, "sliding speed in m/s")->required();

  auto* recover = app.add_subcommand(
      "recover", "find the highest safe speed; write per-quad trajectories and a summary");
  recover->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  recover->add_option("--out", out_dir,
                      "output directory (default: scenario's output_dir)");
  recover->add_option("--strategy", strategy, "speed search strategy")
      ->check(CLI::IsMember({"bisect", "incremental"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad flags are input errors
  }

  try {
    if (solve->parsed()) return cmd_solve_field(scenario_path, out_dir);
    if (plan->parsed()) return cmd_plan(scenario_path, out_dir, speed);
    return cmd_recover(scenario_path, out_dir, strategy);
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const LowerBoundUnsafe& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
