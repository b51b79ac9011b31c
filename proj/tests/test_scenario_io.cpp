#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flowrec/io.hpp"
#include "flowrec/scenario.hpp"

namespace fs = std::filesystem;
using namespace flowrec;
using nlohmann::json;

namespace {

const std::string kRepoDir = FLOWREC_REPO_DIR;
const std::string kCli = FLOWREC_CLI;

// fresh scratch directory per test binary run
fs::path scratch_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() /
             ("flowrec_io_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

json minimal_scenario() {
  return json::parse(R"({
    "grid": {"x_min_m": -6.0, "x_max_m": 6.0, "y_min_m": -4.0, "y_max_m": 4.0,
             "nx_nodes": 49, "ny_nodes": 33},
    "obstacles": [{"center_x_m": 0.0, "center_y_m": 0.0, "radius_m": 1.0}],
    "quadrotors": [{"id": 1, "start_x_m": -5.0, "start_y_m": 1.0, "altitude_m": 3.0}]
  })");
}

StreamFieldGrid solve_small_field(const RecoveryScenario& sc) {
  const auto cls = discretize(sc.grid, sc.obstacles);
  return solve_stream(cls, assemble_laplacian(cls),
                      boundary_values(cls, sc.boundary_gain, sc.obstacle_psi),
                      sc.boundary_gain);
}

std::vector<std::vector<double>> read_csv(const fs::path& path, std::string* header) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  REQUIRE(std::getline(in, line));
  if (header) *header = line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("bundled ten-quad scenario parses with expected values") {
  const auto file = load_scenario(kRepoDir + "/scenarios/ten_quad_recovery.json");
  const auto& sc = file.scenario;

  CHECK(sc.grid.nx == 121);
  CHECK(sc.grid.ny == 65);
  CHECK(sc.grid.dx() == Catch::Approx(0.25));
  CHECK(sc.grid.dy() == Catch::Approx(0.25));
  CHECK(sc.boundary_gain == 1.0);
  REQUIRE(sc.obstacles.size() == 2);
  CHECK(sc.obstacles[0].center.x == -4.0);
  CHECK(sc.obstacles[1].center.x == 4.0);
  CHECK(sc.obstacles[0].radius == 2.0);
  CHECK_FALSE(sc.obstacle_psi[0].has_value());

  REQUIRE(sc.healthy.size() == 10);
  CHECK(sc.healthy[0].id == 1);
  CHECK(sc.healthy[0].state.position == Eigen::Vector3d(-12.0, 1.0, 5.0));
  CHECK(sc.healthy[0].state.velocity.norm() == 0.0);
  CHECK(sc.healthy[0].state.thrust ==
        Catch::Approx(sc.params.mass * sc.params.gravity));
  CHECK(sc.healthy[9].state.position.y() == -5.0);

  CHECK(sc.params.mass == 0.468);
  CHECK(sc.params.rotor_speed_max == 700.0);
  CHECK(sc.gains.k3 == 14.0);
  CHECK(sc.gains.k6 == 120.0);
  CHECK(sc.sim_dt == 0.001);
  CHECK(sc.v_min == 0.5);
  CHECK(sc.v_max == 6.0);
  CHECK(sc.v_tolerance == 0.01);
  CHECK(sc.max_feasibility_sims == 20);
  CHECK(file.output_dir == "out/ten_quad");
}

TEST_CASE("defaults fill in for omitted blocks") {
  const auto file = parse_scenario(minimal_scenario());
  const auto& sc = file.scenario;
  CHECK(sc.boundary_gain == 1.0);
  CHECK(sc.params.mass == QuadParams{}.mass);
  CHECK(sc.gains.k5 == OuterGains{}.k5);
  CHECK(sc.sim_dt == 1e-3);
  CHECK(sc.horizon == 60.0);
  CHECK(sc.psi_drift_tolerance == 1e-3);
  CHECK(sc.v_increment == 0.25);
  CHECK(file.output_dir == ".");
  CHECK(file.random_seed == 0);
}

TEST_CASE("schema violations are rejected with the offending key named") {
  const auto expect_schema_error = [](json j, const std::string& needle) {
    try {
      parse_scenario(j);
      FAIL("expected SchemaError for " + needle);
    } catch (const SchemaError& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  auto j = minimal_scenario();
  j["grid"]["dx_m"] = 0.25;
  expect_schema_error(j, "dx_m");

  j = minimal_scenario();
  j["extras"] = 1;
  expect_schema_error(j, "extras");

  j = minimal_scenario();
  j.erase("grid");
  expect_schema_error(j, "grid");

  j = minimal_scenario();
  j["grid"]["nx_nodes"] = 25;  // dx becomes 0.5 while dy stays 0.25
  expect_schema_error(j, "square");

  j = minimal_scenario();
  j["grid"]["x_min_m"] = "left";
  expect_schema_error(j, "x_min_m");

  j = minimal_scenario();
  j["obstacles"].push_back({{"center_x_m", 0.5}, {"center_y_m", 0.0}, {"radius_m", 1.0}});
  expect_schema_error(j, "overlap");

  j = minimal_scenario();
  j["obstacles"][0]["center_x_m"] = 5.5;  // disk reaches past x_max
  expect_schema_error(j, "strictly inside");

  j = minimal_scenario();
  j["obstacles"][0]["radius_m"] = -1.0;
  expect_schema_error(j, "radius_m");

  j = minimal_scenario();
  j["quadrotors"].push_back(
      {{"id", 1}, {"start_x_m", -4.0}, {"start_y_m", 1.0}, {"altitude_m", 3.0}});
  expect_schema_error(j, "duplicate");

  j = minimal_scenario();
  j["quadrotors"][0]["start_x_m"] = 0.3;
  j["quadrotors"][0]["start_y_m"] = 0.0;
  expect_schema_error(j, "clearance");

  j = minimal_scenario();
  j["quadrotors"][0]["start_y_m"] = 9.0;
  expect_schema_error(j, "outside the grid");

  j = minimal_scenario();
  j["simulation"] = {{"dt_s", 0.0}};
  expect_schema_error(j, "dt_s");

  j = minimal_scenario();
  j["speed_search"] = {{"v_min_m_per_s", 2.0}, {"v_max_m_per_s", 1.0}};
  expect_schema_error(j, "v_max_m_per_s");

  j = minimal_scenario();
  j["speed_search"] = {{"max_simulations", 0}};
  expect_schema_error(j, "max_simulations");

  j = minimal_scenario();
  j["gains"] = {{"k6", -1.0}};
  expect_schema_error(j, "k6");

  j = minimal_scenario();
  j["boundary_gain_m_per_s"] = 0.0;
  expect_schema_error(j, "boundary_gain_m_per_s");

  j = minimal_scenario();
  j["vehicle"] = {{"mass_kg", 0.0}};
  expect_schema_error(j, "mass_kg");
}

TEST_CASE("serialize-parse round trip preserves the scenario") {
  const auto original = load_scenario(kRepoDir + "/scenarios/ten_quad_recovery.json");
  const auto round = parse_scenario(scenario_to_json(original));

  const auto& a = original.scenario;
  const auto& b = round.scenario;
  CHECK(a.grid.x_min == b.grid.x_min);
  CHECK(a.grid.nx == b.grid.nx);
  CHECK(a.boundary_gain == b.boundary_gain);
  REQUIRE(a.obstacles.size() == b.obstacles.size());
  for (std::size_t i = 0; i < a.obstacles.size(); ++i) {
    CHECK(a.obstacles[i].center.x == b.obstacles[i].center.x);
    CHECK(a.obstacles[i].radius == b.obstacles[i].radius);
    CHECK(a.obstacle_psi[i] == b.obstacle_psi[i]);
  }
  REQUIRE(a.healthy.size() == b.healthy.size());
  for (std::size_t i = 0; i < a.healthy.size(); ++i) {
    CHECK(a.healthy[i].id == b.healthy[i].id);
    CHECK(a.healthy[i].state.position == b.healthy[i].state.position);
    CHECK(a.healthy[i].state.thrust == b.healthy[i].state.thrust);
  }
  CHECK(a.params.mass == b.params.mass);
  CHECK(a.params.inertia == b.params.inertia);
  CHECK(a.params.drag_torque_coeff == b.params.drag_torque_coeff);
  CHECK(a.gains.k1 == b.gains.k1);
  CHECK(a.gains.k6 == b.gains.k6);
  CHECK(a.sim_dt == b.sim_dt);
  CHECK(a.horizon == b.horizon);
  CHECK(a.psi_drift_tolerance == b.psi_drift_tolerance);
  CHECK(a.v_min == b.v_min);
  CHECK(a.v_max == b.v_max);
  CHECK(a.v_tolerance == b.v_tolerance);
  CHECK(a.max_feasibility_sims == b.max_feasibility_sims);
  CHECK(a.v_increment == b.v_increment);
  CHECK(original.output_dir == round.output_dir);
  CHECK(original.random_seed == round.random_seed);
}

TEST_CASE("field file round trips exactly") {
  const auto file = parse_scenario(minimal_scenario());
  const auto field = solve_small_field(file.scenario);

  const auto path = scratch_dir() / "field.txt";
  write_field_file(path.string(), field);
  const auto back = read_field_file(path.string());

  CHECK(back.grid.x_min == field.grid.x_min);
  CHECK(back.grid.x_max == field.grid.x_max);
  CHECK(back.grid.y_min == field.grid.y_min);
  CHECK(back.grid.y_max == field.grid.y_max);
  CHECK(back.grid.nx == field.grid.nx);
  CHECK(back.grid.ny == field.grid.ny);
  CHECK(back.boundary_gain == field.boundary_gain);
  REQUIRE(back.psi.size() == field.psi.size());
  for (std::size_t i = 0; i < back.psi.size(); ++i) {
    CHECK(back.psi[i] == field.psi[i]);
  }

  std::ofstream(scratch_dir() / "junk.txt") << "not a field\n1 2 3\n";
  CHECK_THROWS_AS(read_field_file((scratch_dir() / "junk.txt").string()), Error);
  CHECK_THROWS_AS(read_field_file((scratch_dir() / "missing.txt").string()), Error);
}

TEST_CASE("contours of an unobstructed channel are uniform horizontal lines") {
  auto j = minimal_scenario();
  j.erase("obstacles");
  const auto file = parse_scenario(j);
  const auto field = solve_small_field(file.scenario);  // psi = K*y exactly

  const std::vector<double> levels = {-2.0, -1.0, 0.0, 1.0, 2.0};
  const auto lines = extract_contours(field, levels);
  REQUIRE(lines.size() == levels.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    CHECK(lines[i].level == levels[i]);
    REQUIRE(lines[i].points.size() >= 2);
    for (const auto& p : lines[i].points) {
      CHECK(p.y == Catch::Approx(levels[i]).margin(1e-12));
    }
    // spans the full width
    double x_lo = 1e9, x_hi = -1e9;
    for (const auto& p : lines[i].points) {
      x_lo = std::min(x_lo, p.x);
      x_hi = std::max(x_hi, p.x);
    }
    CHECK(x_lo == Catch::Approx(field.grid.x_min).margin(1e-12));
    CHECK(x_hi == Catch::Approx(field.grid.x_max).margin(1e-12));
  }
}

TEST_CASE("contour polylines lie on the interpolated level set and are connected") {
  const auto file = parse_scenario(minimal_scenario());
  const auto field = solve_small_field(file.scenario);

  const auto lines = extract_contours(field, {0.96, 0.3});
  REQUIRE_FALSE(lines.empty());
  const double step_limit = std::hypot(field.grid.dx(), field.grid.dy()) + 1e-12;
  for (const auto& line : lines) {
    REQUIRE(line.points.size() >= 2);
    for (const auto& p : line.points) {
      // crossings sit on cell edges, where bilinear interpolation is linear
      CHECK(detail::bilinear(field, p) == Catch::Approx(line.level).margin(1e-11));
    }
    for (std::size_t i = 1; i < line.points.size(); ++i) {
      const double hop = std::hypot(line.points[i].x - line.points[i - 1].x,
                                    line.points[i].y - line.points[i - 1].y);
      CHECK(hop <= step_limit);
    }
  }
}

TEST_CASE("plan CSV columns are self-consistent") {
  // borrow a curved path: quarter-ish circle arc sampled densely
  PlanarPath path;
  path.speed = 1.0;
  path.psi_0 = 0.0;
  const double R = 5.0, w = 0.2;
  for (int i = 0; i <= 200; ++i) {
    const double t = 0.05 * i;
    path.times.push_back(t);
    path.points.push_back({R * std::cos(w * t), R * std::sin(w * t)});
  }
  const auto ref = fit_reference(path, 2.0);

  const auto csv = scratch_dir() / "plan.csv";
  write_plan_csv(csv.string(), ref, 0.01);

  std::string header;
  const auto rows = read_csv(csv, &header);
  CHECK(header ==
        "t_s,xd_m,yd_m,zd_m,vxd_m_per_s,vyd_m_per_s,vzd_m_per_s,"
        "axd_m_per_s2,ayd_m_per_s2,azd_m_per_s2,jxd_m_per_s3,jyd_m_per_s3,jzd_m_per_s3");
  REQUIRE(rows.size() == 1001);
  for (const auto& row : rows) REQUIRE(row.size() == 13);
  CHECK(rows.front()[0] == 0.0);
  CHECK(rows.back()[0] == Catch::Approx(10.0));
  CHECK(rows.front()[1] == Catch::Approx(R).epsilon(1e-3));
  CHECK(rows.front()[3] == 2.0);  // constant altitude...
  CHECK(rows.front()[6] == 0.0);  // ...so zero vertical rate

  // velocity, acceleration and jerk columns against finite differences of
  // the columns one order below
  for (std::size_t k = 1; k + 1 < rows.size(); ++k) {
    const double dt2 = rows[k + 1][0] - rows[k - 1][0];
    for (int axis = 0; axis < 2; ++axis) {
      const double fd_v = (rows[k + 1][1 + axis] - rows[k - 1][1 + axis]) / dt2;
      const double fd_a = (rows[k + 1][4 + axis] - rows[k - 1][4 + axis]) / dt2;
      const double fd_j = (rows[k + 1][7 + axis] - rows[k - 1][7 + axis]) / dt2;
      CHECK(rows[k][4 + axis] == Catch::Approx(fd_v).margin(1e-3));
      CHECK(rows[k][7 + axis] == Catch::Approx(fd_a).margin(1e-3));
      CHECK(rows[k][10 + axis] == Catch::Approx(fd_j).margin(1e-2));
    }
  }
}

TEST_CASE("recovery CSV and summary JSON emit the exact contract") {
  QuadSimRecord rec;
  rec.quad_id = 4;
  QuadSimSample s;
  s.t = 0.5;
  s.state.position = {1.0, 2.0, 3.0};
  s.state.euler = {0.01, -0.02, 0.25};
  s.ref.position = {1.5, 2.5, 3.0};
  s.rotors.omega = {600.0, 610.0, 620.0, 630.0};
  rec.samples = {s};

  const auto csv = scratch_dir() / "recovery.csv";
  write_recovery_csv(csv.string(), rec);
  CHECK(slurp(csv) ==
        "t_s,x_m,y_m,z_m,xd_m,yd_m,zd_m,roll_rad,pitch_rad,yaw_rad,"
        "rotor1_rad_per_s,rotor2_rad_per_s,rotor3_rad_per_s,rotor4_rad_per_s\n"
        "0.5,1,2,3,1.5,2.5,3,0.01,-0.02,0.25,600,610,620,630\n");

  SimulationLog log;
  log.summary.max_rotor_speed = 655.25;
  log.summary.min_clearance = 2.5;
  log.summary.max_tracking_error = 0.125;
  const auto jpath = scratch_dir() / "summary.json";
  write_summary_json(jpath.string(), 1.75, log, 12);
  const auto j = json::parse(slurp(jpath));
  CHECK(j.at("v_star") == 1.75);
  CHECK(j.at("max_rotor_speed") == 655.25);
  CHECK(j.at("min_clearance") == 2.5);
  CHECK(j.at("max_tracking_error") == 0.125);
  CHECK(j.at("iterations") == 12);

  PlanarPath path;
  path.times = {0.0, 0.25};
  path.points = {{-1.0, 0.5}, {-0.75, 0.5}};
  const auto ppath = scratch_dir() / "path.csv";
  write_path_csv(ppath.string(), path);
  CHECK(slurp(ppath) == "t_s,x_m,y_m\n0,-1,0.5\n0.25,-0.75,0.5\n");
}

TEST_CASE("cli: solve-field writes deterministic artifacts") {
  const auto out = scratch_dir() / "cli_solve";
  const std::string scenario = kRepoDir + "/scenarios/single_cylinder.json";
  REQUIRE(run_cli("solve-field --scenario " + scenario + " --out " + out.string()) == 0);
  REQUIRE(fs::exists(out / "field.txt"));
  REQUIRE(fs::exists(out / "contours.csv"));
  const auto field_once = slurp(out / "field.txt");
  const auto contours_once = slurp(out / "contours.csv");

  REQUIRE(run_cli("solve-field --scenario " + scenario + " --out " + out.string()) == 0);
  CHECK(slurp(out / "field.txt") == field_once);
  CHECK(slurp(out / "contours.csv") == contours_once);

  // the emitted field can be read back
  const auto back = read_field_file((out / "field.txt").string());
  CHECK(back.grid.nx == 49);
  CHECK(back.boundary_gain == 1.0);
}

TEST_CASE("cli: malformed scenario exits 2 and leaves no partial output") {
  const auto bad = scratch_dir() / "bad.json";
  std::ofstream(bad) << R"({"grid": {"x_min_m": 0}})";
  const auto out = scratch_dir() / "cli_bad";
  CHECK(run_cli("solve-field --scenario " + bad.string() + " --out " + out.string()) == 2);
  CHECK_FALSE(fs::exists(out));

  CHECK(run_cli("plan --scenario " + bad.string() + " --speed 1 --out " + out.string()) ==
        2);
  CHECK(run_cli("recover --scenario " + bad.string() + " --out " + out.string()) == 2);
  CHECK_FALSE(fs::exists(out));

  // unknown flags are input errors too
  CHECK(run_cli("solve-field --scenario " + bad.string() + " --frobnicate") == 2);
}

TEST_CASE("cli: plan on an unobstructed channel gives straight references") {
  auto j = minimal_scenario();
  j.erase("obstacles");
  j["quadrotors"] = json::array(
      {{{"id", 3}, {"start_x_m", -5.0}, {"start_y_m", 1.0}, {"altitude_m", 2.0}}});
  const auto spath = scratch_dir() / "channel.json";
  std::ofstream(spath) << j.dump(2);

  const auto out = scratch_dir() / "cli_plan";
  REQUIRE(run_cli("plan --scenario " + spath.string() + " --speed 1 --out " +
                  out.string()) == 0);
  const auto csv = out / "quad_3_plan.csv";
  REQUIRE(fs::exists(csv));
  const auto rows = read_csv(csv, nullptr);
  REQUIRE(rows.size() > 100);
  for (std::size_t k = 0; k < rows.size(); k += 97) {
    const auto& row = rows[k];
    CHECK(row[1] == Catch::Approx(-5.0 + row[0]).margin(1e-6));  // x = x0 + v t
    CHECK(row[2] == Catch::Approx(1.0).margin(1e-6));
    CHECK(row[3] == 2.0);
  }
}

TEST_CASE("cli: recover with a fully safe bracket returns the upper bound") {
  auto j = json::parse(slurp(kRepoDir + "/scenarios/single_cylinder.json"));
  j["speed_search"]["v_max_m_per_s"] = 1.0;  // both ends safe -> early exit
  const auto spath = scratch_dir() / "easy.json";
  std::ofstream(spath) << j.dump(2);

  const auto out = scratch_dir() / "cli_recover";
  REQUIRE(run_cli("recover --scenario " + spath.string() + " --out " + out.string()) == 0);
  REQUIRE(fs::exists(out / "summary.json"));
  REQUIRE(fs::exists(out / "quad_1_recovery.csv"));
  REQUIRE(fs::exists(out / "quad_2_recovery.csv"));

  const auto summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary.at("v_star") == 1.0);
  CHECK(summary.at("iterations") == 2);
  CHECK(summary.at("max_rotor_speed").get<double>() < 700.0);
  CHECK(summary.at("min_clearance").get<double>() > 1.0);

  std::string header;
  const auto rows = read_csv(out / "quad_1_recovery.csv", &header);
  CHECK(header.rfind("t_s,x_m,y_m,z_m,xd_m", 0) == 0);
  REQUIRE(!rows.empty());
  for (const auto& row : rows) REQUIRE(row.size() == 14);

  // reruns are byte-identical
  const auto first = slurp(out / "quad_1_recovery.csv");
  REQUIRE(run_cli("recover --scenario " + spath.string() + " --out " + out.string()) == 0);
  CHECK(slurp(out / "quad_1_recovery.csv") == first);
}

TEST_CASE("cli: unsafe lower bound exits 4") {
  auto j = json::parse(slurp(kRepoDir + "/scenarios/single_cylinder.json"));
  j["vehicle"] = {{"rotor_speed_max_rad_per_s", 600.0}};  // below hover demand
  const auto spath = scratch_dir() / "hopeless.json";
  std::ofstream(spath) << j.dump(2);
  CHECK(run_cli("recover --scenario " + spath.string() + " --out " +
                (scratch_dir() / "cli_x").string()) == 4);
}
