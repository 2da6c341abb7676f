#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "lie_mpc/config.hpp"
#include "lie_mpc/io.hpp"
#include "support.hpp"

using namespace lie_mpc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
  const fs::path d = fs::temp_directory_path() / ("lie_mpc_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

json short_config()
{
  return json{{"vessel_file", testing::source_path("config/otter.vessel")},
              {"episode", {{"profile", "turning"}, {"duration_s", 3}, {"episodes", 3}, {"seed", 5}}},
              {"sweep",
               {{"current_speeds_mps", {0.0, 0.5}},
                {"current_angles_rad", {0.0, 1.5}},
                {"controllers", {"proposed", "nmpc-simple"}}}}};
}

fs::path write_config(const fs::path& dir, const json& j, const std::string& name = "config.json")
{
  std::ofstream(dir / name) << j.dump(2);
  return dir / name;
}

int run_cli(const std::string& args)
{
  const std::string cmd = std::string(LIE_MPC_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const fs::path& p)
{
  std::ifstream in(p);
  return json::parse(in);
}

}  // namespace

TEST_CASE("config round trip")
{
  ExperimentConfig c;
  c.episode.profile = Profile::Zigzag;
  c.episode.seed = 12345678901ull;
  c.episode.current_speed = 0.25;
  c.controller.kind = ControllerKind::NmpcSimple;
  c.controller.nmpc.max_iterations = 7;
  c.controller.proposed.box_constraints = true;
  c.sweep.current_angles_rad = {0.1, 0.2};
  c.sweep.controllers = {ControllerKind::Nmpc, ControllerKind::Proposed};
  c.episodes = 4;
  CHECK(from_json(to_json(c)) == c);
  CHECK(parse_config(to_json(c).dump()) == c);
  CHECK(from_json(json::object()) == ExperimentConfig{});

  for (const char* name : {"turning.json", "zigzag.json", "timing.json", "current_sweep.json"}) {
    const ExperimentConfig shipped = load_config(testing::source_path(std::string("config/") + name));
    CHECK(fs::exists(shipped.vessel_file));
    CHECK(shipped.controller.dt_s == shipped.episode.control_dt());
  }
}

TEST_CASE("config errors")
{
  json j = short_config();
  j["episode"]["duraton_s"] = 10;
  CHECK_THROWS_AS(from_json(j), ConfigError);
  j = short_config();
  j["extra"] = 1;
  CHECK_THROWS_AS(from_json(j), ConfigError);
  j = short_config();
  j["sweep"]["current_speeds_mps"] = json::array();
  CHECK_THROWS_AS(from_json(j), ConfigError);
  j = short_config();
  j["episode"]["duration_s"] = "long";
  CHECK_THROWS_AS(from_json(j), ConfigError);
  j = short_config();
  j["episode"]["plant_rate_hz"] = 70;
  CHECK_THROWS_AS(from_json(j), ConfigError);
  j = short_config();
  j["controller"] = {{"dt_s", 0.1}};
  CHECK_THROWS_AS(from_json(j), ConfigError);
  j = short_config();
  j["controller"] = {{"proposed", {{"r_diag", {0.0, 1.0}}}}};
  CHECK_THROWS_AS(from_json(j), ConfigError);
  j = short_config();
  j["controller"] = {{"kind", "pid"}};
  CHECK_THROWS_AS(from_json(j), ConfigError);
  CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("episode CSV round trip")
{
  EpisodeConfig cfg;
  cfg.duration = 1.0;
  auto mpc = make_controller(ControllerKind::Proposed, ControllerConfig{}, testing::otter());
  const EpisodeResult r = run_episode(cfg, testing::otter(), *mpc, InitialCondition{Vec2(1.0, -2.0), 0.4});
  std::stringstream ss;
  write_episode_csv(ss, r);
  const CsvTable t = read_csv(ss);
  REQUIRE(t.rows.size() == r.time.size());
  CHECK(t.header.size() == 17);
  for (std::size_t i = 0; i < r.time.size(); ++i) {
    CHECK(t.rows[i][t.column("psi")] == r.eta[i](5));
    CHECK(t.rows[i][t.column("r")] == r.nu[i](5));
    CHECK(t.rows[i][t.column("pos_err")] == r.position_error[i]);
  }
  CHECK(std::isnan(t.rows.back()[t.column("solve_ms")]));
}

TEST_CASE("CLI simulate writes episodes and a consistent summary")
{
  const fs::path dir = scratch_dir("simulate");
  const fs::path cfg = write_config(dir, short_config());
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + (dir / "out").string()) == 0);

  const json summary = read_json(dir / "out" / "summary.json");
  CHECK(summary["controller"] == "proposed");
  REQUIRE(summary["episodes"].size() == 3);
  double sum_final = 0.0, sum_ms = 0.0;
  int n_ms = 0;
  for (int i = 0; i < 3; ++i) {
    const std::string name = summary["episodes"][i]["csv"];
    const CsvTable t = read_csv((dir / "out" / name).string());
    REQUIRE(t.rows.size() == 61);
    // final error: mean position error over the last 5 s
    double sum = 0.0;
    int count = 0;
    for (const auto& row : t.rows) {
      if (row[0] >= t.rows.back()[0] - 5.0 - 1e-9) {
        sum += row[t.column("pos_err")];
        ++count;
      }
      if (!std::isnan(row[t.column("solve_ms")])) {
        sum_ms += row[t.column("solve_ms")];
        ++n_ms;
      }
    }
    CHECK(summary["episodes"][i]["final_error_m"].get<double>() == Catch::Approx(sum / count).epsilon(1e-12));
    sum_final += sum / count;
  }
  CHECK(n_ms == 3 * 60);
  CHECK(summary["stats"]["mean_final_error_m"].get<double>() == Catch::Approx(sum_final / 3).epsilon(1e-12));
  CHECK(summary["stats"]["mean_solve_ms"].get<double>() == Catch::Approx(sum_ms / n_ms).epsilon(1e-9));
  CHECK(from_json(summary["config"]).episode.seed == 5);

  // same seed, same trajectories
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + (dir / "again").string()) == 0);
  const CsvTable a = read_csv((dir / "out" / "episode_002.csv").string());
  const CsvTable b = read_csv((dir / "again" / "episode_002.csv").string());
  for (std::size_t k = 0; k < a.rows.size(); ++k)
    for (int c = 0; c < a.column("solve_ms"); ++c) CHECK(a.rows[k][c] == b.rows[k][c]);

  // --seed overrides the config
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --seed 6 --out " + (dir / "seed6").string()) == 0);
  CHECK(read_json(dir / "seed6" / "summary.json")["episodes"][0]["initial_heading_rad"] !=
        summary["episodes"][0]["initial_heading_rad"]);
  fs::remove_all(dir);
}

TEST_CASE("CLI controller override and output directory precedence")
{
  const fs::path dir = scratch_dir("override");
  json j = short_config();
  j["episode"]["episodes"] = 1;
  j["episode"]["duration_s"] = 1;
  const fs::path cfg = write_config(dir, j);

  ::setenv("LIE_MPC_OUT_DIR", (dir / "env").c_str(), 1);
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --controller nmpc-simple") == 0);
  CHECK(read_json(dir / "env" / "summary.json")["controller"] == "nmpc-simple");

  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + (dir / "flag").string()) == 0);
  CHECK(fs::exists(dir / "flag" / "summary.json"));
  CHECK(read_json(dir / "env" / "summary.json")["controller"] == "nmpc-simple");

  j["output_dir"] = (dir / "from_config").string();
  const fs::path cfg2 = write_config(dir, j, "with_dir.json");
  REQUIRE(run_cli("simulate --config " + cfg2.string()) == 0);
  CHECK(fs::exists(dir / "from_config" / "summary.json"));
  ::unsetenv("LIE_MPC_OUT_DIR");
  fs::remove_all(dir);
}

TEST_CASE("CLI sweep writes one row per controller, speed and angle")
{
  const fs::path dir = scratch_dir("sweep");
  json j = short_config();
  j["episode"]["duration_s"] = 1;
  const fs::path cfg = write_config(dir, j);
  REQUIRE(run_cli("sweep --config " + cfg.string() + " --out " + dir.string()) == 0);

  std::ifstream in(dir / "sweep.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == sweep_csv_header());
  int rows = 0;
  for (std::string line; std::getline(in, line);) rows += line.empty() ? 0 : 1;
  CHECK(rows == 2 * 2 * 2);
  const json s = read_json(dir / "sweep_summary.json");
  CHECK(s["controllers"]["proposed"].size() == 2);
  CHECK(s["controllers"]["nmpc-simple"].size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("CLI exit codes")
{
  const fs::path dir = scratch_dir("exit");
  CHECK(run_cli("simulate --config " + (dir / "missing.json").string()) == 2);
  std::ofstream(dir / "bad.json") << "{\"episode\": {\"bogus\": 1}}";
  CHECK(run_cli("simulate --config " + (dir / "bad.json").string()) == 2);

  json j = short_config();
  j["vessel_file"] = (dir / "no.vessel").string();
  CHECK(run_cli("simulate --config " + write_config(dir, j, "novessel.json").string()) == 2);

  // ADMM capped at one iteration cannot converge
  j = short_config();
  j["episode"]["episodes"] = 1;
  j["controller"] = {{"proposed", {{"box_constraints", true}, {"admm_max_iterations", 1}}}};
  CHECK(run_cli("simulate --config " + write_config(dir, j, "admm.json").string() + " --out " + (dir / "o").string()) == 4);
  CHECK(read_json(dir / "o" / "summary.json")["stats"]["solver_failures"] == 1);

  CHECK(run_cli("validate --samples 5 --vessel " + testing::source_path("config/otter.vessel")) == 0);
  CHECK(run_cli("frobnicate") != 0);
  fs::remove_all(dir);
}
