// lie_mpc: run Monte-Carlo batches, current sweeps and the property suites.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lie_mpc/config.hpp"
#include "lie_mpc/io.hpp"
#include "lie_mpc/sim.hpp"
#include "lie_mpc/validate.hpp"
#include "lie_mpc/vessel_file.hpp"

namespace fs = std::filesystem;
using namespace lie_mpc;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kEpisodeAbort = 3, kSolverFailure = 4 };

struct CommonFlags
{
  std::string config;
  std::string controller;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonFlags& f)
{
  cmd->add_option("--config", f.config, "experiment config (JSON)")->required();
  cmd->add_option("--controller", f.controller, "proposed | nmpc | nmpc-simple (overrides the config)");
  cmd->add_option("--seed", f.seed, "Monte-Carlo seed (overrides the config)");
  cmd->add_option("--out", f.out, "output directory (default: config output_dir, $LIE_MPC_OUT_DIR, ./results)");
  cmd->add_option("--jobs", f.jobs, "parallel episodes")->check(CLI::PositiveNumber);
}

struct Loaded
{
  ExperimentConfig config;
  VesselParams vessel;
  fs::path out;
};

Loaded load(const CommonFlags& f)
{
  Loaded l;
  l.config = load_config(f.config);
  if (!f.controller.empty()) {
    l.config.controller.kind = controller_from_string(f.controller);
    l.config.sweep.controllers = {l.config.controller.kind};
  }
  if (f.seed) {
    l.config.episode.seed = *f.seed;
  }
  try {
    l.vessel = load_vessel(l.config.vessel_file);
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (!f.out.empty()) {
    l.out = f.out;
  } else if (!l.config.output_dir.empty()) {
    l.out = l.config.output_dir;
  } else if (const char* env = std::getenv("LIE_MPC_OUT_DIR"); env && *env) {
    l.out = env;
  } else {
    l.out = "results";
  }
  fs::create_directories(l.out);
  return l;
}

void write_json(const fs::path& path, const nlohmann::json& j)
{
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  out << j.dump(2) << '\n';
}

int cmd_simulate(const CommonFlags& f)
{
  const Loaded l = load(f);
  const ControllerKind kind = l.config.controller.kind;
  const auto result =
      run_monte_carlo(l.config.episode, l.vessel, controller_factory(kind, l.config.controller, l.vessel), l.config.episodes, f.jobs);

  nlohmann::json episodes = nlohmann::json::array();
  for (std::size_t i = 0; i < result.episodes.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "episode_%03zu.csv", i);
    write_episode_csv((l.out / name).string(), result.episodes[i]);
    episodes.push_back(episode_summary(result.episodes[i], name));
  }
  write_json(l.out / "summary.json", {{"command", "simulate"},
                                      {"controller", to_string(kind)},
                                      {"config", to_json(l.config)},
                                      {"stats", stats_to_json(result.stats)},
                                      {"episodes", episodes}});

  std::printf("%s  %s  %d episodes  mean final error %.4f m  max %.4f m  mean solve %.3f ms\n", to_string(kind).c_str(),
              to_string(l.config.episode.profile).c_str(), l.config.episodes, result.stats.mean_final_error, result.stats.max_final_error,
              result.stats.mean_solve_ms);
  for (const auto& e : result.episodes) {
    if (e.aborted) {
      std::fprintf(stderr, "episode aborted: %s\n", e.abort_reason.c_str());
    }
  }
  std::printf("wrote %s\n", l.out.string().c_str());
  if (result.stats.solver_failures) return kSolverFailure;
  return result.stats.aborted ? kEpisodeAbort : kOk;
}

int cmd_sweep(const CommonFlags& f)
{
  const Loaded l = load(f);
  const SweepConfig sweep = l.config.sweep_config();
  std::ofstream csv(l.out / "sweep.csv");
  csv << sweep_csv_header() << '\n';
  nlohmann::json summary = {{"command", "sweep"}, {"config", to_json(l.config)}};
  nlohmann::json per_controller = nlohmann::json::object();
  int aborted = 0, solver_failures = 0;

  for (ControllerKind kind : l.config.sweep.controllers) {
    const auto r = run_current_sweep(l.config.episode, sweep, l.vessel, controller_factory(kind, l.config.controller, l.vessel), f.jobs);
    std::map<double, std::pair<double, int>> timing;  // speed -> (sum of cell means, cells)
    for (const auto& c : r.cells) {
      csv << to_string(kind) << ',' << c.speed << ',' << c.angle << ',' << c.stats.mean_final_error << ',' << c.stats.max_final_error << ','
          << c.stats.mean_solve_ms << '\n';
      timing[c.speed].first += c.stats.mean_solve_ms;
      timing[c.speed].second += 1;
      aborted += c.stats.aborted;
      solver_failures += c.stats.solver_failures;
    }
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t s = 0; s < r.speeds.size(); ++s) {
      const auto& t = timing[r.speeds[s]];
      rows.push_back({{"speed_mps", r.speeds[s]},
                      {"worst_mean_final_error_m", r.worst_final_error[s]},
                      {"worst_stderr_m", r.worst_stderr[s]},
                      {"mean_solve_ms", t.first / t.second}});
      std::printf("%-12s speed %.2f m/s  worst-angle final error %.4f m  mean solve %.3f ms\n", to_string(kind).c_str(), r.speeds[s],
                  r.worst_final_error[s], t.first / t.second);
    }
    per_controller[to_string(kind)] = rows;
  }
  summary["controllers"] = per_controller;
  summary["aborted_episodes"] = aborted;
  write_json(l.out / "sweep_summary.json", summary);
  std::printf("wrote %s\n", l.out.string().c_str());
  if (solver_failures) return kSolverFailure;
  return aborted ? kEpisodeAbort : kOk;
}

int cmd_validate(const std::string& vessel_path, std::uint64_t seed, int samples)
{
  VesselParams vessel;
  try {
    vessel = load_vessel(vessel_path);
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  ValidationOptions opt;
  opt.seed = seed;
  opt.samples = samples;
  const ValidationReport report = run_validation(vessel, opt);
  for (const auto& c : report.checks) {
    std::printf("%s  %-10s %-55s value %.3e  limit %.1e  seed %llu\n", c.passed ? "PASS" : "FAIL", c.suite.c_str(), c.name.c_str(), c.value,
                c.limit, static_cast<unsigned long long>(c.seed));
  }
  std::printf("%s\n", report.passed() ? "all suites passed" : "validation FAILED");
  return report.passed() ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Error-state MPC on SE(3) for marine vehicles: experiments and property suites"};
  app.require_subcommand(1);

  CommonFlags sim_flags, sweep_flags;
  auto* simulate = app.add_subcommand("simulate", "run one Monte-Carlo batch; writes per-episode CSVs and summary.json");
  add_common(simulate, sim_flags);
  auto* sweep = app.add_subcommand("sweep", "current speed x direction sweep; writes sweep.csv and sweep_summary.json");
  add_common(sweep, sweep_flags);

  std::string vessel = "config/otter.vessel";
  std::uint64_t seed = 7;
  int samples = 100;
  auto* validate = app.add_subcommand("validate", "run the property suites");
  validate->add_option("--vessel", vessel, "vessel parameter file")->check(CLI::ExistingFile);
  validate->add_option("--seed", seed, "seed for the randomised checks");
  validate->add_option("--samples", samples, "random samples per check")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return cmd_simulate(sim_flags);
    if (*sweep) return cmd_sweep(sweep_flags);
    if (*validate) return cmd_validate(vessel, seed, samples);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kSolverFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kOk;
}
