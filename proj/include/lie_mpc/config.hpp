#pragma once

/**
 * Experiment configuration (JSON) and controller construction.
 *
 * Every key is checked against the schema below; unknown keys are errors.
 * Physical quantities carry their SI unit in the key name.
 */

#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lie_mpc/common.hpp"
#include "lie_mpc/controller.hpp"
#include "lie_mpc/errmpc.hpp"
#include "lie_mpc/hydro.hpp"
#include "lie_mpc/nmpc.hpp"
#include "lie_mpc/reference.hpp"
#include "lie_mpc/sim.hpp"
#include "lie_mpc/vessel_file.hpp"

namespace lie_mpc {

using json = nlohmann::json;

struct ProposedConfig
{
  std::vector<double> q_diag{10, 10, 10, 100, 100, 100, 1, 1, 1, 1, 1, 1};
  double terminal_scale = 30.0;
  std::vector<double> r_diag{1e-2, 1e-2};
  bool box_constraints = false;
  double admm_tolerance = 1e-6;
  int admm_max_iterations = 4000;

  bool operator==(const ProposedConfig&) const = default;
};

struct NmpcConfig
{
  std::vector<double> q_diag{100, 100, 100, 10, 10, 10, 1, 1, 1, 1, 1, 1};
  double terminal_scale = 10.0;
  std::vector<double> r_diag{1e-3, 1e-3};
  int max_iterations = 20;
  double step_tolerance_N = 1e-3;
  double backtracking = 0.5;
  double min_step = 1e-4;

  bool operator==(const NmpcConfig&) const = default;
};

struct ControllerConfig
{
  ControllerKind kind = ControllerKind::Proposed;
  int horizon_steps = 100;
  double dt_s = 0.05;
  ProposedConfig proposed;
  NmpcConfig nmpc;

  bool operator==(const ControllerConfig&) const = default;
};

struct SweepBlock
{
  std::vector<double> current_speeds_mps{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> current_angles_rad;  // empty: angle_count evenly spaced
  int angle_count = 12;
  int episodes_per_cell = 1;
  std::vector<ControllerKind> controllers{ControllerKind::Proposed};

  bool operator==(const SweepBlock&) const = default;
};

struct ExperimentConfig
{
  std::string vessel_file = "otter.vessel";  // relative paths resolve against the config file
  std::string output_dir;                     // empty: CLI default
  ControllerConfig controller;
  EpisodeConfig episode;
  int episodes = 10;
  SweepBlock sweep;

  SweepConfig sweep_config() const
  {
    SweepConfig s;
    s.speeds = sweep.current_speeds_mps;
    s.angles = sweep.current_angles_rad;
    s.angle_count = sweep.angle_count;
    s.episodes_per_cell = sweep.episodes_per_cell;
    return s;
  }
};

inline bool operator==(const EpisodeConfig& a, const EpisodeConfig& b)
{
  return a.profile == b.profile && a.duration == b.duration && a.control_rate == b.control_rate && a.plant_rate == b.plant_rate &&
         a.init_radius == b.init_radius && a.heading_min == b.heading_min && a.heading_max == b.heading_max &&
         a.current_speed == b.current_speed && a.current_direction == b.current_direction && a.final_window == b.final_window &&
         a.seed == b.seed;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b)
{
  return a.vessel_file == b.vessel_file && a.output_dir == b.output_dir && a.controller == b.controller && a.episode == b.episode &&
         a.episodes == b.episodes && a.sweep == b.sweep;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed)
{
  if (!j.is_object()) {
    throw ConfigError(where + ": expected an object");
  }
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <class T>
void read(const json& j, const std::string& where, const char* key, T& out)
{
  if (!j.contains(key)) {
    return;
  }
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline json kinds_to_json(const std::vector<ControllerKind>& kinds)
{
  json out = json::array();
  for (auto k : kinds) {
    out.push_back(to_string(k));
  }
  return out;
}

}  // namespace detail

inline json to_json(const ExperimentConfig& c)
{
  const auto& pc = c.controller.proposed;
  const auto& nc = c.controller.nmpc;
  const auto& e = c.episode;
  return json{
      {"vessel_file", c.vessel_file},
      {"output_dir", c.output_dir},
      {"controller",
       {{"kind", to_string(c.controller.kind)},
        {"horizon_steps", c.controller.horizon_steps},
        {"dt_s", c.controller.dt_s},
        {"proposed",
         {{"q_diag", pc.q_diag},
          {"terminal_scale", pc.terminal_scale},
          {"r_diag", pc.r_diag},
          {"box_constraints", pc.box_constraints},
          {"admm_tolerance", pc.admm_tolerance},
          {"admm_max_iterations", pc.admm_max_iterations}}},
        {"nmpc",
         {{"q_diag", nc.q_diag},
          {"terminal_scale", nc.terminal_scale},
          {"r_diag", nc.r_diag},
          {"max_iterations", nc.max_iterations},
          {"step_tolerance_N", nc.step_tolerance_N},
          {"backtracking", nc.backtracking},
          {"min_step", nc.min_step}}}}},
      {"episode",
       {{"profile", to_string(e.profile)},
        {"duration_s", e.duration},
        {"control_rate_hz", e.control_rate},
        {"plant_rate_hz", e.plant_rate},
        {"init_radius_m", e.init_radius},
        {"heading_min_rad", e.heading_min},
        {"heading_max_rad", e.heading_max},
        {"current_speed_mps", e.current_speed},
        {"current_direction_rad", e.current_direction},
        {"final_window_s", e.final_window},
        {"seed", e.seed},
        {"episodes", c.episodes}}},
      {"sweep",
       {{"current_speeds_mps", c.sweep.current_speeds_mps},
        {"current_angles_rad", c.sweep.current_angles_rad},
        {"angle_count", c.sweep.angle_count},
        {"episodes_per_cell", c.sweep.episodes_per_cell},
        {"controllers", detail::kinds_to_json(c.sweep.controllers)}}},
  };
}

inline void validate(const ExperimentConfig& c)
{
  c.episode.validate();
  c.sweep_config().validate();
  if (c.episodes < 1) {
    throw ConfigError("episode.episodes must be >= 1");
  }
  if (c.controller.horizon_steps < 1 || !(c.controller.dt_s > 0.0)) {
    throw ConfigError("controller: need horizon_steps >= 1 and dt_s > 0");
  }
  if (std::abs(c.controller.dt_s - c.episode.control_dt()) > 1e-12) {
    throw ConfigError("controller.dt_s must equal 1 / episode.control_rate_hz");
  }
  auto check_weights = [](const std::string& where, const std::vector<double>& q, const std::vector<double>& r, double scale) {
    if (q.size() != 12 || r.size() != 2) {
      throw ConfigError(where + ": q_diag needs 12 entries and r_diag 2");
    }
    for (double v : q) {
      if (!(v >= 0.0)) throw ConfigError(where + ": q_diag entries must be >= 0");
    }
    for (double v : r) {
      if (!(v > 0.0)) throw ConfigError(where + ": r_diag entries must be > 0");
    }
    if (!(scale >= 0.0)) throw ConfigError(where + ": terminal_scale must be >= 0");
  };
  check_weights("controller.proposed", c.controller.proposed.q_diag, c.controller.proposed.r_diag, c.controller.proposed.terminal_scale);
  check_weights("controller.nmpc", c.controller.nmpc.q_diag, c.controller.nmpc.r_diag, c.controller.nmpc.terminal_scale);
  if (!(c.controller.proposed.admm_tolerance > 0.0) || c.controller.proposed.admm_max_iterations < 1) {
    throw ConfigError("controller.proposed: admm_tolerance > 0 and admm_max_iterations >= 1 required");
  }
  const auto& n = c.controller.nmpc;
  if (n.max_iterations < 1 || !(n.step_tolerance_N > 0.0) || !(n.backtracking > 0.0 && n.backtracking < 1.0) ||
      !(n.min_step > 0.0 && n.min_step <= 1.0)) {
    throw ConfigError("controller.nmpc: invalid SQP settings");
  }
  if (c.sweep.controllers.empty()) {
    throw ConfigError("sweep.controllers must not be empty");
  }
}

inline ExperimentConfig from_json(const json& j)
{
  using detail::check_keys;
  using detail::read;
  ExperimentConfig c;
  check_keys(j, "config", {"vessel_file", "output_dir", "controller", "episode", "sweep"});
  read(j, "config", "vessel_file", c.vessel_file);
  read(j, "config", "output_dir", c.output_dir);

  if (j.contains("controller")) {
    const json& cj = j.at("controller");
    check_keys(cj, "controller", {"kind", "horizon_steps", "dt_s", "proposed", "nmpc"});
    std::string kind = to_string(c.controller.kind);
    read(cj, "controller", "kind", kind);
    c.controller.kind = controller_from_string(kind);
    read(cj, "controller", "horizon_steps", c.controller.horizon_steps);
    read(cj, "controller", "dt_s", c.controller.dt_s);
    if (cj.contains("proposed")) {
      const json& pj = cj.at("proposed");
      const std::string w = "controller.proposed";
      check_keys(pj, w, {"q_diag", "terminal_scale", "r_diag", "box_constraints", "admm_tolerance", "admm_max_iterations"});
      auto& p = c.controller.proposed;
      read(pj, w, "q_diag", p.q_diag);
      read(pj, w, "terminal_scale", p.terminal_scale);
      read(pj, w, "r_diag", p.r_diag);
      read(pj, w, "box_constraints", p.box_constraints);
      read(pj, w, "admm_tolerance", p.admm_tolerance);
      read(pj, w, "admm_max_iterations", p.admm_max_iterations);
    }
    if (cj.contains("nmpc")) {
      const json& nj = cj.at("nmpc");
      const std::string w = "controller.nmpc";
      check_keys(nj, w, {"q_diag", "terminal_scale", "r_diag", "max_iterations", "step_tolerance_N", "backtracking", "min_step"});
      auto& n = c.controller.nmpc;
      read(nj, w, "q_diag", n.q_diag);
      read(nj, w, "terminal_scale", n.terminal_scale);
      read(nj, w, "r_diag", n.r_diag);
      read(nj, w, "max_iterations", n.max_iterations);
      read(nj, w, "step_tolerance_N", n.step_tolerance_N);
      read(nj, w, "backtracking", n.backtracking);
      read(nj, w, "min_step", n.min_step);
    }
  }

  if (j.contains("episode")) {
    const json& ej = j.at("episode");
    const std::string w = "episode";
    check_keys(ej, w,
               {"profile", "duration_s", "control_rate_hz", "plant_rate_hz", "init_radius_m", "heading_min_rad", "heading_max_rad",
                "current_speed_mps", "current_direction_rad", "final_window_s", "seed", "episodes"});
    auto& e = c.episode;
    std::string profile = to_string(e.profile);
    read(ej, w, "profile", profile);
    e.profile = profile_from_string(profile);
    read(ej, w, "duration_s", e.duration);
    read(ej, w, "control_rate_hz", e.control_rate);
    read(ej, w, "plant_rate_hz", e.plant_rate);
    read(ej, w, "init_radius_m", e.init_radius);
    read(ej, w, "heading_min_rad", e.heading_min);
    read(ej, w, "heading_max_rad", e.heading_max);
    read(ej, w, "current_speed_mps", e.current_speed);
    read(ej, w, "current_direction_rad", e.current_direction);
    read(ej, w, "final_window_s", e.final_window);
    read(ej, w, "seed", e.seed);
    read(ej, w, "episodes", c.episodes);
  }

  if (j.contains("sweep")) {
    const json& sj = j.at("sweep");
    const std::string w = "sweep";
    check_keys(sj, w, {"current_speeds_mps", "current_angles_rad", "angle_count", "episodes_per_cell", "controllers"});
    read(sj, w, "current_speeds_mps", c.sweep.current_speeds_mps);
    read(sj, w, "current_angles_rad", c.sweep.current_angles_rad);
    read(sj, w, "angle_count", c.sweep.angle_count);
    read(sj, w, "episodes_per_cell", c.sweep.episodes_per_cell);
    if (sj.contains("controllers")) {
      std::vector<std::string> names;
      read(sj, w, "controllers", names);
      c.sweep.controllers.clear();
      for (const auto& n : names) {
        c.sweep.controllers.push_back(controller_from_string(n));
      }
    }
  }
  validate(c);
  return c;
}

inline ExperimentConfig parse_config(const std::string& text)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

// Loads a config file; vessel_file is resolved against the file's directory.
inline ExperimentConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = parse_config(ss.str());
  const std::filesystem::path vessel(c.vessel_file);
  if (vessel.is_relative()) {
    c.vessel_file = (std::filesystem::path(path).parent_path() / vessel).lexically_normal().string();
  }
  return c;
}

// ---------------------------------------------------------------------------
// controller construction

inline MpcWeights proposed_weights(const ProposedConfig& p)
{
  return MpcWeights::from_diagonal(Eigen::Map<const Vec12>(p.q_diag.data()), p.terminal_scale, Eigen::Map<const Vec2>(p.r_diag.data()));
}

inline NlpWeights nmpc_weights(const NmpcConfig& n)
{
  return NlpWeights::from_diagonal(Eigen::Map<const Vec12>(n.q_diag.data()), n.terminal_scale, Eigen::Map<const Vec2>(n.r_diag.data()));
}

inline std::unique_ptr<Controller> make_controller(ControllerKind kind, const ControllerConfig& c, const VesselParams& params)
{
  if (kind == ControllerKind::Proposed) {
    ErrorStateMpcOptions opts;
    opts.box_constraints = c.proposed.box_constraints;
    opts.admm.tolerance = c.proposed.admm_tolerance;
    opts.admm.max_iterations = c.proposed.admm_max_iterations;
    return std::make_unique<ErrorStateMpc>(params, proposed_weights(c.proposed), HorizonConfig{c.horizon_steps, c.dt_s}, opts);
  }
  NlpConfig nlp;
  nlp.max_iterations = c.nmpc.max_iterations;
  nlp.tolerance = c.nmpc.step_tolerance_N;
  nlp.backtracking = c.nmpc.backtracking;
  nlp.min_step = c.nmpc.min_step;
  nlp.include_restoring = kind == ControllerKind::Nmpc;
  return std::make_unique<SqpController>(params, nmpc_weights(c.nmpc), c.horizon_steps, c.dt_s, nlp);
}

inline ControllerFactory controller_factory(ControllerKind kind, const ControllerConfig& c, const VesselParams& params)
{
  return [kind, c, params] { return make_controller(kind, c, params); };
}

}  // namespace lie_mpc
