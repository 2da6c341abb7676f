#pragma once

/**
 * Closed-loop simulation: RK4 plant at the plant rate, controller at the
 * control rate with zero-order hold in between, episode metrics, seeded
 * Monte-Carlo batches and current sweeps.
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "lie_mpc/common.hpp"
#include "lie_mpc/controller.hpp"
#include "lie_mpc/hydro.hpp"
#include "lie_mpc/lie.hpp"
#include "lie_mpc/reference.hpp"

namespace lie_mpc {

// ---------------------------------------------------------------------------
// plant

struct Plant
{
  explicit Plant(VesselParams vessel)
      : params(std::move(vessel)), mass(assemble_mass(params)), mass_inv(mass.inverse()), thrust(thrust_matrix_fossen(params))
  {
  }

  VesselParams params;
  Mat6 mass;
  Mat6 mass_inv;
  Mat6x2 thrust;
};

/**
 * One classical RK4 step. The step is taken in (eta, nu_r) coordinates, where
 * nu_r' does not depend on the current, and mapped back to nu = nu_r + nu_c.
 */
inline FossenState rk4_step(const Plant& plant, const FossenState& state, const CurrentField& current, const Vec6& tau, double h)
{
  struct Rel
  {
    Vec6 eta;
    Vec6 nu_r;
  };
  auto f = [&](const Rel& z) {
    const Vec6 nu_c = current.body(z.eta);
    const Vec6 force = tau - vessel_coriolis(plant.params, z.nu_r) * z.nu_r - damping(plant.params, z.nu_r) * z.nu_r -
                       restoring(plant.params, z.eta);
    return Rel{kinematics_matrix(z.eta) * (z.nu_r + nu_c), plant.mass_inv * force};
  };
  auto axpy = [](const Rel& z, double a, const Rel& dz) { return Rel{z.eta + a * dz.eta, z.nu_r + a * dz.nu_r}; };

  const Rel z0{state.eta, state.nu - current.body(state.eta)};
  const Rel k1 = f(z0);
  const Rel k2 = f(axpy(z0, 0.5 * h, k1));
  const Rel k3 = f(axpy(z0, 0.5 * h, k2));
  const Rel k4 = f(axpy(z0, h, k3));
  Rel z1;
  z1.eta = z0.eta + h / 6.0 * (k1.eta + 2.0 * k2.eta + 2.0 * k3.eta + k4.eta);
  z1.nu_r = z0.nu_r + h / 6.0 * (k1.nu_r + 2.0 * k2.nu_r + 2.0 * k3.nu_r + k4.nu_r);
  return {z1.eta, z1.nu_r + current.body(z1.eta)};
}

inline FossenState rk4_step(const VesselParams& params, const FossenState& state, const CurrentField& current, const Vec6& tau, double h)
{
  return rk4_step(Plant(params), state, current, tau, h);
}

// ---------------------------------------------------------------------------
// episodes

struct InitialCondition
{
  Vec2 offset = Vec2::Zero();  // m, NED x/y relative to the first reference pose
  double heading = 0.0;        // rad, absolute yaw
};

struct EpisodeConfig
{
  Profile profile = Profile::Turning;
  double duration = 60.0;      // s
  int control_rate = 20;       // Hz
  int plant_rate = 80;         // Hz
  double init_radius = 5.0;    // m
  double heading_min = -kPi;   // rad
  double heading_max = kPi;
  double current_speed = 0.0;      // m/s
  double current_direction = 0.0;  // rad, direction the current flows towards (NED)
  double final_window = 5.0;       // s, averaging window of the final error
  std::uint64_t seed = 1;

  double control_dt() const { return 1.0 / control_rate; }
  int plant_steps_per_tick() const { return plant_rate / control_rate; }

  void validate() const
  {
    if (control_rate <= 0 || plant_rate <= 0 || plant_rate % control_rate != 0) {
      throw ConfigError("plant rate must be a positive integer multiple of the control rate");
    }
    if (!(duration > 0.0) || !(init_radius >= 0.0) || !(heading_max >= heading_min) || !(current_speed >= 0.0)) {
      throw ConfigError("invalid episode parameters");
    }
  }
};

struct EpisodeResult
{
  std::vector<double> time;
  std::vector<Vec6> eta;
  std::vector<Vec6> nu;
  std::vector<Vec2> u;
  std::vector<double> position_error;  // m
  std::vector<double> heading_error;   // rad, wrapped
  std::vector<double> solve_ms;        // one per control tick
  double final_error = 0.0;            // mean position error over the final window
  bool aborted = false;
  bool solver_failure = false;  // abort caused by a SolverError
  std::string abort_reason;
  InitialCondition initial;
};

// Single source for the tracking metrics.
inline double position_error(const Vec6& eta, const ReferenceSample& ref) { return (eta.head<3>() - ref.pose.position()).norm(); }
inline double heading_error(const Vec6& eta, const ReferenceSample& ref) { return wrap_angle(eta(5) - ref.eta(5)); }

inline double mean_over_window(const std::vector<double>& t, const std::vector<double>& v, double t_from)
{
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= t_from - 1e-9) {
      sum += v[i];
      ++count;
    }
  }
  return count ? sum / count : 0.0;
}

inline double final_position_error(const EpisodeResult& r, double window)
{
  return r.time.empty() ? 0.0 : mean_over_window(r.time, r.position_error, r.time.back() - window);
}

// Mean |d r / dt| of the yaw rate over t >= t_from (finite differences at the control rate).
inline double yaw_rate_roughness(const EpisodeResult& r, double t_from)
{
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 1; i < r.time.size(); ++i) {
    if (r.time[i - 1] >= t_from - 1e-9) {
      sum += std::abs(r.nu[i](5) - r.nu[i - 1](5)) / (r.time[i] - r.time[i - 1]);
      ++count;
    }
  }
  return count ? sum / count : 0.0;
}

inline FossenState initial_state(const InitialCondition& ic, const ReferenceTrajectory& ref, const CurrentField& current)
{
  FossenState s;
  const Vec3 p0 = ref.samples.front().pose.position();
  s.eta << p0(0) + ic.offset(0), p0(1) + ic.offset(1), p0(2), 0.0, 0.0, ic.heading;
  s.nu = current.body(s.eta);  // at rest relative to the water
  return s;
}

inline EpisodeResult run_episode(const EpisodeConfig& config,
                                 const VesselParams& params,
                                 Controller& controller,
                                 const InitialCondition& ic,
                                 const ReferenceTrajectory* reference = nullptr)
{
  config.validate();
  const double dt = config.control_dt();
  std::optional<ReferenceTrajectory> own;
  if (!reference) {
    own = generate_reference(config.profile, config.duration, dt);
    reference = &*own;
  }
  const ReferenceTrajectory& ref = *reference;
  const Plant plant(params);
  const CurrentField current = CurrentField::from_speed_direction(config.current_speed, config.current_direction);
  const int ticks = static_cast<int>(std::llround(config.duration * config.control_rate));
  const int substeps = config.plant_steps_per_tick();
  const double h = 1.0 / config.plant_rate;
  const auto window_len = static_cast<std::size_t>(controller.horizon() + 1);

  EpisodeResult out;
  out.initial = ic;
  FossenState state = initial_state(ic, ref, current);
  controller.reset();

  auto record = [&](int k, const Vec2& u, double ms) {
    const ReferenceSample& r = ref.samples[std::min<std::size_t>(k, ref.samples.size() - 1)];
    out.time.push_back(k * dt);
    out.eta.push_back(state.eta);
    out.nu.push_back(state.nu);
    out.u.push_back(u);
    out.position_error.push_back(position_error(state.eta, r));
    out.heading_error.push_back(heading_error(state.eta, r));
    out.solve_ms.push_back(ms);
  };

  for (int k = 0; k < ticks; ++k) {
    ControlOutput cmd;
    try {
      const auto window = reference_window(ref, static_cast<std::size_t>(k), window_len);
      cmd = controller.control(state, window);
      if (!cmd.u.allFinite()) {
        throw std::runtime_error("controller returned non-finite input");
      }
    } catch (const std::exception& e) {
      out.aborted = true;
      out.solver_failure = dynamic_cast<const SolverError*>(&e) != nullptr;
      out.abort_reason = "t = " + std::to_string(k * dt) + " s: " + e.what();
      break;
    }
    const Vec2 applied = clamp_thrust(params, cmd.u).forces;
    record(k, applied, cmd.solve_ms);
    const Vec6 tau = plant.thrust * applied;
    try {
      for (int s = 0; s < substeps; ++s) {
        state = rk4_step(plant, state, current, tau, h);
      }
    } catch (const std::exception& e) {
      out.aborted = true;
      out.abort_reason = "t = " + std::to_string(k * dt) + " s: plant: " + e.what();
      break;
    }
  }
  if (!out.aborted) {
    record(ticks, Vec2::Zero(), 0.0);
    out.solve_ms.pop_back();  // no solve at the final sample
  }
  out.final_error = final_position_error(out, config.final_window);
  return out;
}

// ---------------------------------------------------------------------------
// batches

using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

inline std::vector<InitialCondition> draw_initial_conditions(const EpisodeConfig& config, int n)
{
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<InitialCondition> out(n);
  for (auto& ic : out) {
    const double r = config.init_radius * std::sqrt(unit(rng));
    const double a = 2.0 * kPi * unit(rng);
    ic.offset = Vec2(r * std::cos(a), r * std::sin(a));
    ic.heading = config.heading_min + (config.heading_max - config.heading_min) * unit(rng);
  }
  return out;
}

// Runs job(i) for i in [0, n) on up to `jobs` threads.
inline void parallel_for(int n, int jobs, const std::function<void(int)>& job)
{
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) {
      job(i);
    }
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        job(i);
      }
    });
  }
  for (auto& th : pool) {
    th.join();
  }
}

struct BatchStats
{
  double mean_final_error = 0.0;
  double max_final_error = 0.0;
  double stderr_final_error = 0.0;
  double mean_solve_ms = 0.0;
  double std_solve_ms = 0.0;
  double max_solve_ms = 0.0;
  int aborted = 0;
  int solver_failures = 0;
};

inline BatchStats summarize(const std::vector<EpisodeResult>& episodes)
{
  BatchStats s;
  if (episodes.empty()) {
    return s;
  }
  std::vector<double> finals;
  double sum_ms = 0.0, sum_ms2 = 0.0;
  std::size_t n_ms = 0;
  for (const auto& e : episodes) {
    finals.push_back(e.final_error);
    s.aborted += e.aborted ? 1 : 0;
    s.solver_failures += e.solver_failure ? 1 : 0;
    for (double ms : e.solve_ms) {
      sum_ms += ms;
      sum_ms2 += ms * ms;
      s.max_solve_ms = std::max(s.max_solve_ms, ms);
      ++n_ms;
    }
  }
  const double n = static_cast<double>(finals.size());
  s.mean_final_error = std::accumulate(finals.begin(), finals.end(), 0.0) / n;
  s.max_final_error = *std::max_element(finals.begin(), finals.end());
  if (finals.size() > 1) {
    double var = 0.0;
    for (double f : finals) {
      var += (f - s.mean_final_error) * (f - s.mean_final_error);
    }
    s.stderr_final_error = std::sqrt(var / (n - 1.0) / n);
  }
  if (n_ms) {
    s.mean_solve_ms = sum_ms / n_ms;
    s.std_solve_ms = std::sqrt(std::max(0.0, sum_ms2 / n_ms - s.mean_solve_ms * s.mean_solve_ms));
  }
  return s;
}

struct MonteCarloResult
{
  std::vector<EpisodeResult> episodes;  // ordered by episode index
  BatchStats stats;
};

inline MonteCarloResult run_monte_carlo(const EpisodeConfig& config,
                                        const VesselParams& params,
                                        const ControllerFactory& factory,
                                        int n = 10,
                                        int jobs = 1)
{
  config.validate();
  const auto ics = draw_initial_conditions(config, n);
  const ReferenceTrajectory ref = generate_reference(config.profile, config.duration, config.control_dt());
  MonteCarloResult out;
  out.episodes.resize(n);
  parallel_for(n, jobs, [&](int i) {
    auto controller = factory();
    out.episodes[i] = run_episode(config, params, *controller, ics[i], &ref);
  });
  out.stats = summarize(out.episodes);
  return out;
}

struct SweepConfig
{
  std::vector<double> speeds{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};  // m/s
  std::vector<double> angles;                                // rad; empty = angle_count evenly spaced
  int angle_count = 12;
  int episodes_per_cell = 1;

  std::vector<double> angle_grid() const
  {
    if (!angles.empty()) {
      return angles;
    }
    std::vector<double> out(angle_count);
    for (int i = 0; i < angle_count; ++i) {
      out[i] = 2.0 * kPi * i / angle_count;
    }
    return out;
  }

  void validate() const
  {
    if (speeds.empty()) {
      throw ConfigError("sweep needs at least one current speed");
    }
    if (angles.empty() && angle_count < 1) {
      throw ConfigError("sweep needs at least one current angle");
    }
    if (episodes_per_cell < 1) {
      throw ConfigError("sweep needs episodes_per_cell >= 1");
    }
  }
};

struct SweepCell
{
  double speed = 0.0;
  double angle = 0.0;
  BatchStats stats;
};

struct SweepResult
{
  std::vector<SweepCell> cells;  // speed-major
  // per speed: worst (over angles) mean final error, and that cell's standard error
  std::vector<double> speeds;
  std::vector<double> worst_final_error;
  std::vector<double> worst_stderr;
};

inline SweepResult run_current_sweep(const EpisodeConfig& base,
                                     const SweepConfig& sweep,
                                     const VesselParams& params,
                                     const ControllerFactory& factory,
                                     int jobs = 1)
{
  base.validate();
  sweep.validate();
  const auto angles = sweep.angle_grid();
  const auto ics = draw_initial_conditions(base, sweep.episodes_per_cell);
  const ReferenceTrajectory ref = generate_reference(base.profile, base.duration, base.control_dt());

  SweepResult out;
  const int per_cell = sweep.episodes_per_cell;
  const int n_cells = static_cast<int>(sweep.speeds.size() * angles.size());
  std::vector<EpisodeResult> episodes(static_cast<std::size_t>(n_cells) * per_cell);
  parallel_for(static_cast<int>(episodes.size()), jobs, [&](int i) {
    const int cell = i / per_cell;
    EpisodeConfig cfg = base;
    cfg.current_speed = sweep.speeds[cell / angles.size()];
    cfg.current_direction = angles[cell % angles.size()];
    auto controller = factory();
    episodes[i] = run_episode(cfg, params, *controller, ics[i % per_cell], &ref);
  });

  for (std::size_t s = 0; s < sweep.speeds.size(); ++s) {
    double worst = -1.0, worst_se = 0.0;
    for (std::size_t a = 0; a < angles.size(); ++a) {
      const std::size_t cell = s * angles.size() + a;
      std::vector<EpisodeResult> group(episodes.begin() + cell * per_cell, episodes.begin() + (cell + 1) * per_cell);
      SweepCell c{sweep.speeds[s], angles[a], summarize(group)};
      if (c.stats.mean_final_error > worst) {
        worst = c.stats.mean_final_error;
        worst_se = c.stats.stderr_final_error;
      }
      out.cells.push_back(c);
    }
    out.speeds.push_back(sweep.speeds[s]);
    out.worst_final_error.push_back(worst);
    out.worst_stderr.push_back(worst_se);
  }
  return out;
}

}  // namespace lie_mpc
