#pragma once

/**
 * Randomised property suites behind `lie_mpc validate`: group axioms,
 * linearisation Jacobians against finite differences, solver equivalence and
 * energy dissipation. Every check reports the seed it ran with.
 */

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lie_mpc/common.hpp"
#include "lie_mpc/errmpc.hpp"
#include "lie_mpc/hydro.hpp"
#include "lie_mpc/lie.hpp"
#include "lie_mpc/qp.hpp"
#include "lie_mpc/sim.hpp"

namespace lie_mpc {

using CoriolisJacobianFn = std::function<Mat6(const VesselParams&, const Twist&)>;

struct ValidationOptions
{
  std::uint64_t seed = 7;
  int samples = 100;
  CoriolisJacobianFn coriolis_jacobian = vessel_coriolis_jacobian;  // replaceable for mutation tests
};

struct CheckResult
{
  std::string suite;
  std::string name;
  bool passed = false;
  double value = 0.0;  // worst observed metric
  double limit = 0.0;
  std::uint64_t seed = 0;
};

struct ValidationReport
{
  std::vector<CheckResult> checks;

  bool passed() const
  {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return !checks.empty();
  }

  bool suite_passed(const std::string& suite) const
  {
    for (const auto& c : checks) {
      if (c.suite == suite && !c.passed) return false;
    }
    return true;
  }
};

namespace detail {

struct Sampler
{
  explicit Sampler(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

  template <int N>
  Eigen::Matrix<double, N, 1> vec(double scale)
  {
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v(i) = uniform(-scale, scale);
    return v;
  }

  VecX vecx(int n, double scale)
  {
    VecX v(n);
    for (int i = 0; i < n; ++i) v(i) = uniform(-scale, scale);
    return v;
  }

  MatX matx(int r, int c, double scale)
  {
    MatX m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = uniform(-scale, scale);
    return m;
  }

  Pose pose(double angle = 2.5, double dist = 5.0)
  {
    Vec3 w = vec<3>(1.0);
    w = w.normalized() * uniform(0.0, angle);
    return Pose(exp_so3(w), vec<3>(dist));
  }

  std::mt19937_64 rng;
};

inline double rel_err(const MatX& a, const MatX& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

// Least-squares slope of log(err) against log(h).
inline double loglog_slope(const std::vector<double>& h, const std::vector<double>& err)
{
  const std::size_t n = h.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Condensed dense solve of an unconstrained LqProblem: x_k = S_k U + s_k.
inline std::vector<VecX> dense_lq_inputs(const LqProblem& p)
{
  const int N = p.horizon(), n = p.state_dim(), m = p.input_dim();
  MatX S = MatX::Zero(n, N * m);
  VecX s = p.x0;
  MatX H = MatX::Zero(N * m, N * m);
  VecX g = VecX::Zero(N * m);
  auto add_cost = [&](const MatX& G, const VecX& d, const MatX& W) {
    const MatX GS = G * S;
    const VecX r = G * s - d;
    H += GS.transpose() * W * GS;
    g += GS.transpose() * W * r;
  };
  for (int k = 0; k < N; ++k) {
    const LqStage& st = p.stages[k];
    add_cost(st.G, st.d, p.Q);
    H.block(k * m, k * m, m, m) += p.R;
    MatX S_next = st.A * S;
    S_next.middleCols(k * m, m) += st.B;
    s = st.A * s + st.h;
    S = S_next;
  }
  add_cost(p.G_terminal, p.d_terminal, p.P);
  const VecX U = H.ldlt().solve(-g);
  std::vector<VecX> u(N);
  for (int k = 0; k < N; ++k) u[k] = U.segment(k * m, m);
  return u;
}

inline LqProblem random_lq_problem(Sampler& rnd, int N, int n, int m)
{
  LqProblem p;
  p.stages.resize(N);
  for (auto& s : p.stages) {
    s.A = MatX::Identity(n, n) + rnd.matx(n, n, 0.15);
    s.B = rnd.matx(n, m, 0.5);
    s.h = rnd.vecx(n, 0.2);
    s.G = MatX::Identity(n, n) + rnd.matx(n, n, 0.1);
    s.d = rnd.vecx(n, 0.5);
  }
  const MatX LQ = rnd.matx(n, n, 1.0);
  p.Q = LQ * LQ.transpose() / n + 0.1 * MatX::Identity(n, n);
  p.P = 2.0 * p.Q;
  const MatX LR = rnd.matx(m, m, 1.0);
  p.R = LR * LR.transpose() + 0.5 * MatX::Identity(m, m);
  p.G_terminal = MatX::Identity(n, n);
  p.d_terminal = rnd.vecx(n, 0.5);
  p.x0 = rnd.vecx(n, 1.0);
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline void validate_geometry(const ValidationOptions& opt, ValidationReport& report)
{
  detail::Sampler rnd(opt.seed);
  double round_trip = 0.0, homomorphism = 0.0, invariance = 0.0;
  for (int i = 0; i < opt.samples; ++i) {
    Twist xi = rnd.vec<6>(1.0);
    xi.head<3>() = xi.head<3>().normalized() * rnd.uniform(0.0, 3.0);
    round_trip = std::max(round_trip, (log_se3(exp_se3(xi)) - xi).norm());
    const Pose X = rnd.pose(), Y = rnd.pose(), Z = rnd.pose(), Xd = rnd.pose(1.2, 1.0);
    round_trip = std::max(round_trip, (exp_se3(log_se3(X)).matrix() - X.matrix()).norm());
    homomorphism = std::max(homomorphism, (adjoint(X * Y) - adjoint(X) * adjoint(Y)).norm());
    const Pose Xa = Xd * exp_se3(rnd.vec<6>(0.5));
    invariance = std::max(invariance, (left_error(Z * Xd, Z * Xa).algebra - left_error(Xd, Xa).algebra).norm());
  }
  report.checks.push_back({"geometry", "exp/log round trip", round_trip <= 1e-8, round_trip, 1e-8, opt.seed});
  report.checks.push_back({"geometry", "adjoint homomorphism", homomorphism <= 1e-9, homomorphism, 1e-9, opt.seed});
  report.checks.push_back({"geometry", "left-invariance of the tracking error", invariance <= 1e-9, invariance, 1e-9, opt.seed});

  // Ad(exp(t xi)) = I + t ad(xi) + O(t^2)
  const Twist xi = rnd.vec<6>(1.0);
  std::vector<double> ts, errs;
  for (double t = 1e-1; t > 1e-4; t *= 0.5) {
    ts.push_back(t);
    errs.push_back((adjoint(exp_se3(t * xi)) - Mat6::Identity() - t * little_adjoint(xi)).norm());
  }
  const double slope = detail::loglog_slope(ts, errs);
  report.checks.push_back({"geometry", "Ad ~ I + ad remainder slope", std::abs(slope - 2.0) <= 0.2, slope, 2.0, opt.seed});
}

inline void validate_jacobians(const VesselParams& params, const ValidationOptions& opt, ValidationReport& report)
{
  detail::Sampler rnd(opt.seed + 1);
  const LieModel model(params);
  auto coriolis_map = [&](const Twist& xi, const Twist& xi_bar) { return Vec6(model.coriolis(xi) * xi_bar); };
  auto damping_map = [&](const Twist& xi, const Twist& xi_bar) {
    const Vec6 q = fossen_to_lie(params.damping_quadratic);
    return Vec6(-(q.array() * xi.array().abs() * xi_bar.array()).matrix());
  };
  auto fd = [](const auto& f, const Twist& at, const Twist& xi_bar) {
    Mat6 J;
    for (int j = 0; j < 6; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(at(j)));
      J.col(j) = (f(at + h * Vec6::Unit(j), xi_bar) - f(at - h * Vec6::Unit(j), xi_bar)) / (2.0 * h);
    }
    return J;
  };
  double cor = 0.0, dmp = 0.0;
  for (int i = 0; i < opt.samples; ++i) {
    Twist xi_bar = rnd.vec<6>(1.0);
    for (int j = 0; j < 6; ++j) {
      if (std::abs(xi_bar(j)) < 0.05) xi_bar(j) += 0.1;  // keep |.| differentiable
    }
    cor = std::max(cor, detail::rel_err(opt.coriolis_jacobian(params, xi_bar), fd(coriolis_map, xi_bar, xi_bar)));
    dmp = std::max(dmp, detail::rel_err(damping_jacobian(params, xi_bar), fd(damping_map, xi_bar, xi_bar)));
  }
  report.checks.push_back({"jacobians", "Coriolis Jacobian vs central differences", cor <= 1e-6, cor, 1e-6, opt.seed + 1});
  report.checks.push_back({"jacobians", "damping Jacobian vs central differences", dmp <= 1e-6, dmp, 1e-6, opt.seed + 1});

  // H xi + b is the first-order model of -C(xi) xi - D(xi) xi around xi_bar.
  Twist xi_bar = rnd.vec<6>(1.0);
  for (int j = 0; j < 6; ++j) {
    if (std::abs(xi_bar(j)) < 0.05) xi_bar(j) += 0.1;
  }
  const Mat6 Jc = opt.coriolis_jacobian(params, xi_bar);
  const Mat6 Jd = damping_jacobian(params, xi_bar);
  const Mat6 H = -model.coriolis(xi_bar) - model.damping(xi_bar) - Jc - Jd;
  const Vec6 b = (Jc + Jd) * xi_bar;
  const Twist dir = rnd.vec<6>(1.0).normalized();
  std::vector<double> hs, errs;
  for (double h = 1e-2; h > 1e-5; h *= 0.5) {
    const Twist xi = xi_bar + h * dir;
    hs.push_back(h);
    errs.push_back((-model.coriolis(xi) * xi - model.damping(xi) * xi - (H * xi + b)).norm());
  }
  const double slope = detail::loglog_slope(hs, errs);
  report.checks.push_back({"jacobians", "linearisation remainder slope", std::abs(slope - 2.0) <= 0.2, slope, 2.0, opt.seed + 1});
}

inline void validate_solvers(const ValidationOptions& opt, ValidationReport& report)
{
  detail::Sampler rnd(opt.seed + 2);
  double dense = 0.0, admm = 0.0, kkt = 0.0;
  AdmmSettings settings;
  settings.tolerance = 1e-7;
  settings.max_iterations = 20000;
  for (int i = 0; i < opt.samples; ++i) {
    const int N = 1 + static_cast<int>(rnd.uniform(0.0, 20.0));
    const LqProblem p = detail::random_lq_problem(rnd, N, 12, 2);
    const QpSolution r = riccati_solve(p);
    const auto u = detail::dense_lq_inputs(p);
    const double Jd = evaluate_objective(p, u, rollout(p, u));
    dense = std::max(dense, std::abs(r.objective - Jd) / std::max(1.0, std::abs(Jd)));
    const auto res = kkt_residual(p, r);
    kkt = std::max({kkt, res.stationarity, res.primal, res.complementarity});
    if (i % 10 == 0) {
      const QpSolution a = admm_box_solve(p, settings);
      admm = std::max(admm, std::abs(a.objective - r.objective) / std::max(1.0, std::abs(r.objective)));
    }
  }
  report.checks.push_back({"solvers", "Riccati vs dense solve (relative objective)", dense <= 1e-6, dense, 1e-6, opt.seed + 2});
  report.checks.push_back({"solvers", "ADMM (no bounds) vs Riccati (relative objective)", admm <= 1e-5, admm, 1e-5, opt.seed + 2});
  report.checks.push_back({"solvers", "KKT residuals of Riccati solutions", kkt <= 1e-8, kkt, 1e-8, opt.seed + 2});
}

inline void validate_energy(const VesselParams& params, const ValidationOptions& opt, ValidationReport& report)
{
  detail::Sampler rnd(opt.seed + 3);
  VesselParams p = params;
  p.restoring.setZero();
  const Plant plant(p);
  double worst_increase = 0.0;
  for (int i = 0; i < 10; ++i) {
    FossenState s;
    s.eta = rnd.vec<6>(0.2);
    s.eta.head<3>() = rnd.vec<3>(5.0);
    s.nu = rnd.vec<6>(1.0);
    double E = kinetic_energy(plant.mass, s.nu);
    for (int k = 0; k < 800; ++k) {
      s = rk4_step(plant, s, CurrentField{}, Vec6::Zero(), 1.0 / 80.0);
      const double E1 = kinetic_energy(plant.mass, s.nu);
      worst_increase = std::max(worst_increase, E1 - E);
      E = E1;
    }
  }
  report.checks.push_back({"energy", "kinetic energy non-increasing (unforced, no restoring)", worst_increase <= 1e-12, worst_increase, 1e-12,
                           opt.seed + 3});
}

inline ValidationReport run_validation(const VesselParams& params, const ValidationOptions& opt = {})
{
  ValidationReport report;
  validate_geometry(opt, report);
  validate_jacobians(params, opt, report);
  validate_solvers(opt, report);
  validate_energy(params, opt, report);
  return report;
}

}  // namespace lie_mpc
