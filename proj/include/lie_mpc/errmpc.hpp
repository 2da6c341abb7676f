#pragma once

/**
 * Convex error-state MPC on SE(3).
 *
 * State x = [psi; xi] with psi = log(X_d^{-1} X) the left-invariant tracking
 * error and xi the body twist (Lie ordering). Around the reference twist
 * xi_d the error and the hydrodynamics are linearised as
 *
 *   psi' = -ad_{xi_d} psi + xi - xi_d
 *   M xi' = H xi + b + T u
 *
 * and the cost penalises y = [psi; psi'] = G x - d. Each control tick builds
 * one stage per reference sample, discretises with A_k = I + A dt,
 * B_k = B dt, h_k = h dt and solves the resulting LQ problem.
 */

#include <Eigen/Dense>

#include <chrono>
#include <optional>
#include <span>
#include <vector>

#include "lie_mpc/common.hpp"
#include "lie_mpc/controller.hpp"
#include "lie_mpc/hydro.hpp"
#include "lie_mpc/lie.hpp"
#include "lie_mpc/qp.hpp"
#include "lie_mpc/reference.hpp"

namespace lie_mpc {

struct MpcWeights
{
  Mat12 P = Mat12::Zero();
  Mat12 Q = Mat12::Zero();
  MatX R;

  // diag(rotation error, position error, psi' rotational, psi' linear), P = terminal_scale Q.
  static MpcWeights from_diagonal(const Vec12& q_diag, double terminal_scale, const VecX& r_diag)
  {
    MpcWeights w;
    w.Q = q_diag.asDiagonal();
    w.P = terminal_scale * w.Q;
    w.R = r_diag.asDiagonal();
    return w;
  }

  static MpcWeights defaults(int inputs = 2)
  {
    Vec12 q;
    q << Vec3::Constant(10.0), Vec3::Constant(100.0), Vec3::Constant(1.0), Vec3::Constant(1.0);
    return from_diagonal(q, 30.0, VecX::Constant(inputs, 1e-2));
  }

  void validate() const
  {
    auto psd = [](const MatX& A, double min_eig) {
      if ((A - A.transpose()).norm() > 1e-12 * (1.0 + A.norm())) {
        return false;
      }
      return Eigen::SelfAdjointEigenSolver<MatX>(A).eigenvalues().minCoeff() >= min_eig;
    };
    if (!psd(P, -1e-12) || !psd(Q, -1e-12)) {
      throw ParameterError("MPC weights P and Q must be symmetric positive semidefinite");
    }
    if (R.rows() == 0 || !psd(R, 1e-300)) {
      throw ParameterError("MPC input weight R must be symmetric positive definite");
    }
  }
};

struct HorizonConfig
{
  int steps = 100;
  double dt = 0.05;

  void validate() const
  {
    if (steps < 1 || !(dt > 0.0)) {
      throw ParameterError("horizon needs steps >= 1 and dt > 0");
    }
  }
};

struct LinearizedDynamics
{
  Mat6 H;  // M xi' ~= H xi + b + tau
  Vec6 b;
};

// Model quantities reused by every stage.
struct LieModel
{
  explicit LieModel(const VesselParams& vessel)
      : params(vessel),
        mass_lie(reorder_matrix(assemble_mass(vessel))),
        mass_lie_inv(mass_lie.inverse()),
        thrust(thrust_matrix_lie(vessel)),
        input_matrix(mass_lie_inv * thrust)
  {
  }

  // C(xi) and D(xi) in Lie ordering.
  Mat6 coriolis(const Twist& xi) const { return reorder_matrix(vessel_coriolis(params, lie_to_fossen(xi))); }
  Mat6 damping(const Twist& xi) const { return reorder_matrix(lie_mpc::damping(params, lie_to_fossen(xi))); }

  // Right-hand side of M xi' = -C(xi) xi - D(xi) xi + tau (no restoring, no current).
  Vec6 acceleration(const Twist& xi, const Vec6& tau) const
  {
    return mass_lie_inv * (tau - coriolis(xi) * xi - damping(xi) * xi);
  }

  VesselParams params;
  Mat6 mass_lie;
  Mat6 mass_lie_inv;
  Mat6x2 thrust;
  Mat6x2 input_matrix;  // M^{-1} T
};

inline LinearizedDynamics linearize_dynamics(const LieModel& model, const Twist& xi_bar)
{
  const Mat6 Jc = vessel_coriolis_jacobian(model.params, xi_bar);
  const Mat6 Jd = damping_jacobian(model.params, xi_bar);
  LinearizedDynamics lin;
  lin.H = -model.coriolis(xi_bar) - model.damping(xi_bar) - Jc - Jd;
  lin.b = (Jc + Jd) * xi_bar;
  return lin;
}

inline LinearizedDynamics linearize_dynamics(const VesselParams& params, const Twist& xi_bar)
{
  return linearize_dynamics(LieModel(params), xi_bar);
}

// Continuous (A_t, B_t, h_t) or discrete (A_k, B_k, h_k) stage; G, d are shared.
struct StageModel
{
  Mat12 A;
  Eigen::Matrix<double, 12, 2> B;
  Vec12 h;
  Mat12 G;
  Vec12 d;
};

inline Mat12 output_matrix(const Twist& xi_d)
{
  Mat12 G = Mat12::Zero();
  G.topLeftCorner<6, 6>().setIdentity();
  G.bottomLeftCorner<6, 6>() = -little_adjoint(xi_d);
  G.bottomRightCorner<6, 6>().setIdentity();
  return G;
}

inline Vec12 output_offset(const Twist& xi_d)
{
  Vec12 d = Vec12::Zero();
  d.tail<6>() = xi_d;
  return d;
}

inline StageModel build_continuous_stage(const LieModel& model, const Twist& xi_d)
{
  const LinearizedDynamics lin = linearize_dynamics(model, xi_d);
  StageModel s;
  s.A.setZero();
  s.A.topLeftCorner<6, 6>() = -little_adjoint(xi_d);
  s.A.topRightCorner<6, 6>().setIdentity();
  s.A.bottomRightCorner<6, 6>() = model.mass_lie_inv * lin.H;
  s.B.setZero();
  s.B.bottomRows<6>() = model.input_matrix;
  s.h << -xi_d, model.mass_lie_inv * lin.b;
  s.G = output_matrix(xi_d);
  s.d = output_offset(xi_d);
  return s;
}

inline StageModel discretize(const StageModel& continuous, double dt)
{
  StageModel s = continuous;
  s.A = Mat12::Identity() + continuous.A * dt;
  s.B = continuous.B * dt;
  s.h = continuous.h * dt;
  return s;
}

inline StageModel build_stage(const LieModel& model, const Twist& xi_d, double dt)
{
  return discretize(build_continuous_stage(model, xi_d), dt);
}

struct ErrorState
{
  Vec6 psi;
  Twist xi;

  Vec12 stacked() const
  {
    Vec12 x;
    x << psi, xi;
    return x;
  }
};

inline ErrorState compute_error_state(const Pose& X, const Twist& xi, const Pose& X_d)
{
  return {left_error(X_d, X).algebra, xi};
}

struct MpcDiagnostics
{
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  double qp_ms = 0.0;
  double solve_ms = 0.0;  // stage construction + QP
};

struct MpcStep
{
  Vec2 u0 = Vec2::Zero();
  std::vector<Vec12> predicted;  // x_1 .. x_N
  std::vector<Vec2> inputs;      // u_0 .. u_{N-1}
  MpcDiagnostics diagnostics;
};

struct ErrorStateMpcOptions
{
  bool box_constraints = false;
  AdmmSettings admm;
};

class ErrorStateMpc final : public Controller
{
public:
  using Options = ErrorStateMpcOptions;

  ErrorStateMpc(const VesselParams& params, MpcWeights weights, HorizonConfig horizon, Options options = {})
      : model_(params), weights_(std::move(weights)), horizon_(horizon), options_(options)
  {
    weights_.validate();
    horizon_.validate();
    if (weights_.R.rows() != 2) {
      throw ParameterError("MPC input weight must be 2x2 (two thrusters)");
    }
  }

  LqProblem build_problem(const Pose& X, const Twist& xi, std::span<const ReferenceSample> window) const
  {
    const int N = horizon_.steps;
    if (static_cast<int>(window.size()) < N) {
      throw InvalidArgument("ErrorStateMpc: reference window shorter than the horizon");
    }
    LqProblem qp;
    qp.Q = weights_.Q;
    qp.R = weights_.R;
    qp.P = weights_.P;
    qp.x0 = compute_error_state(X, xi, window[0].pose).stacked();
    qp.stages.resize(N);
    for (int k = 0; k < N; ++k) {
      const StageModel s = build_stage(model_, window[k].twist, horizon_.dt);
      qp.stages[k] = {s.A, s.B, s.h, s.G, s.d};
    }
    const Twist& xi_terminal = window[std::min<std::size_t>(N, window.size() - 1)].twist;
    qp.G_terminal = output_matrix(xi_terminal);
    qp.d_terminal = output_offset(xi_terminal);
    if (options_.box_constraints) {
      qp.u_min = VecX::Constant(2, model_.params.thrust_min);
      qp.u_max = VecX::Constant(2, model_.params.thrust_max);
    }
    return qp;
  }

  MpcStep solve_step(const Pose& X, const Twist& xi, std::span<const ReferenceSample> window) const
  {
    const auto start = std::chrono::steady_clock::now();
    const LqProblem qp = build_problem(X, xi, window);
    const QpSolution sol = options_.box_constraints ? admm_box_solve(qp, options_.admm) : riccati_solve(qp);
    MpcStep step;
    step.u0 = sol.inputs.front();
    step.inputs.reserve(sol.inputs.size());
    for (const auto& u : sol.inputs) {
      step.inputs.emplace_back(u);
    }
    step.predicted.reserve(sol.states.size() - 1);
    for (std::size_t k = 1; k < sol.states.size(); ++k) {
      step.predicted.emplace_back(sol.states[k]);
    }
    step.diagnostics.iterations = sol.iterations;
    step.diagnostics.primal_residual = sol.primal_residual;
    step.diagnostics.dual_residual = sol.dual_residual;
    step.diagnostics.objective = sol.objective;
    step.diagnostics.qp_ms = sol.solve_ms;
    step.diagnostics.solve_ms = detail::elapsed_ms(start);
    return step;
  }

  ControlOutput control(const FossenState& state, std::span<const ReferenceSample> window) override
  {
    const MpcStep step = solve_step(euler_to_pose(state.eta), fossen_to_lie(state.nu), window);
    return {step.u0, step.diagnostics.solve_ms, step.diagnostics.iterations, true};
  }

  int horizon() const override { return horizon_.steps; }

  const LieModel& model() const { return model_; }
  const MpcWeights& weights() const { return weights_; }
  const HorizonConfig& horizon_config() const { return horizon_; }

private:
  LieModel model_;
  MpcWeights weights_;
  HorizonConfig horizon_;
  Options options_;
};

}  // namespace lie_mpc
