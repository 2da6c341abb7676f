#pragma once

/**
 * Baseline nonlinear MPC in Euler coordinates, x = [eta; nu] (Fossen order):
 *
 *   eta_{k+1} = eta_k + J(eta_k) nu_k dt
 *   nu_{k+1}  = nu_k + M^{-1}(-C(nu_k) nu_k - D(nu_k) nu_k - g(eta_k) + T u_k) dt
 *
 * with cost sum z_k' Q z_k + u_k' R u_k + z_N' P z_N on z_k = x_{d,k} - x_k.
 * Solved by SQP with a Gauss-Newton Hessian: every iteration linearises the
 * rollout, solves the LQ subproblem with the Riccati solver and backtracks on
 * the true objective. The simple variant drops g(eta).
 */

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <span>
#include <vector>

#include "lie_mpc/common.hpp"
#include "lie_mpc/controller.hpp"
#include "lie_mpc/hydro.hpp"
#include "lie_mpc/lie.hpp"
#include "lie_mpc/qp.hpp"
#include "lie_mpc/reference.hpp"

namespace lie_mpc {

struct NlpConfig
{
  int max_iterations = 20;
  double tolerance = 1e-3;      // max |u step| (N) for convergence
  double backtracking = 0.5;
  double min_step = 1e-4;
  bool include_restoring = true;  // false: NMPC-simple
  bool warm_start = true;

  void validate() const
  {
    if (max_iterations < 1 || !(tolerance > 0.0) || !(backtracking > 0.0 && backtracking < 1.0) || !(min_step > 0.0 && min_step <= 1.0)) {
      throw ParameterError("NlpConfig: need iterations >= 1, tolerance > 0, backtracking in (0,1), min_step in (0,1]");
    }
  }
};

struct NlpWeights
{
  Mat12 Q = Mat12::Zero();
  Mat12 P = Mat12::Zero();
  Eigen::Matrix2d R = Eigen::Matrix2d::Identity();

  // diag over [eta; nu] (Fossen order), P = terminal_scale Q.
  static NlpWeights from_diagonal(const Vec12& q_diag, double terminal_scale, const Vec2& r_diag)
  {
    NlpWeights w;
    w.Q = q_diag.asDiagonal();
    w.P = terminal_scale * w.Q;
    w.R = r_diag.asDiagonal();
    return w;
  }

  static NlpWeights defaults()
  {
    Vec12 q;
    q << 100.0, 100.0, 100.0, 10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0;
    return from_diagonal(q, 10.0, Vec2::Constant(1e-3));
  }

  void validate() const
  {
    if ((Q - Q.transpose()).norm() > 0.0 || (P - P.transpose()).norm() > 0.0 || (R - R.transpose()).norm() > 0.0) {
      throw ParameterError("NlpWeights must be symmetric");
    }
    if (Eigen::SelfAdjointEigenSolver<Mat12>(Q).eigenvalues().minCoeff() < 0.0 ||
        Eigen::SelfAdjointEigenSolver<Mat12>(P).eigenvalues().minCoeff() < 0.0 ||
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(R).eigenvalues().minCoeff() <= 0.0) {
      throw ParameterError("NlpWeights: Q, P must be PSD and R PD");
    }
  }
};

// Discrete model shared by the rollout and its linearisation.
class EulerModel
{
public:
  EulerModel(const VesselParams& params, double dt, bool include_restoring)
      : params_(params),
        mass_inv_(assemble_mass(params).inverse()),
        thrust_(thrust_matrix_fossen(params)),
        dt_(dt),
        include_restoring_(include_restoring)
  {
    if (!(dt > 0.0)) {
      throw ParameterError("EulerModel: dt must be positive");
    }
  }

  Vec12 step(const Vec12& x, const Vec2& u) const
  {
    const Vec6 eta = x.head<6>();
    const Vec6 nu = x.tail<6>();
    Vec6 f = thrust_ * u - vessel_coriolis(params_, nu) * nu - damping(params_, nu) * nu;
    if (include_restoring_) {
      f -= restoring(params_, eta);
    }
    Vec12 out;
    out << eta + kinematics_matrix(eta) * nu * dt_, nu + mass_inv_ * f * dt_;
    return out;
  }

  // Jacobians of step() at (x, u).
  void linearize(const Vec12& x, Mat12& A, Eigen::Matrix<double, 12, 2>& B) const
  {
    const Vec6 eta = x.head<6>();
    const Vec6 nu = x.tail<6>();
    const Mat6 J = kinematics_matrix(eta);

    // d(J(eta) nu)/d eta: only the Euler angles enter, central differences.
    Mat6 dJnu = Mat6::Zero();
    constexpr double h = 1e-6;
    for (int j = 3; j < 6; ++j) {
      Vec6 ep = eta, em = eta;
      ep(j) += h;
      em(j) -= h;
      dJnu.col(j) = (kinematics_matrix(ep) * nu - kinematics_matrix(em) * nu) / (2.0 * h);
    }

    const Twist xi = fossen_to_lie(nu);
    const Mat6 dforce = vessel_coriolis(params_, nu) + damping(params_, nu) +
                        reorder_matrix(vessel_coriolis_jacobian(params_, xi) + damping_jacobian(params_, xi));
    A.setZero();
    A.topLeftCorner<6, 6>() = Mat6::Identity() + dJnu * dt_;
    A.topRightCorner<6, 6>() = J * dt_;
    A.bottomRightCorner<6, 6>() = Mat6::Identity() - mass_inv_ * dforce * dt_;
    if (include_restoring_) {
      Mat6 dg;
      for (int j = 0; j < 6; ++j) {
        dg.col(j) = restoring(params_, Vec6::Unit(j));
      }
      A.bottomLeftCorner<6, 6>() = -mass_inv_ * dg * dt_;
    }
    B.setZero();
    B.bottomRows<6>() = mass_inv_ * thrust_ * dt_;
  }

  double dt() const { return dt_; }
  bool include_restoring() const { return include_restoring_; }

private:
  VesselParams params_;
  Mat6 mass_inv_;
  Mat6x2 thrust_;
  double dt_;
  bool include_restoring_;
};

// x_0 .. x_N of the discrete model.
inline std::vector<Vec12> rollout_nonlinear(const EulerModel& model, const Vec6& eta0, const Vec6& nu0, const std::vector<Vec2>& inputs)
{
  std::vector<Vec12> xs;
  xs.reserve(inputs.size() + 1);
  Vec12 x;
  x << eta0, nu0;
  xs.push_back(x);
  for (const auto& u : inputs) {
    xs.push_back(model.step(xs.back(), u));
  }
  return xs;
}

inline std::vector<Vec12> rollout_nonlinear(const VesselParams& params, double dt, bool include_restoring, const Vec6& eta0, const Vec6& nu0,
                                            const std::vector<Vec2>& inputs)
{
  return rollout_nonlinear(EulerModel(params, dt, include_restoring), eta0, nu0, inputs);
}

struct SqpDiagnostics
{
  int iterations = 0;
  bool converged = false;
  std::vector<double> objectives;  // after each accepted iterate, starting with the initial guess
  double last_step = 0.0;
  double solve_ms = 0.0;
};

struct SqpResult
{
  std::vector<Vec2> inputs;
  std::vector<Vec12> states;
  SqpDiagnostics diagnostics;
};

class SqpController final : public Controller
{
public:
  SqpController(const VesselParams& params, NlpWeights weights, int horizon, double dt, NlpConfig config = {})
      : model_(params, dt, config.include_restoring), weights_(std::move(weights)), horizon_(horizon), config_(config)
  {
    weights_.validate();
    config_.validate();
    if (horizon < 1) {
      throw ParameterError("SqpController: horizon must be >= 1");
    }
  }

  // Desired states x_{d,0..N}; yaw follows the window's unwrapped yaw.
  std::vector<Vec12> desired_states(std::span<const ReferenceSample> window) const
  {
    std::vector<Vec12> xd(horizon_ + 1);
    for (int k = 0; k <= horizon_; ++k) {
      const ReferenceSample& s = window[std::min<std::size_t>(k, window.size() - 1)];
      xd[k] << s.eta, lie_to_fossen(s.twist);
    }
    return xd;
  }

  double objective(const std::vector<Vec12>& xs, const std::vector<Vec2>& us, const std::vector<Vec12>& xd) const
  {
    double J = 0.0;
    for (int k = 0; k < horizon_; ++k) {
      const Vec12 z = xd[k] - xs[k];
      J += z.dot(weights_.Q * z) + us[k].dot(weights_.R * us[k]);
    }
    const Vec12 z = xd[horizon_] - xs[horizon_];
    return J + z.dot(weights_.P * z);
  }

  SqpResult solve(const Vec6& eta, const Vec6& nu, std::span<const ReferenceSample> window, std::vector<Vec2> guess) const
  {
    const auto start = std::chrono::steady_clock::now();
    if (static_cast<int>(window.size()) < horizon_) {
      throw InvalidArgument("SqpController: reference window shorter than the horizon");
    }
    const auto xd = desired_states(window);
    Vec6 eta0 = eta;
    eta0(5) = xd[0](5) + wrap_angle(eta(5) - xd[0](5));
    guess.resize(horizon_, guess.empty() ? Vec2::Zero() : guess.back());

    SqpResult res;
    res.inputs = std::move(guess);
    res.states = rollout_nonlinear(model_, eta0, nu, res.inputs);
    double J = objective(res.states, res.inputs, xd);
    res.diagnostics.objectives.push_back(J);

    LqProblem qp;
    qp.stages.resize(horizon_);
    qp.Q = weights_.Q;
    qp.R = weights_.R;
    qp.P = weights_.P;
    qp.G_terminal = -Mat12::Identity();
    qp.d_terminal = -xd[horizon_];
    Vec12 x0;
    x0 << eta0, nu;
    qp.x0 = x0;

    for (int it = 0; it < config_.max_iterations; ++it) {
      for (int k = 0; k < horizon_; ++k) {
        Mat12 A;
        Eigen::Matrix<double, 12, 2> B;
        model_.linearize(res.states[k], A, B);
        LqStage& s = qp.stages[k];
        s.A = A;
        s.B = B;
        s.h = res.states[k + 1] - A * res.states[k] - B * res.inputs[k];
        s.G = -Mat12::Identity();
        s.d = -xd[k];
      }
      const QpSolution sub = riccati_solve(qp);
      ++res.diagnostics.iterations;

      double step_norm = 0.0;
      for (int k = 0; k < horizon_; ++k) {
        step_norm = std::max(step_norm, (Vec2(sub.inputs[k]) - res.inputs[k]).cwiseAbs().maxCoeff());
      }
      res.diagnostics.last_step = step_norm;
      if (step_norm <= config_.tolerance) {
        res.diagnostics.converged = true;
        break;
      }

      bool accepted = false;
      for (double alpha = 1.0; alpha >= config_.min_step; alpha *= config_.backtracking) {
        std::vector<Vec2> trial(horizon_);
        for (int k = 0; k < horizon_; ++k) {
          trial[k] = res.inputs[k] + alpha * (Vec2(sub.inputs[k]) - res.inputs[k]);
        }
        std::vector<Vec12> xs;
        try {
          xs = rollout_nonlinear(model_, eta0, nu, trial);
        } catch (const GimbalLockError&) {
          continue;
        }
        const double Jt = objective(xs, trial, xd);
        if (std::isfinite(Jt) && Jt < J) {
          res.inputs = std::move(trial);
          res.states = std::move(xs);
          J = Jt;
          res.diagnostics.objectives.push_back(J);
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        break;  // no descent along the Gauss-Newton direction: best iterate so far
      }
    }
    res.diagnostics.solve_ms = detail::elapsed_ms(start);
    return res;
  }

  ControlOutput control(const FossenState& state, std::span<const ReferenceSample> window) override
  {
    std::vector<Vec2> guess;
    if (config_.warm_start && !previous_.empty()) {
      guess.assign(previous_.begin() + 1, previous_.end());
    }
    SqpResult res = solve(state.eta, state.nu, window, std::move(guess));
    previous_ = res.inputs;
    last_ = res.diagnostics;
    return {res.inputs.front(), res.diagnostics.solve_ms, res.diagnostics.iterations, res.diagnostics.converged};
  }

  int horizon() const override { return horizon_; }
  void reset() override
  {
    previous_.clear();
    last_ = {};
  }

  const SqpDiagnostics& last_diagnostics() const { return last_; }
  const EulerModel& model() const { return model_; }

private:
  EulerModel model_;
  NlpWeights weights_;
  int horizon_;
  NlpConfig config_;
  std::vector<Vec2> previous_;
  SqpDiagnostics last_;
};

}  // namespace lie_mpc
