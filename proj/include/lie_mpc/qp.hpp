#pragma once

/**
 * Time-varying linear-quadratic tracking problems
 *
 *   min  sum_{k=0}^{N-1} ( y_k' Q y_k + u_k' R u_k ) + y_N' P y_N
 *   s.t. x_{k+1} = A_k x_k + B_k u_k + h_k,   x_0 given,
 *        y_k = G_k x_k - d_k,
 *        u_min <= u_k <= u_max   (optional)
 *
 * riccati_solve() handles the unconstrained problem exactly with an affine
 * Riccati recursion. admm_box_solve() handles input boxes by operator
 * splitting on u = z, z in box; every u-update is an LQ solve that reuses the
 * Riccati factorisation until the penalty changes. A converged ADMM iterate is
 * polished by re-solving with the detected active inputs pinned.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "lie_mpc/common.hpp"

namespace lie_mpc {

struct LqStage
{
  MatX A;
  MatX B;
  VecX h;
  MatX G;
  VecX d;
};

struct LqProblem
{
  std::vector<LqStage> stages;  // k = 0 .. N-1
  MatX Q;
  MatX R;
  MatX P;
  MatX G_terminal;
  VecX d_terminal;
  VecX x0;
  VecX u_min;  // empty = unbounded
  VecX u_max;

  int horizon() const { return static_cast<int>(stages.size()); }
  int state_dim() const { return static_cast<int>(x0.size()); }
  int input_dim() const { return stages.empty() ? 0 : static_cast<int>(stages.front().B.cols()); }
  bool has_box() const { return u_min.size() > 0 || u_max.size() > 0; }

  VecX lower() const
  {
    return u_min.size() ? u_min : VecX::Constant(input_dim(), -std::numeric_limits<double>::infinity());
  }
  VecX upper() const
  {
    return u_max.size() ? u_max : VecX::Constant(input_dim(), std::numeric_limits<double>::infinity());
  }
};

struct QpSolution
{
  std::vector<VecX> inputs;  // u_0 .. u_{N-1}
  std::vector<VecX> states;  // x_0 .. x_N
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  double solve_ms = 0.0;
  bool polished = false;
};

struct KktResidual
{
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
};

struct AdmmSettings
{
  double tolerance = 1e-6;
  int max_iterations = 4000;
  double relaxation = 1.6;
  double rho = 0.1;
  bool adaptive_rho = true;
  bool polish = true;
};

inline std::vector<VecX> rollout(const LqProblem& problem, const std::vector<VecX>& inputs)
{
  std::vector<VecX> x(problem.horizon() + 1);
  x[0] = problem.x0;
  for (int k = 0; k < problem.horizon(); ++k) {
    const LqStage& s = problem.stages[k];
    x[k + 1] = s.A * x[k] + s.B * inputs[k] + s.h;
  }
  return x;
}

inline double evaluate_objective(const LqProblem& problem, const std::vector<VecX>& inputs, const std::vector<VecX>& states)
{
  double J = 0.0;
  for (int k = 0; k < problem.horizon(); ++k) {
    const LqStage& s = problem.stages[k];
    const VecX y = s.G * states[k] - s.d;
    J += y.dot(problem.Q * y) + inputs[k].dot(problem.R * inputs[k]);
  }
  const VecX yN = problem.G_terminal * states.back() - problem.d_terminal;
  return J + yN.dot(problem.P * yN);
}

// Objective gradient w.r.t. each u_k along the dynamics (adjoint method).
inline std::vector<VecX> input_gradient(const LqProblem& problem, const std::vector<VecX>& inputs, const std::vector<VecX>& states)
{
  const int N = problem.horizon();
  std::vector<VecX> grad(N);
  VecX lambda = 2.0 * problem.G_terminal.transpose() * (problem.P * (problem.G_terminal * states[N] - problem.d_terminal));
  for (int k = N - 1; k >= 0; --k) {
    const LqStage& s = problem.stages[k];
    grad[k] = 2.0 * problem.R * inputs[k] + s.B.transpose() * lambda;
    lambda = 2.0 * s.G.transpose() * (problem.Q * (s.G * states[k] - s.d)) + s.A.transpose() * lambda;
  }
  return grad;
}

inline KktResidual kkt_residual(const LqProblem& problem, const QpSolution& sol)
{
  KktResidual res;
  const int N = problem.horizon();
  double primal2 = (sol.states[0] - problem.x0).squaredNorm();
  for (int k = 0; k < N; ++k) {
    const LqStage& s = problem.stages[k];
    primal2 += (sol.states[k + 1] - (s.A * sol.states[k] + s.B * sol.inputs[k] + s.h)).squaredNorm();
  }
  const VecX lo = problem.lower();
  const VecX hi = problem.upper();
  const auto grad = input_gradient(problem, sol.inputs, sol.states);
  double stat2 = 0.0, comp2 = 0.0;
  for (int k = 0; k < N; ++k) {
    const VecX& u = sol.inputs[k];
    const VecX& g = grad[k];
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double violation = std::max({lo(i) - u(i), u(i) - hi(i), 0.0});
      primal2 += violation * violation;
      const double projected = std::clamp(u(i) - g(i), lo(i), hi(i));
      stat2 += (u(i) - projected) * (u(i) - projected);
      // min(multiplier, slack) for each side of the box
      const double c = std::min(std::max(g(i), 0.0), u(i) - lo(i)) + std::min(std::max(-g(i), 0.0), hi(i) - u(i));
      comp2 += c * c;
    }
  }
  res.primal = std::sqrt(primal2);
  res.stationarity = std::sqrt(stat2);
  res.complementarity = std::sqrt(comp2);
  return res;
}

namespace detail {

// Per-stage quadratic data in the form
//   x' Qxx x + 2 qx' x + u' Ruu u + 2 ru' u,   x+ = A x + B u + h
struct RiccatiStage
{
  const MatX* A = nullptr;
  MatX B;
  VecX h;
  MatX Qxx;
  VecX qx;
  MatX Ruu;
  VecX ru;
};

struct RiccatiData
{
  std::vector<RiccatiStage> stages;
  MatX S_terminal;
  VecX s_terminal;
};

struct RiccatiFactor
{
  std::vector<MatX> K;
  std::vector<MatX> Hux;
  std::vector<Eigen::LLT<MatX>> Huu;
  std::vector<MatX> S;  // S_0 .. S_N
};

inline RiccatiData prepare(const LqProblem& problem)
{
  RiccatiData data;
  data.stages.resize(problem.horizon());
  for (int k = 0; k < problem.horizon(); ++k) {
    const LqStage& s = problem.stages[k];
    RiccatiStage& r = data.stages[k];
    r.A = &s.A;
    r.B = s.B;
    r.h = s.h;
    const MatX QG = problem.Q * s.G;
    r.Qxx = s.G.transpose() * QG;
    r.qx = -QG.transpose() * s.d;
    r.Ruu = problem.R;
    r.ru = VecX::Zero(problem.input_dim());
  }
  const MatX PG = problem.P * problem.G_terminal;
  data.S_terminal = problem.G_terminal.transpose() * PG;
  data.s_terminal = -PG.transpose() * problem.d_terminal;
  return data;
}

inline RiccatiFactor factor(const RiccatiData& data)
{
  const int N = static_cast<int>(data.stages.size());
  RiccatiFactor f;
  f.K.resize(N);
  f.Hux.resize(N);
  f.Huu.resize(N);
  f.S.resize(N + 1);
  f.S[N] = data.S_terminal;
  for (int k = N - 1; k >= 0; --k) {
    const RiccatiStage& st = data.stages[k];
    const MatX& A = *st.A;
    const MatX SA = f.S[k + 1] * A;
    if (st.B.cols() == 0) {
      f.K[k].resize(0, A.cols());
      f.Hux[k].resize(0, A.cols());
      f.S[k] = st.Qxx + A.transpose() * SA;
    } else {
      const MatX SB = f.S[k + 1] * st.B;
      MatX Huu = st.Ruu + st.B.transpose() * SB;
      f.Hux[k] = SB.transpose() * A;
      f.Huu[k].compute(Huu);
      if (f.Huu[k].info() != Eigen::Success) {
        throw ParameterError("riccati: input Hessian is not positive definite");
      }
      f.K[k] = -f.Huu[k].solve(f.Hux[k]);
      f.S[k] = st.Qxx + A.transpose() * SA + f.Hux[k].transpose() * f.K[k];
    }
    f.S[k] = 0.5 * (f.S[k] + f.S[k].transpose());
  }
  return f;
}

// Affine backward pass + forward rollout for the current linear terms.
inline void solve_affine(const RiccatiData& data, const RiccatiFactor& f, const VecX& x0,
                         std::vector<VecX>& inputs, std::vector<VecX>& states)
{
  const int N = static_cast<int>(data.stages.size());
  std::vector<VecX> kff(N);
  VecX s = data.s_terminal;
  for (int k = N - 1; k >= 0; --k) {
    const RiccatiStage& st = data.stages[k];
    const VecX v = f.S[k + 1] * st.h + s;
    if (st.B.cols() == 0) {
      kff[k].resize(0);
      s = st.qx + st.A->transpose() * v;
    } else {
      const VecX gu = st.ru + st.B.transpose() * v;
      kff[k] = -f.Huu[k].solve(gu);
      s = st.qx + st.A->transpose() * v + f.Hux[k].transpose() * kff[k];
    }
  }
  inputs.resize(N);
  states.resize(N + 1);
  states[0] = x0;
  for (int k = 0; k < N; ++k) {
    const RiccatiStage& st = data.stages[k];
    inputs[k] = f.K[k] * states[k] + kff[k];
    states[k + 1] = *st.A * states[k] + st.B * inputs[k] + st.h;
  }
}

inline double elapsed_ms(std::chrono::steady_clock::time_point start)
{
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

inline void finalize(const LqProblem& problem, QpSolution& sol)
{
  sol.objective = evaluate_objective(problem, sol.inputs, sol.states);
  const KktResidual kkt = kkt_residual(problem, sol);
  sol.primal_residual = kkt.primal;
  sol.dual_residual = kkt.stationarity;
}

// Riccati solve with some input components pinned: fixed(k)(i) = true pins
// u_k(i) to value(k)(i). Returns full-length inputs.
inline void solve_pinned(const LqProblem& problem, const std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>>& fixed,
                         const std::vector<VecX>& value, std::vector<VecX>& inputs, std::vector<VecX>& states)
{
  RiccatiData data = prepare(problem);
  const int m = problem.input_dim();
  std::vector<MatX> E(problem.horizon());
  std::vector<VecX> c(problem.horizon());
  for (int k = 0; k < problem.horizon(); ++k) {
    const int n_free = static_cast<int>(m - fixed[k].count());
    E[k] = MatX::Zero(m, n_free);
    c[k] = VecX::Zero(m);
    for (int i = 0, j = 0; i < m; ++i) {
      if (fixed[k](i)) {
        c[k](i) = value[k](i);
      } else {
        E[k](i, j++) = 1.0;
      }
    }
    RiccatiStage& st = data.stages[k];
    const MatX& B = problem.stages[k].B;
    st.h = problem.stages[k].h + B * c[k];
    st.B = B * E[k];
    st.Ruu = E[k].transpose() * problem.R * E[k];
    st.ru = E[k].transpose() * (problem.R * c[k]);
  }
  const RiccatiFactor f = factor(data);
  std::vector<VecX> free_inputs;
  solve_affine(data, f, problem.x0, free_inputs, states);
  inputs.resize(problem.horizon());
  for (int k = 0; k < problem.horizon(); ++k) {
    inputs[k] = E[k] * free_inputs[k] + c[k];
  }
}

}  // namespace detail

inline QpSolution riccati_solve(const LqProblem& problem)
{
  const auto start = std::chrono::steady_clock::now();
  const detail::RiccatiData data = detail::prepare(problem);
  const detail::RiccatiFactor f = detail::factor(data);
  QpSolution sol;
  detail::solve_affine(data, f, problem.x0, sol.inputs, sol.states);
  detail::finalize(problem, sol);
  sol.iterations = 1;
  sol.solve_ms = detail::elapsed_ms(start);
  return sol;
}

inline QpSolution admm_box_solve(const LqProblem& problem, const AdmmSettings& settings = {})
{
  const auto start = std::chrono::steady_clock::now();
  const int N = problem.horizon();
  const int m = problem.input_dim();
  const VecX lo = problem.lower();
  const VecX hi = problem.upper();

  detail::RiccatiData data = detail::prepare(problem);
  double rho = settings.rho;
  auto refactor = [&]() {
    for (auto& st : data.stages) {
      st.Ruu = problem.R;
      st.Ruu.diagonal().array() += 0.5 * rho;
    }
    return detail::factor(data);
  };
  detail::RiccatiFactor f = refactor();

  std::vector<VecX> z(N, VecX::Zero(m)), w(N, VecX::Zero(m)), u, x;
  for (int k = 0; k < N; ++k) {
    z[k] = z[k].cwiseMax(lo).cwiseMin(hi);
  }

  double r_norm = 0.0, s_norm = 0.0;
  int iter = 0;
  bool converged = false;
  for (iter = 1; iter <= settings.max_iterations; ++iter) {
    for (int k = 0; k < N; ++k) {
      data.stages[k].ru = -0.5 * rho * (z[k] - w[k]);
    }
    detail::solve_affine(data, f, problem.x0, u, x);

    double r2 = 0.0, s2 = 0.0, unorm = 0.0, znorm = 0.0, wnorm = 0.0;
    for (int k = 0; k < N; ++k) {
      const VecX u_hat = settings.relaxation * u[k] + (1.0 - settings.relaxation) * z[k];
      const VecX z_new = (u_hat + w[k]).cwiseMax(lo).cwiseMin(hi);
      w[k] += u_hat - z_new;
      s2 += (z_new - z[k]).squaredNorm();
      z[k] = z_new;
      r2 += (u[k] - z[k]).squaredNorm();
      unorm = std::max(unorm, u[k].cwiseAbs().maxCoeff());
      znorm = std::max(znorm, z[k].cwiseAbs().maxCoeff());
      wnorm = std::max(wnorm, w[k].cwiseAbs().maxCoeff());
    }
    r_norm = std::sqrt(r2);
    s_norm = rho * std::sqrt(s2);
    const double eps_primal = settings.tolerance * (1.0 + std::max(unorm, znorm));
    const double eps_dual = settings.tolerance * (1.0 + rho * wnorm);
    if (r_norm <= eps_primal && s_norm <= eps_dual) {
      converged = true;
      break;
    }
    if (settings.adaptive_rho && iter % 25 == 0) {
      double scale = 1.0;
      if (r_norm > 10.0 * s_norm) {
        scale = 2.0;
      } else if (s_norm > 10.0 * r_norm) {
        scale = 0.5;
      }
      if (scale != 1.0) {
        rho *= scale;
        for (auto& wk : w) {
          wk /= scale;
        }
        f = refactor();
      }
    }
  }
  if (!converged) {
    throw SolverError("admm_box_solve: no convergence within max_iterations", r_norm, s_norm, settings.max_iterations);
  }

  QpSolution sol;
  sol.inputs = z;
  sol.states = rollout(problem, z);
  sol.iterations = iter;
  detail::finalize(problem, sol);

  if (settings.polish) {
    std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> fixed(N);
    for (int k = 0; k < N; ++k) {
      fixed[k] = (z[k].array() <= lo.array()) || (z[k].array() >= hi.array());
    }
    QpSolution polished;
    detail::solve_pinned(problem, fixed, z, polished.inputs, polished.states);
    const auto grad = input_gradient(problem, polished.inputs, polished.states);
    const double tol = settings.tolerance;
    bool valid = true;
    for (int k = 0; k < N && valid; ++k) {
      for (int i = 0; i < m; ++i) {
        const double ui = polished.inputs[k](i);
        if (ui < lo(i) - tol || ui > hi(i) + tol) {
          valid = false;
        } else if (fixed[k](i)) {
          // multiplier sign: at a lower bound the gradient must push down
          const bool at_lower = z[k](i) <= lo(i);
          if ((at_lower && grad[k](i) < -tol) || (!at_lower && grad[k](i) > tol)) {
            valid = false;
          }
        }
      }
    }
    if (valid) {
      for (int k = 0; k < N; ++k) {
        polished.inputs[k] = polished.inputs[k].cwiseMax(lo).cwiseMin(hi);
      }
      polished.states = rollout(problem, polished.inputs);
      polished.iterations = iter;
      polished.polished = true;
      detail::finalize(problem, polished);
      sol = std::move(polished);
    }
  }
  sol.solve_ms = detail::elapsed_ms(start);
  return sol;
}

}  // namespace lie_mpc
