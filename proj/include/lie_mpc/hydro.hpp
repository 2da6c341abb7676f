#pragma once

/**
 * 6-DOF marine craft model
 *
 *   M nu_r' + C(nu_r) nu_r + D(nu_r) nu_r + g(eta) = tau
 *
 * with M = M_RB + M_AM, C = C_RB + mask(C_AM) and a diagonal linear + quadratic
 * damping. Body vectors handled here are in Fossen ordering [linear; angular]
 * (nu = [u v w p q r]) unless a function name says otherwise; the controller
 * side works in Lie ordering [angular; linear] and uses fossen_to_lie() /
 * lie_to_fossen() at the boundary.
 */

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

#include "lie_mpc/common.hpp"
#include "lie_mpc/lie.hpp"

namespace lie_mpc {

// ---------------------------------------------------------------------------
// ordering

enum class Ordering { FossenToLie, LieToFossen };

// The permutation swaps the two 3-blocks, so it is its own inverse.
inline Vec6 reorder(const Vec6& v, Ordering = Ordering::FossenToLie)
{
  Vec6 out;
  out << v.tail<3>(), v.head<3>();
  return out;
}

inline Vec6 fossen_to_lie(const Vec6& nu) { return reorder(nu, Ordering::FossenToLie); }
inline Vec6 lie_to_fossen(const Vec6& xi) { return reorder(xi, Ordering::LieToFossen); }

// P A P^T for the block-swap permutation P.
inline Mat6 reorder_matrix(const Mat6& A)
{
  Mat6 out;
  out.topLeftCorner<3, 3>() = A.bottomRightCorner<3, 3>();
  out.topRightCorner<3, 3>() = A.bottomLeftCorner<3, 3>();
  out.bottomLeftCorner<3, 3>() = A.topRightCorner<3, 3>();
  out.bottomRightCorner<3, 3>() = A.topLeftCorner<3, 3>();
  return out;
}

// ---------------------------------------------------------------------------
// parameters and state

using CoriolisMask = std::vector<std::pair<int, int>>;  // zeroed (row, col) entries, Fossen ordering

struct VesselParams
{
  double mass = 0.0;                  // kg
  Vec3 cog = Vec3::Zero();            // m, relative to the body origin
  Mat3 inertia = Mat3::Zero();        // kg m^2, inertia dyadic about the origin
  Mat6 added_mass = Mat6::Zero();     // M_AM
  Vec6 damping_linear = Vec6::Zero(); // X_u .. N_r, SNAME signs (<= 0)
  Vec6 damping_quadratic = Vec6::Zero();  // X_|u|u .. N_|r|r (<= 0)
  Mat6 restoring = Mat6::Zero();      // G_rest acting on [0 0 z phi theta 0]
  double lever_arm = 0.0;             // m, thruster offset from centreline
  double thrust_coeff_pos = 1.0;      // N / (rad/s)^2
  double thrust_coeff_neg = 1.0;
  double thrust_min = -1e300;         // N, per thruster
  double thrust_max = 1e300;
  CoriolisMask coriolis_am_mask;
};

struct FossenState
{
  Vec6 eta = Vec6::Zero();  // [x y z phi theta psi], NED
  Vec6 nu = Vec6::Zero();   // [u v w p q r], body
};

struct CurrentField
{
  Vec3 velocity_ned = Vec3::Zero();  // m/s, constant and irrotational

  static CurrentField from_speed_direction(double speed, double direction)
  {
    return {Vec3(speed * std::cos(direction), speed * std::sin(direction), 0.0)};
  }

  // nu_c expressed in the body frame of a vehicle with attitude eta.
  Vec6 body(const Vec6& eta) const
  {
    Vec6 nu_c = Vec6::Zero();
    nu_c.head<3>() = euler_to_rotation(eta(3), eta(4), eta(5)).transpose() * velocity_ned;
    return nu_c;
  }
};

// ---------------------------------------------------------------------------
// mass

inline Mat6 rigid_body_mass(const VesselParams& params)
{
  const double m = params.mass;
  Mat6 M = Mat6::Zero();
  M.topLeftCorner<3, 3>() = m * Mat3::Identity();
  M.topRightCorner<3, 3>() = -m * hat3(params.cog);
  M.bottomLeftCorner<3, 3>() = m * hat3(params.cog);
  M.bottomRightCorner<3, 3>() = params.inertia;
  return M;
}

inline Mat6 assemble_mass(const VesselParams& params)
{
  const Mat6 M = rigid_body_mass(params) + params.added_mass;
  if ((M - M.transpose()).norm() > 1e-9 * (1.0 + M.norm())) {
    throw ParameterError("mass matrix is not symmetric");
  }
  Eigen::LLT<Mat6> llt(M);
  if (llt.info() != Eigen::Success) {
    throw ParameterError("mass matrix is not positive definite");
  }
  return M;
}

// ---------------------------------------------------------------------------
// Coriolis

// Skew-symmetric Coriolis matrix of a symmetric mass matrix (Fossen ordering).
inline Mat6 coriolis(const Mat6& M, const Vec6& nu)
{
  const Vec3 nu1 = nu.head<3>();
  const Vec3 nu2 = nu.tail<3>();
  const Mat3 a = hat3(M.topLeftCorner<3, 3>() * nu1 + M.topRightCorner<3, 3>() * nu2);
  const Mat3 b = hat3(M.bottomLeftCorner<3, 3>() * nu1 + M.bottomRightCorner<3, 3>() * nu2);
  Mat6 C = Mat6::Zero();
  C.topRightCorner<3, 3>() = -a;
  C.bottomLeftCorner<3, 3>() = -a;
  C.bottomRightCorner<3, 3>() = -b;
  return C;
}

inline Mat6 coriolis(const Mat6& M, const Vec6& nu, const CoriolisMask& mask)
{
  Mat6 C = coriolis(M, nu);
  for (const auto& [r, c] : mask) {
    C(r, c) = 0.0;
  }
  return C;
}

// C_RB(nu) + masked C_AM(nu).
inline Mat6 vessel_coriolis(const VesselParams& params, const Vec6& nu)
{
  return coriolis(rigid_body_mass(params), nu) + coriolis(params.added_mass, nu, params.coriolis_am_mask);
}

/**
 * d(C(xi) xi_bar)/d xi in Lie ordering, xi = [w; v].
 *
 * M is given in Fossen ordering; its blocks M11 (linear), M12, M21, M22
 * (angular) appear as
 *
 *   [ w^ M22 + v^ M12   w^ M21 + v^ M11 ]
 *   [ w^ M12            w^ M11          ]
 *
 * where w, v are the components of xi_bar.
 */
inline Mat6 coriolis_jacobian(const Mat6& M, const Twist& xi_bar)
{
  const Mat3 W = hat3(angular(xi_bar));
  const Mat3 V = hat3(linear(xi_bar));
  const Mat3 M11 = M.topLeftCorner<3, 3>();
  const Mat3 M12 = M.topRightCorner<3, 3>();
  const Mat3 M21 = M.bottomLeftCorner<3, 3>();
  const Mat3 M22 = M.bottomRightCorner<3, 3>();
  Mat6 J;
  J.topLeftCorner<3, 3>() = W * M22 + V * M12;
  J.topRightCorner<3, 3>() = W * M21 + V * M11;
  J.bottomLeftCorner<3, 3>() = W * M12;
  J.bottomRightCorner<3, 3>() = W * M11;
  return J;
}

// Same with the masked entries of C removed. C is linear in its argument, so
// each masked entry (r, c) contributes xi_bar_c * dC_rc/dxi to row r.
inline Mat6 coriolis_jacobian(const Mat6& M, const Twist& xi_bar, const CoriolisMask& mask)
{
  Mat6 J = coriolis_jacobian(M, xi_bar);
  if (mask.empty()) {
    return J;
  }
  const Vec6 nu_bar = lie_to_fossen(xi_bar);
  for (int j = 0; j < 6; ++j) {
    const Mat6 Cj = coriolis(M, lie_to_fossen(Vec6::Unit(j)));
    for (const auto& [r, c] : mask) {
      // Fossen row r is Lie row (r + 3) % 6
      J((r + 3) % 6, j) -= Cj(r, c) * nu_bar(c);
    }
  }
  return J;
}

inline Mat6 vessel_coriolis_jacobian(const VesselParams& params, const Twist& xi_bar)
{
  return coriolis_jacobian(rigid_body_mass(params), xi_bar) +
         coriolis_jacobian(params.added_mass, xi_bar, params.coriolis_am_mask);
}

// ---------------------------------------------------------------------------
// damping and restoring

inline Mat6 damping(const VesselParams& params, const Vec6& nu_r)
{
  const Vec6 d = -params.damping_linear.array() - params.damping_quadratic.array() * nu_r.array().abs();
  return d.asDiagonal();
}

// d(D(xi) xi_bar)/d xi at xi = xi_bar, Lie ordering. |.| uses subgradient 0 at 0.
inline Mat6 damping_jacobian(const VesselParams& params, const Twist& xi_bar)
{
  const Vec6 q = fossen_to_lie(params.damping_quadratic);
  const Vec6 d = -q.array() * xi_bar.array().abs();
  return d.asDiagonal();
}

inline Vec6 restoring(const VesselParams& params, const Vec6& eta)
{
  Vec6 delta = Vec6::Zero();
  delta(2) = eta(2);
  delta(3) = eta(3);
  delta(4) = eta(4);
  return params.restoring * delta;
}

// ---------------------------------------------------------------------------
// kinematics

// eta' = J(eta) nu for ZYX Euler angles.
inline Mat6 kinematics_matrix(const Vec6& eta)
{
  const double phi = eta(3), theta = eta(4);
  if (std::abs(theta) >= kMaxPitch) {
    throw GimbalLockError("kinematics: pitch too close to +-pi/2");
  }
  const double cphi = std::cos(phi), sphi = std::sin(phi);
  const double cth = std::cos(theta), tth = std::tan(theta);
  Mat3 T;
  T << 1.0, sphi * tth, cphi * tth,
       0.0, cphi, -sphi,
       0.0, sphi / cth, cphi / cth;
  Mat6 J = Mat6::Zero();
  J.topLeftCorner<3, 3>() = euler_to_rotation(eta(3), eta(4), eta(5));
  J.bottomRightCorner<3, 3>() = T;
  return J;
}

// ---------------------------------------------------------------------------
// continuous dynamics

struct StateDerivative
{
  Vec6 eta_dot;
  Vec6 nu_dot;
};

/**
 * Plant vector field. Forces act on the relative velocity nu_r = nu - nu_c;
 * since nu_c = [R^T v_c; 0] rotates with the body, the ground-referenced
 * acceleration is nu' = nu_r' - [w x (R^T v_c); 0].
 */
inline StateDerivative continuous_dynamics(const VesselParams& params,
                                           const Mat6& M_inv,
                                           const FossenState& state,
                                           const CurrentField& current,
                                           const Vec6& tau)
{
  const Vec6 nu_c = current.body(state.eta);
  const Vec6 nu_r = state.nu - nu_c;
  const Vec6 f = tau - vessel_coriolis(params, nu_r) * nu_r - damping(params, nu_r) * nu_r - restoring(params, state.eta);
  StateDerivative out;
  out.eta_dot = kinematics_matrix(state.eta) * state.nu;
  out.nu_dot = M_inv * f;
  out.nu_dot.head<3>() -= state.nu.tail<3>().cross(nu_c.head<3>());
  return out;
}

inline StateDerivative continuous_dynamics(const VesselParams& params,
                                           const FossenState& state,
                                           const CurrentField& current,
                                           const Vec6& tau)
{
  return continuous_dynamics(params, assemble_mass(params).inverse(), state, current, tau);
}

inline double kinetic_energy(const Mat6& M, const Vec6& nu) { return 0.5 * nu.dot(M * nu); }

// ---------------------------------------------------------------------------
// thrusters (port u1, starboard u2)

// tau = T u in Lie ordering: surge force u1 + u2, yaw moment l (u1 - u2).
inline Mat6x2 thrust_matrix_lie(const VesselParams& params)
{
  Mat6x2 T = Mat6x2::Zero();
  T(2, 0) = params.lever_arm;
  T(2, 1) = -params.lever_arm;
  T(3, 0) = 1.0;
  T(3, 1) = 1.0;
  return T;
}

inline Mat6x2 thrust_matrix_fossen(const VesselParams& params)
{
  Mat6x2 T = Mat6x2::Zero();
  T.topRows<3>() = thrust_matrix_lie(params).bottomRows<3>();
  T.bottomRows<3>() = thrust_matrix_lie(params).topRows<3>();
  return T;
}

struct ThrustCommand
{
  Vec2 forces;
  bool saturated = false;
};

inline ThrustCommand clamp_thrust(const VesselParams& params, const Vec2& u)
{
  ThrustCommand cmd{u.cwiseMax(params.thrust_min).cwiseMin(params.thrust_max), false};
  cmd.saturated = (cmd.forces - u).cwiseAbs().maxCoeff() > 0.0;
  return cmd;
}

struct Allocation
{
  Vec6 tau;  // Lie ordering
  bool saturated = false;
};

inline Allocation allocate_thrust(const VesselParams& params, const Vec2& u)
{
  const ThrustCommand cmd = clamp_thrust(params, u);
  return {thrust_matrix_lie(params) * cmd.forces, cmd.saturated};
}

// Least-squares thruster forces for a desired Lie-ordered wrench.
inline Vec2 thrust_pseudo_inverse(const VesselParams& params, const Vec6& tau)
{
  const Mat6x2 T = thrust_matrix_lie(params);
  return (T.transpose() * T).ldlt().solve(T.transpose() * tau);
}

inline double rpm_to_force(const VesselParams& params, double n)
{
  const double k = n >= 0.0 ? params.thrust_coeff_pos : params.thrust_coeff_neg;
  return k * n * std::abs(n);
}

inline double force_to_rpm(const VesselParams& params, double force)
{
  const double k = force >= 0.0 ? params.thrust_coeff_pos : params.thrust_coeff_neg;
  return std::copysign(std::sqrt(std::abs(force) / k), force);
}

// ---------------------------------------------------------------------------
// validation

inline void validate(const VesselParams& params)
{
  if (!(params.mass > 0.0)) {
    throw ParameterError("mass must be positive");
  }
  for (int i = 0; i < 6; ++i) {
    if (params.damping_linear(i) > 0.0 || params.damping_quadratic(i) > 0.0) {
      std::ostringstream msg;
      msg << "damping coefficient " << i << " must be non-positive (SNAME convention)";
      throw ParameterError(msg.str());
    }
  }
  if ((params.added_mass - params.added_mass.transpose()).norm() > 1e-9 * (1.0 + params.added_mass.norm())) {
    throw ParameterError("added mass matrix is not symmetric");
  }
  if ((params.inertia - params.inertia.transpose()).norm() > 1e-9 * (1.0 + params.inertia.norm())) {
    throw ParameterError("inertia matrix is not symmetric");
  }
  if (!(params.thrust_coeff_pos > 0.0) || !(params.thrust_coeff_neg > 0.0)) {
    throw ParameterError("thrust coefficients must be positive");
  }
  if (!(params.thrust_min <= 0.0 && params.thrust_max >= 0.0)) {
    throw ParameterError("thrust limits must bracket zero");
  }
  for (const auto& [r, c] : params.coriolis_am_mask) {
    if (r < 0 || r > 5 || c < 0 || c > 5) {
      throw ParameterError("coriolis mask entry out of range");
    }
  }
  assemble_mass(params);
}

}  // namespace lie_mpc
