#pragma once

/**
 * SO(3) / SE(3) group operations.
 *
 * Twists are 6-vectors ordered [angular; linear] = [w; v]. Poses are stored as
 * rotation + translation and compose like homogeneous matrices
 *
 *   X = [ R  p ]
 *       [ 0  1 ]
 *
 * exp/log are closed form (Rodrigues and the SE(3) left Jacobian) with a
 * fourth-order series below a rotation angle of 1e-5.
 */

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "lie_mpc/common.hpp"

namespace lie_mpc {

namespace detail {
inline constexpr double kSmallAngle = 1e-5;
inline constexpr double kNearPi = 1e-4;
}  // namespace detail

using Twist = Vec6;

inline Vec3 angular(const Twist& xi) { return xi.head<3>(); }
inline Vec3 linear(const Twist& xi) { return xi.tail<3>(); }

inline Twist make_twist(const Vec3& w, const Vec3& v)
{
  Twist xi;
  xi << w, v;
  return xi;
}

inline Mat3 hat3(const Vec3& v)
{
  Mat3 S;
  S << 0.0, -v(2), v(1),
       v(2), 0.0, -v(0),
       -v(1), v(0), 0.0;
  return S;
}

inline Vec3 vee3(const Mat3& S, double tol = 1e-9)
{
  if ((S + S.transpose()).norm() > tol) {
    throw InvalidArgument("vee3: matrix is not skew-symmetric");
  }
  return Vec3(0.5 * (S(2, 1) - S(1, 2)), 0.5 * (S(0, 2) - S(2, 0)), 0.5 * (S(1, 0) - S(0, 1)));
}

inline Mat4 hat6(const Twist& xi)
{
  Mat4 X = Mat4::Zero();
  X.topLeftCorner<3, 3>() = hat3(angular(xi));
  X.topRightCorner<3, 1>() = linear(xi);
  return X;
}

inline Twist vee6(const Mat4& X, double tol = 1e-9)
{
  if (X.row(3).norm() > tol) {
    throw InvalidArgument("vee6: bottom row of a se(3) element must be zero");
  }
  return make_twist(vee3(X.topLeftCorner<3, 3>(), tol), X.topRightCorner<3, 1>());
}

inline bool is_rotation(const Mat3& R, double tol = 1e-9)
{
  return (R * R.transpose() - Mat3::Identity()).norm() <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

// Nearest rotation in the Frobenius sense (polar factor).
inline Mat3 project_to_so3(const Mat3& R)
{
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) {
    U.col(2) *= -1.0;
  }
  return U * V.transpose();
}

inline double orthonormality_drift(const Mat3& R)
{
  return (R * R.transpose() - Mat3::Identity()).norm();
}

class Pose
{
public:
  Pose() : R_(Mat3::Identity()), p_(Vec3::Zero()) {}
  Pose(const Mat3& R, const Vec3& p) : R_(R), p_(p) {}

  static Pose identity() { return {}; }
  static Pose translation(const Vec3& p) { return {Mat3::Identity(), p}; }

  static Pose from_matrix(const Mat4& X, double tol = 1e-9)
  {
    if ((X.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).norm() > tol) {
      throw InvalidArgument("Pose::from_matrix: last row must be (0, 0, 0, 1)");
    }
    return {X.topLeftCorner<3, 3>(), X.topRightCorner<3, 1>()};
  }

  const Mat3& rotation() const { return R_; }
  const Vec3& position() const { return p_; }

  Mat4 matrix() const
  {
    Mat4 X = Mat4::Identity();
    X.topLeftCorner<3, 3>() = R_;
    X.topRightCorner<3, 1>() = p_;
    return X;
  }

  Pose inverse() const
  {
    const Mat3 Rt = R_.transpose();
    return {Rt, -Rt * p_};
  }

  Pose operator*(const Pose& other) const { return {R_ * other.R_, R_ * other.p_ + p_}; }

  Vec3 act(const Vec3& x) const { return R_ * x + p_; }

  bool is_valid(double tol = 1e-9) const { return is_rotation(R_, tol); }

  // Re-orthonormalises the rotation when drift exceeds tol; returns whether it did.
  bool repair(double tol = 1e-7)
  {
    if (orthonormality_drift(R_) <= tol) {
      return false;
    }
    R_ = project_to_so3(R_);
    return true;
  }

private:
  Mat3 R_;
  Vec3 p_;
};

inline Mat3 exp_so3(const Vec3& w)
{
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  double A, B;
  if (theta < detail::kSmallAngle) {
    A = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    B = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    A = std::sin(theta) / theta;
    B = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 W = hat3(w);
  return Mat3::Identity() + A * W + B * W * W;
}

inline Vec3 log_so3(const Mat3& R, double tol = 1e-9)
{
  if (!is_rotation(R, tol)) {
    throw InvalidArgument("log_so3: argument is not a rotation matrix");
  }
  const Vec3 s(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));  // 2 sin(theta) a
  const double cos_theta = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double sin_theta = 0.5 * s.norm();
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < detail::kSmallAngle) {
    const double t2 = theta * theta;
    return 0.5 * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0) * s;
  }
  if (kPi - theta < 1e-9) {
    throw BranchError("log_so3: rotation angle is pi, principal branch is ambiguous");
  }
  if (kPi - theta < detail::kNearPi) {
    // (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T
    const Mat3 B = 0.5 * (R + R.transpose()) - cos_theta * Mat3::Identity();
    Eigen::Index i = 0;
    B.diagonal().maxCoeff(&i);
    Vec3 axis = B.col(i).normalized();
    if (axis.dot(s) < 0.0) {
      axis = -axis;
    }
    return theta * axis;
  }
  return theta / (2.0 * sin_theta) * s;
}

// Left Jacobian of SO(3): p = V(w) v in exp_se3.
inline Mat3 so3_left_jacobian(const Vec3& w)
{
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  double B, C;
  if (theta < detail::kSmallAngle) {
    B = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    C = 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0;
  } else {
    B = (1.0 - std::cos(theta)) / theta2;
    C = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Mat3 W = hat3(w);
  return Mat3::Identity() + B * W + C * W * W;
}

inline Mat3 so3_left_jacobian_inverse(const Vec3& w)
{
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  double D;
  if (theta < detail::kSmallAngle) {
    D = 1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0;
  } else {
    D = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / theta2;
  }
  const Mat3 W = hat3(w);
  return Mat3::Identity() - 0.5 * W + D * W * W;
}

inline Pose exp_se3(const Twist& xi)
{
  const Vec3 w = angular(xi);
  return {exp_so3(w), so3_left_jacobian(w) * linear(xi)};
}

inline Twist log_se3(const Pose& X, double tol = 1e-9)
{
  const Vec3 w = log_so3(X.rotation(), tol);
  return make_twist(w, so3_left_jacobian_inverse(w) * X.position());
}

inline Mat6 adjoint(const Pose& X)
{
  Mat6 Ad = Mat6::Zero();
  Ad.topLeftCorner<3, 3>() = X.rotation();
  Ad.bottomLeftCorner<3, 3>() = hat3(X.position()) * X.rotation();
  Ad.bottomRightCorner<3, 3>() = X.rotation();
  return Ad;
}

inline Mat6 little_adjoint(const Twist& xi)
{
  Mat6 ad = Mat6::Zero();
  const Mat3 W = hat3(angular(xi));
  ad.topLeftCorner<3, 3>() = W;
  ad.bottomLeftCorner<3, 3>() = hat3(linear(xi));
  ad.bottomRightCorner<3, 3>() = W;
  return ad;
}

struct LeftError
{
  Pose group;    // X_d^{-1} X
  Twist algebra; // principal-branch log of group
};

inline LeftError left_error(const Pose& desired, const Pose& actual)
{
  const Pose E = desired.inverse() * actual;
  return {E, log_se3(E)};
}

// ZYX (yaw-pitch-roll) Euler angles, NED. eta = [x, y, z, roll, pitch, yaw].
inline Mat3 euler_to_rotation(double roll, double pitch, double yaw)
{
  const double cphi = std::cos(roll), sphi = std::sin(roll);
  const double cth = std::cos(pitch), sth = std::sin(pitch);
  const double cpsi = std::cos(yaw), spsi = std::sin(yaw);
  Mat3 R;
  R << cpsi * cth, -spsi * cphi + cpsi * sth * sphi, spsi * sphi + cpsi * cphi * sth,
       spsi * cth, cpsi * cphi + sphi * sth * spsi, -cpsi * sphi + sth * spsi * cphi,
       -sth, cth * sphi, cth * cphi;
  return R;
}

inline constexpr double kMaxPitch = kPi / 2.0 - 1e-6;

inline Pose euler_to_pose(const Vec6& eta)
{
  return {euler_to_rotation(eta(3), eta(4), eta(5)), eta.head<3>()};
}

inline Vec6 pose_to_euler(const Pose& X)
{
  const Mat3& R = X.rotation();
  const double pitch = -std::asin(std::clamp(R(2, 0), -1.0, 1.0));
  if (std::abs(pitch) >= kMaxPitch) {
    throw GimbalLockError("pose_to_euler: pitch too close to +-pi/2");
  }
  Vec6 eta;
  eta << X.position(), std::atan2(R(2, 1), R(2, 2)), pitch, std::atan2(R(1, 0), R(0, 0));
  return eta;
}

inline double wrap_angle(double a)
{
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0.0) {
    a += 2.0 * kPi;
  }
  return a - kPi;
}

}  // namespace lie_mpc
