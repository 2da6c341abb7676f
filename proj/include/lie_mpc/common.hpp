#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace lie_mpc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Mat6x2 = Eigen::Matrix<double, 6, 2>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

// log evaluated on (or numerically at) the cut locus of the principal branch
struct BranchError : std::domain_error {
  using std::domain_error::domain_error;
};

// Euler-angle representation undefined at |pitch| = pi/2
struct GimbalLockError : std::domain_error {
  using std::domain_error::domain_error;
};

// Input does not satisfy a structural requirement (not a rotation, bad vee input, ...)
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Vessel parameters or solver data violate a modelling assumption (non-PD mass, ...)
struct ParameterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iterative solver stopped without meeting its tolerances.
struct SolverError : std::runtime_error {
  SolverError(const std::string& what, double primal, double dual, int iters)
      : std::runtime_error(what), primal_residual(primal), dual_residual(dual), iterations(iters) {}
  double primal_residual;
  double dual_residual;
  int iterations;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lie_mpc
