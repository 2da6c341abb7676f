#pragma once

#include <functional>

#include <Eigen/Geometry>
#include <random>
#include <string>

#include "lie_mpc/common.hpp"
#include "lie_mpc/hydro.hpp"
#include "lie_mpc/lie.hpp"
#include "lie_mpc/vessel_file.hpp"

namespace testing {

using namespace lie_mpc;

inline std::string source_path(const std::string& rel) { return std::string(LIE_MPC_SOURCE_DIR) + "/" + rel; }

inline const VesselParams& otter()
{
  static const VesselParams p = load_vessel(source_path("config/otter.vessel"));
  return p;
}

struct Rng
{
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  std::mt19937_64 gen;

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }

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

  // Rotation from a random unit quaternion, independent of exp_so3.
  Mat3 rotation()
  {
    Eigen::Vector4d q;
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 4; ++i) q(i) = n(gen);
    q.normalize();
    return Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
  }

  Pose pose(double dist = 5.0) { return {rotation(), vec<3>(dist)}; }
};

// Central-difference Jacobian of f: R^n -> R^m.
inline MatX numeric_jacobian(const std::function<VecX(const VecX&)>& f, const VecX& x, double h = 1e-6)
{
  const VecX f0 = f(x);
  MatX J(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    VecX xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

inline double rel_err(const MatX& a, const MatX& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

// Least-squares slope of log(err) against log(h).
inline double loglog_slope(const std::vector<double>& h, const std::vector<double>& e)
{
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]), y = std::log(e[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace testing
