#include <catch2/catch_amalgamated.hpp>

#include "lie_mpc/lie.hpp"
#include "support.hpp"

using namespace lie_mpc;
using testing::Rng;

namespace {

Mat4 series_exp(const Mat4& A, int terms)
{
  Mat4 sum = Mat4::Identity(), term = Mat4::Identity();
  for (int k = 1; k < terms; ++k) {
    term = term * A / k;
    sum += term;
  }
  return sum;
}

}  // namespace

TEST_CASE("hat3 and vee3")
{
  Mat3 expected;
  expected << 0, -3, 2, 3, 0, -1, -2, 1, 0;
  CHECK(hat3(Vec3(1, 2, 3)) == expected);
  CHECK(hat3(Vec3::Zero()).isZero(0.0));

  Rng rnd(1);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a = rnd.vec<3>(2.0), b = rnd.vec<3>(2.0);
    const Vec3 cross(a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0));
    CHECK((hat3(a) * b - cross).norm() < 1e-14);
    CHECK((hat3(a).transpose() + hat3(a)).norm() == 0.0);
    CHECK((vee3(hat3(a)) - a).norm() == 0.0);
  }
  Mat3 S = hat3(Vec3(1, 2, 3));
  S(0, 1) += 1e-6;
  CHECK_THROWS_AS(vee3(S), InvalidArgument);
}

TEST_CASE("hat6 and vee6")
{
  CHECK(hat6(Twist::Zero()).isZero(0.0));
  Mat4 expected;
  expected << 0, -1, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0;
  Twist xi;
  xi << 0, 0, 1, 1, 0, 0;
  CHECK(hat6(xi) == expected);

  Rng rnd(2);
  for (int i = 0; i < 100; ++i) {
    const Twist x = rnd.vec<6>(3.0);
    CHECK((vee6(hat6(x)) - x).norm() == 0.0);
  }
  Mat4 bad = hat6(xi);
  bad(3, 0) = 1.0;
  CHECK_THROWS_AS(vee6(bad), InvalidArgument);
}

TEST_CASE("exp and log")
{
  CHECK(exp_so3(Vec3::Zero()).isApprox(Mat3::Identity(), 0.0));

  Mat4 A = Mat4::Zero();
  A.topLeftCorner<3, 3>() = hat3(Vec3(kPi / 2, 0, 0));
  CHECK((exp_so3(Vec3(kPi / 2, 0, 0)) - series_exp(A, 20).topLeftCorner<3, 3>()).norm() < 1e-10);

  Rng rnd(3);
  for (int i = 0; i < 100; ++i) {
    Twist xi = rnd.vec<6>(3.0);
    if (xi.head<3>().norm() > 3.0) xi.head<3>() *= 3.0 / xi.head<3>().norm();
    CHECK((log_se3(exp_se3(xi)) - xi).norm() < 1e-8);
    CHECK((exp_se3(xi).matrix() - series_exp(hat6(xi), 60)).norm() < 1e-8);

    const double t = rnd.uniform(-0.5, 0.5), s = rnd.uniform(-0.5, 0.5);
    const Pose lhs = exp_se3(t * xi) * exp_se3(s * xi);
    CHECK((lhs.matrix() - exp_se3((t + s) * xi).matrix()).norm() < 1e-9);

    const Mat3 R = rnd.rotation();
    if (std::acos(std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0)) < kPi - 1e-3) {
      CHECK((exp_so3(log_so3(R)) - R).norm() < 1e-8);
    }
  }

  CHECK(exp_se3(Twist::Zero()).matrix().isApprox(Mat4::Identity()));
  CHECK((exp_so3(Vec3(1e-7, -2e-7, 3e-8)) - (Mat3::Identity() + hat3(Vec3(1e-7, -2e-7, 3e-8)))).norm() < 1e-13);
  CHECK_THROWS_AS(log_so3(exp_so3(Vec3(kPi, 0, 0))), BranchError);
}

TEST_CASE("adjoint")
{
  CHECK(adjoint(Pose::identity()) == Mat6::Identity());
  Rng rnd(4);
  for (int i = 0; i < 100; ++i) {
    const Pose X = rnd.pose(), Y = rnd.pose();
    const Twist xi = rnd.vec<6>(2.0);
    const Mat4 conj = X.matrix() * hat6(xi) * X.inverse().matrix();
    CHECK((adjoint(X) * xi - vee6(conj)).norm() < 1e-9);
    CHECK((adjoint(X * Y) - adjoint(X) * adjoint(Y)).norm() < 1e-9);
    CHECK((adjoint(X.inverse()) - adjoint(X).inverse()).norm() < 1e-9);
  }
}

TEST_CASE("little adjoint")
{
  CHECK(little_adjoint(Twist::Zero()).isZero(0.0));
  Twist xi;
  xi << 0, 0, 1, 0, 0, 0;
  Mat6 expected = Mat6::Zero();
  expected.topLeftCorner<3, 3>() = hat3(Vec3(0, 0, 1));
  expected.bottomRightCorner<3, 3>() = hat3(Vec3(0, 0, 1));
  CHECK(little_adjoint(xi) == expected);

  Rng rnd(5);
  for (int i = 0; i < 20; ++i) {
    const Twist a = rnd.vec<6>(1.0), b = rnd.vec<6>(1.0);
    // ad_a b is the matrix commutator [a^, b^]
    const Mat4 comm = hat6(a) * hat6(b) - hat6(b) * hat6(a);
    CHECK((little_adjoint(a) * b - vee6(comm)).norm() < 1e-12);

    std::vector<double> hs, errs;
    for (double h : {1e-1, 1e-2, 1e-3, 1e-4}) {
      hs.push_back(h);
      errs.push_back(((adjoint(exp_se3(h * a)) - Mat6::Identity()) / h - little_adjoint(a)).norm());
    }
    CHECK(testing::loglog_slope(hs, errs) == Catch::Approx(1.0).margin(0.1));
  }
}

TEST_CASE("left error")
{
  Rng rnd(6);
  const Pose X = rnd.pose();
  const LeftError same = left_error(X, X);
  CHECK((same.group.matrix() - Mat4::Identity()).norm() < 1e-12);
  CHECK(same.algebra.norm() < 1e-12);

  const LeftError tr = left_error(Pose::translation(Vec3(1, 0, 0)), Pose::translation(Vec3(2, 0, 0)));
  Twist expected;
  expected << 0, 0, 0, 1, 0, 0;
  CHECK((tr.algebra - expected).norm() < 1e-15);

  for (int i = 0; i < 100; ++i) {
    const Pose g = rnd.pose(), Xd = rnd.pose();
    const Pose Xa = Xd * exp_se3(rnd.vec<6>(0.8));
    const LeftError e1 = left_error(Xd, Xa);
    const LeftError e2 = left_error(g * Xd, g * Xa);
    CHECK((e1.group.matrix() - e2.group.matrix()).norm() < 1e-9);
    CHECK((e1.algebra - e2.algebra).norm() < 1e-9);
    CHECK((exp_se3(e1.algebra).matrix() - e1.group.matrix()).norm() < 1e-8);
  }
}

TEST_CASE("group axioms")
{
  Rng rnd(7);
  for (int i = 0; i < 100; ++i) {
    const Pose a = rnd.pose(), b = rnd.pose(), c = rnd.pose();
    CHECK(((a * b) * c).matrix().isApprox((a * (b * c)).matrix(), 1e-12));
    CHECK((a * b).is_valid());
    CHECK(((a.inverse() * a).matrix() - Mat4::Identity()).norm() < 1e-9);
    CHECK(((Pose::identity() * a).matrix() - a.matrix()).norm() == 0.0);
  }
}

TEST_CASE("first-order approximations")
{
  Rng rnd(8);
  for (int i = 0; i < 20; ++i) {
    const Twist dir = rnd.vec<6>(1.0).normalized();
    std::vector<double> hs, e_exp, e_ad;
    for (double h : {1e-1, 1e-2, 1e-3, 1e-4}) {
      const Twist psi = h * dir;
      hs.push_back(h);
      e_exp.push_back((exp_se3(psi).matrix() - (Mat4::Identity() + hat6(psi))).norm());
      e_ad.push_back((adjoint(exp_se3(psi)) - (Mat6::Identity() + little_adjoint(psi))).norm());
    }
    CHECK(testing::loglog_slope(hs, e_exp) == Catch::Approx(2.0).margin(0.2));
    CHECK(testing::loglog_slope(hs, e_ad) == Catch::Approx(2.0).margin(0.2));
  }
}

TEST_CASE("Euler angles")
{
  CHECK(euler_to_pose(Vec6::Zero()).matrix() == Mat4::Identity());

  Vec6 eta = Vec6::Zero();
  eta(5) = kPi / 2;
  CHECK((euler_to_pose(eta).rotation() * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-15);

  auto rx = [](double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); };
  auto ry = [](double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); };
  auto rz = [](double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); };

  Rng rnd(9);
  for (int i = 0; i < 1000; ++i) {
    Vec6 e;
    e << rnd.vec<3>(10.0), rnd.uniform(-kPi + 1e-3, kPi - 1e-3), rnd.uniform(-1.4, 1.4), rnd.uniform(-kPi + 1e-3, kPi - 1e-3);
    const Pose X = euler_to_pose(e);
    CHECK((X.rotation() - rz(e(5)) * ry(e(4)) * rx(e(3))).norm() < 1e-12);
    CHECK((pose_to_euler(X) - e).norm() < 1e-9);
  }
  Vec6 lock = Vec6::Zero();
  lock(4) = kPi / 2;
  CHECK_THROWS_AS(pose_to_euler(euler_to_pose(lock)), GimbalLockError);
}

TEST_CASE("orthonormality repair")
{
  Rng rnd(10);
  Pose X(rnd.rotation() + 1e-5 * rnd.matx(3, 3, 1.0), Vec3::Zero());
  CHECK_FALSE(X.is_valid());
  CHECK(X.repair());
  CHECK(X.is_valid());
  CHECK_FALSE(X.repair());
}
