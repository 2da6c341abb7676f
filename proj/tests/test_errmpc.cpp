#include <catch2/catch_amalgamated.hpp>

#include "dense_kkt.hpp"
#include "lie_mpc/errmpc.hpp"
#include "lie_mpc/reference.hpp"
#include "support.hpp"

using namespace lie_mpc;
using testing::otter;
using testing::Rng;

namespace {

std::vector<ReferenceSample> window_of(const ReferenceTrajectory& ref, int count)
{
  return reference_window(ref, 0, static_cast<std::size_t>(count));
}

std::vector<ReferenceSample> stationary_window(int count)
{
  ReferenceSample s{Pose::identity(), Twist::Zero(), Vec6::Zero()};
  return std::vector<ReferenceSample>(count, s);
}

Twist away_from_zero(Twist x)
{
  for (int i = 0; i < 6; ++i)
    if (std::abs(x(i)) < 1e-2) x(i) = 1e-2;
  return x;
}

}  // namespace

TEST_CASE("linearization at rest")
{
  const LinearizedDynamics lin = linearize_dynamics(otter(), Twist::Zero());
  const Mat6 D_lin = Mat6(fossen_to_lie(-otter().damping_linear).asDiagonal());
  CHECK((lin.H + D_lin).norm() == 0.0);
  CHECK(lin.b.norm() == 0.0);
}

TEST_CASE("linearization matches the nonlinear acceleration")
{
  const LieModel model(otter());
  Rng rnd(30);
  for (int i = 0; i < 100; ++i) {
    const Twist xd = away_from_zero(rnd.vec<6>(1.5));
    const Vec6 tau = rnd.vec<6>(50.0);
    const LinearizedDynamics lin = linearize_dynamics(model, xd);
    const Vec6 f_lin = model.mass_lie_inv * (lin.H * xd + lin.b + tau);
    CHECK((f_lin - model.acceleration(xd, tau)).norm() < 1e-9 * (1.0 + f_lin.norm()));

    auto f = [&](const VecX& x) -> VecX { return model.acceleration(Twist(x), tau); };
    const MatX J = testing::numeric_jacobian(f, xd, 1e-7);
    CHECK(testing::rel_err(model.mass_lie_inv * lin.H, J) < 1e-6);

    const Twist dir = rnd.vec<6>(1.0).normalized();
    std::vector<double> hs, rem;
    for (double h : {1e-1, 3e-2, 1e-2, 3e-3}) {
      const Twist x = xd + h * dir;
      hs.push_back(h);
      rem.push_back((model.acceleration(x, tau) - model.mass_lie_inv * (lin.H * x + lin.b + tau)).norm());
    }
    CHECK(testing::loglog_slope(hs, rem) == Catch::Approx(2.0).margin(0.2));
  }
}

TEST_CASE("stage model layout")
{
  const LieModel model(otter());
  const StageModel rest = build_continuous_stage(model, Twist::Zero());
  CHECK(rest.A.topLeftCorner<6, 6>().isZero(0.0));
  CHECK(rest.G.bottomLeftCorner<6, 6>().isZero(0.0));

  Rng rnd(31);
  for (int i = 0; i < 50; ++i) {
    const Twist xd = rnd.vec<6>(1.0);
    const StageModel c = build_continuous_stage(model, xd);
    CHECK((c.A.topLeftCorner<6, 6>() + little_adjoint(xd)).norm() == 0.0);
    CHECK((c.A.topRightCorner<6, 6>() - Mat6::Identity()).norm() == 0.0);
    CHECK(c.A.bottomLeftCorner<6, 6>().isZero(0.0));
    CHECK(c.B.topRows<6>().isZero(0.0));
    CHECK((c.B.bottomRows<6>() - model.mass_lie_inv * thrust_matrix_lie(otter())).norm() < 1e-15);
    CHECK((c.h.head<6>() + xd).norm() == 0.0);

    const double dt = 0.05;
    const StageModel k = discretize(c, dt);
    CHECK(k.A == Mat12(Mat12::Identity() + c.A * dt));
    CHECK((k.B - c.B * dt).norm() == 0.0);
    CHECK((k.h - c.h * dt).norm() == 0.0);

    // y = G x - d with xi = xi_d + ad psi has zero velocity part, and that part
    // equals the error kinematics psi' = -ad psi + xi - xi_d for any x.
    const Vec6 psi = rnd.vec<6>(0.5);
    Vec12 x;
    x << psi, xd + little_adjoint(xd) * psi;
    const Vec12 y = c.G * x - c.d;
    CHECK((y.head<6>() - psi).norm() < 1e-15);
    CHECK(y.tail<6>().norm() < 1e-14);

    const Vec12 xr = rnd.vec<12>(1.0);
    const Vec12 yr = c.G * xr - c.d;
    CHECK((yr.tail<6>() - (c.A * xr + c.h).head<6>()).norm() < 1e-14);
  }
}

TEST_CASE("error state")
{
  Rng rnd(32);
  const Pose Xd = rnd.pose();
  const Twist xi = rnd.vec<6>(1.0);
  const ErrorState same = compute_error_state(Xd, xi, Xd);
  CHECK(same.psi.norm() < 1e-12);
  CHECK(same.xi == xi);

  const ErrorState off = compute_error_state(Pose::translation(Vec3(1, 0, 0)), xi, Pose::identity());
  Vec6 expected;
  expected << 0, 0, 0, 1, 0, 0;
  CHECK((off.psi - expected).norm() < 1e-15);
}

TEST_CASE("error kinematics are first-order accurate")
{
  Rng rnd(33);
  for (int trial = 0; trial < 10; ++trial) {
    const Twist xd = rnd.vec<6>(1.0);
    const Twist psi_dir = rnd.vec<6>(1.0), dxi_dir = rnd.vec<6>(1.0);
    std::vector<double> eps, res;
    for (double e : {1e-1, 3e-2, 1e-2, 3e-3}) {
      const Twist psi0 = e * psi_dir, xi = xd + e * dxi_dir;
      // X_d(t) = exp(t xi_d), X(t) = exp(psi0) exp(t xi)
      auto psi_at = [&](double t) { return left_error(exp_se3(t * xd), exp_se3(psi0) * exp_se3(t * xi)).algebra; };
      const double h = 1e-6;
      const Twist measured = (psi_at(h) - psi_at(-h)) / (2 * h);
      const Twist predicted = -little_adjoint(xd) * psi0 + xi - xd;
      eps.push_back(e);
      res.push_back((measured - predicted).norm());
    }
    CHECK(testing::loglog_slope(eps, res) == Catch::Approx(2.0).margin(0.2));
  }
}

TEST_CASE("zero reference at equilibrium gives zero input")
{
  ErrorStateMpc mpc(otter(), MpcWeights::defaults(), HorizonConfig{30, 0.05});
  const auto w = stationary_window(31);
  const MpcStep step = mpc.solve_step(Pose::identity(), Twist::Zero(), w);
  CHECK(step.u0.norm() < 1e-12);
}

// Straight-line reference: the surge/yaw trim is the only steady state the two
// thrusters can hold (a turn also needs an unactuated sway force).
std::vector<ReferenceSample> straight_window(int count, double surge)
{
  Twist xi = Twist::Zero();
  xi(3) = surge;
  std::vector<ReferenceSample> w;
  Pose X = Pose::identity();
  for (int k = 0; k < count; ++k) {
    w.push_back({X, xi, pose_to_euler(X)});
    X = X * exp_se3(0.05 * xi);
  }
  return w;
}

TEST_CASE("on-reference input balances the steady forces")
{
  ErrorStateMpc mpc(otter(), MpcWeights::defaults(), HorizonConfig{100, 0.05});
  for (double surge : {0.3, 0.5, 1.0}) {
    const auto w = straight_window(101, surge);
    const MpcStep step = mpc.solve_step(w[0].pose, w[0].twist, w);

    // surge and yaw rows of 0 = T u - C(xi_d) xi_d - D(xi_d) xi_d
    const Vec6 nu_d = lie_to_fossen(w[0].twist);
    const Vec6 f = vessel_coriolis(otter(), nu_d) * nu_d + damping(otter(), nu_d) * nu_d;
    const double l = otter().lever_arm;
    Eigen::Matrix2d T;
    T << 1, 1, l, -l;
    const Vec2 balance = T.colPivHouseholderQr().solve(Vec2(f(0), f(5)));
    CHECK((step.u0 - balance).norm() < 0.02 * balance.norm());
  }
}

TEST_CASE("MPC solution matches a dense KKT solve")
{
  const ReferenceTrajectory ref = generate_reference(Profile::Zigzag, 10.0, 0.05);
  ErrorStateMpc mpc(otter(), MpcWeights::defaults(), HorizonConfig{20, 0.05});
  const auto w = reference_window(ref, 40, 21);
  Rng rnd(34);
  const Pose X = w[0].pose * exp_se3(rnd.vec<6>(0.3));
  const Twist xi = rnd.vec<6>(0.3);
  const MpcStep step = mpc.solve_step(X, xi, w);
  const auto dense = testing::dense_kkt(mpc.build_problem(X, xi, w));
  for (int k = 0; k < 20; ++k) CHECK((step.inputs[k] - dense.u[k]).norm() < 1e-6 * (1.0 + dense.u[k].norm()));
  CHECK(step.diagnostics.objective == Catch::Approx(dense.objective).epsilon(1e-6));
}

TEST_CASE("control law is left-invariant")
{
  Rng rnd(35);
  ErrorStateMpc mpc(otter(), MpcWeights::defaults(), HorizonConfig{100, 0.05});
  for (Profile profile : {Profile::Turning, Profile::Zigzag}) {
    for (int i = 0; i < 5; ++i) {
      const Pose g = rnd.pose(20.0);
      const ReferenceTrajectory ref = generate_reference(profile, 10.0, 0.05);
      const ReferenceTrajectory moved = generate_reference(profile, 10.0, 0.05, g * ref.samples[0].pose);
      const Pose X = ref.samples[0].pose * exp_se3(rnd.vec<6>(0.5));
      const Twist xi = rnd.vec<6>(0.5);
      const Vec2 u = mpc.solve_step(X, xi, window_of(ref, 101)).u0;
      const Vec2 ug = mpc.solve_step(g * X, xi, window_of(moved, 101)).u0;
      CHECK((u - ug).norm() < 1e-8 * (1.0 + u.norm()));
    }
  }
}

TEST_CASE("receding horizon reproduces the tail")
{
  const ReferenceTrajectory ref = generate_reference(Profile::Turning, 10.0, 0.05);
  ErrorStateMpc mpc(otter(), MpcWeights::defaults(), HorizonConfig{40, 0.05});
  Rng rnd(36);
  const auto w = window_of(ref, 41);
  const Pose X = w[0].pose * exp_se3(rnd.vec<6>(0.3));
  const LqProblem p = mpc.build_problem(X, rnd.vec<6>(0.2), w);
  const QpSolution full = riccati_solve(p);

  LqProblem shifted = p;
  shifted.stages.erase(shifted.stages.begin());
  shifted.x0 = full.states[1];
  const QpSolution tail = riccati_solve(shifted);
  for (int k = 0; k < 39; ++k) CHECK((tail.inputs[k] - full.inputs[k + 1]).norm() < 1e-6 * (1.0 + full.inputs[k + 1].norm()));
}

TEST_CASE("heavier input weight never increases the input energy")
{
  const ReferenceTrajectory ref = generate_reference(Profile::Turning, 10.0, 0.05);
  const auto w = window_of(ref, 101);
  Rng rnd(37);
  const MpcWeights base = MpcWeights::defaults();
  for (int i = 0; i < 20; ++i) {
    const Pose X = w[0].pose * exp_se3(rnd.vec<6>(1.0));
    const Twist xi = rnd.vec<6>(0.5);
    double previous = std::numeric_limits<double>::infinity();
    for (double alpha : {1.0, 2.0, 10.0, 100.0}) {
      MpcWeights wt = base;
      wt.R *= alpha;
      const MpcStep step = ErrorStateMpc(otter(), wt, HorizonConfig{100, 0.05}).solve_step(X, xi, w);
      double energy = 0.0;
      for (const auto& u : step.inputs) energy += u.dot(base.R * u);
      CHECK(energy <= previous * (1.0 + 1e-9));
      previous = energy;
    }
  }
}

TEST_CASE("box-constrained path respects the thrust limits")
{
  const ReferenceTrajectory ref = generate_reference(Profile::Turning, 10.0, 0.05);
  const auto w = window_of(ref, 101);
  ErrorStateMpc::Options opt;
  opt.box_constraints = true;
  ErrorStateMpc mpc(otter(), MpcWeights::defaults(), HorizonConfig{100, 0.05}, opt);
  const Pose X = w[0].pose * Pose::translation(Vec3(4, -3, 0));
  const MpcStep step = mpc.solve_step(X, Twist::Zero(), w);
  for (const auto& u : step.inputs) {
    CHECK(u.minCoeff() >= otter().thrust_min - 1e-6);
    CHECK(u.maxCoeff() <= otter().thrust_max + 1e-6);
  }
  CHECK(step.diagnostics.primal_residual <= 1e-6);
}

TEST_CASE("weights and horizon are validated")
{
  MpcWeights w = MpcWeights::defaults();
  w.Q(0, 0) = -1.0;
  CHECK_THROWS_AS(ErrorStateMpc(otter(), w, HorizonConfig{}), ParameterError);
  w = MpcWeights::defaults();
  w.R(0, 0) = 0.0;
  CHECK_THROWS_AS(ErrorStateMpc(otter(), w, HorizonConfig{}), ParameterError);
  CHECK_THROWS_AS(ErrorStateMpc(otter(), MpcWeights::defaults(), HorizonConfig{0, 0.05}), ParameterError);
  CHECK_THROWS_AS(ErrorStateMpc(otter(), MpcWeights::defaults(), HorizonConfig{10, 0.0}), ParameterError);

  ErrorStateMpc mpc(otter(), MpcWeights::defaults(), HorizonConfig{10, 0.05});
  const auto short_window = stationary_window(5);
  CHECK_THROWS_AS(mpc.solve_step(Pose::identity(), Twist::Zero(), short_window), InvalidArgument);
}
