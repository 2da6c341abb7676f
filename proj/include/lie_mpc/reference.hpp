#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "lie_mpc/common.hpp"
#include "lie_mpc/lie.hpp"

namespace lie_mpc {

enum class Profile { Turning, Zigzag };

inline std::string to_string(Profile p) { return p == Profile::Turning ? "turning" : "zigzag"; }

inline Profile profile_from_string(const std::string& s)
{
  if (s == "turning") {
    return Profile::Turning;
  }
  if (s == "zigzag") {
    return Profile::Zigzag;
  }
  throw ConfigError("unknown reference profile '" + s + "' (expected turning | zigzag)");
}

inline constexpr double kReferenceSurge = 0.5;     // m/s
inline constexpr double kReferenceYawRate = 0.1;   // rad/s
inline constexpr double kZigzagPeriodScale = 5.0;  // yaw rate 0.1 sin(t / 5)

inline double reference_yaw_rate(Profile profile, double t)
{
  return profile == Profile::Turning ? kReferenceYawRate : kReferenceYawRate * std::sin(t / kZigzagPeriodScale);
}

struct ReferenceSample
{
  Pose pose;
  Twist twist;  // body twist held over [t, t + dt)
  Vec6 eta;     // Euler form of pose; yaw is continuous (not wrapped)
};

struct ReferenceTrajectory
{
  Profile profile = Profile::Turning;
  double dt = 0.05;
  std::vector<ReferenceSample> samples;  // t_k = k dt, k = 0 .. K
  int repairs = 0;                       // orthonormality repairs applied while integrating

  double time(std::size_t k) const { return static_cast<double>(k) * dt; }
};

namespace detail {

inline ReferenceSample advance(const ReferenceSample& s, const Twist& next_twist, double dt, int& repairs)
{
  ReferenceSample out;
  out.pose = s.pose * exp_se3(s.twist * dt);
  if (out.pose.repair(1e-7)) {
    ++repairs;
  }
  out.twist = next_twist;
  out.eta = pose_to_euler(out.pose);
  out.eta(5) = s.eta(5) + wrap_angle(out.eta(5) - s.eta(5));
  return out;
}

}  // namespace detail

/**
 * Constant-surge reference with the profile's yaw-rate program. Poses are
 * integrated exactly on SE(3) with the twist held constant over each step,
 * starting from the identity.
 */
inline ReferenceTrajectory generate_reference(Profile profile, double duration, double dt, const Pose& start = Pose::identity())
{
  if (!(dt > 0.0) || !(duration >= 0.0)) {
    throw InvalidArgument("generate_reference: need dt > 0 and duration >= 0");
  }
  ReferenceTrajectory ref;
  ref.profile = profile;
  ref.dt = dt;
  const auto count = static_cast<std::size_t>(std::llround(duration / dt)) + 1;
  ref.samples.reserve(count);

  auto twist_at = [&](double t) { return make_twist(Vec3(0.0, 0.0, reference_yaw_rate(profile, t)), Vec3(kReferenceSurge, 0.0, 0.0)); };

  ReferenceSample first;
  first.pose = start;
  first.twist = twist_at(0.0);
  first.eta = pose_to_euler(start);
  ref.samples.push_back(first);
  for (std::size_t k = 1; k < count; ++k) {
    ref.samples.push_back(detail::advance(ref.samples.back(), twist_at(static_cast<double>(k) * dt), dt, ref.repairs));
  }
  return ref;
}

// Samples k .. k + count - 1; past the end the last twist is held and the
// pose keeps being integrated with it.
inline std::vector<ReferenceSample> reference_window(const ReferenceTrajectory& ref, std::size_t k, std::size_t count)
{
  if (ref.samples.empty()) {
    throw InvalidArgument("reference_window: empty reference");
  }
  std::vector<ReferenceSample> window;
  window.reserve(count);
  int repairs = 0;
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t idx = k + j;
    if (idx < ref.samples.size()) {
      window.push_back(ref.samples[idx]);
    } else if (window.empty()) {
      // start beyond the end: extrapolate from the final sample
      ReferenceSample s = ref.samples.back();
      for (std::size_t i = ref.samples.size() - 1; i < idx; ++i) {
        s = detail::advance(s, s.twist, ref.dt, repairs);
      }
      window.push_back(s);
    } else {
      const ReferenceSample& prev = window.back();
      window.push_back(detail::advance(prev, prev.twist, ref.dt, repairs));
    }
  }
  return window;
}

}  // namespace lie_mpc
