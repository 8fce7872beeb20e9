#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "g2p/limb_dynamics.hpp"
#include "g2p/plant.hpp"

namespace g2p {

/// Cyclic two-joint sinusoid. The distal joint leads the proximal one by a
/// quarter cycle, which sweeps the foot around a closed loop instead of
/// scrubbing back and forth along a line.
struct SinusoidShape {
  Vec2 centers = Vec2(0.1, 1.2);     // rad, (proximal, distal)
  Vec2 amplitudes = Vec2(0.5, 0.5);  // rad
  double joint_phase_shift = std::numbers::pi / 2;
};

/// Closed gait cycle given as ten joint-space waypoints. Point i is reached
/// at t = i * cycle_period / 10 and the path returns to point 0 at the end of
/// the cycle, with straight-line interpolation in between.
struct FeatureOrbit {
  std::array<Vec2, 10> points{};
};

enum class TaskKind { kSinusoid, kFeatureOrbit };

/// A per-limb desired joint trajectory for the whole quadruped. Limb phases
/// implement a trot: diagonal pairs (FL, HR) and (FR, HL) move in unison,
/// the two pairs half a cycle apart.
struct TrajectorySpec {
  TaskKind kind = TaskKind::kSinusoid;
  SinusoidShape sinusoid{};
  FeatureOrbit orbit{};
  double cycle_period = 3.6;  // s
  double duration = 20.0;     // s
  std::array<double, 4> limb_phase{0.0, std::numbers::pi, std::numbers::pi,
                                   0.0};
};

namespace detail {

inline void check_point_in_range(const LimbParams& p, const Vec2& q,
                                 const std::string& what) {
  for (int j = 0; j < 2; ++j) {
    if (!(q[j] >= p.joint_min[j] && q[j] <= p.joint_max[j])) {
      throw ConfigError("task: " + what + " joint " + std::to_string(j) +
                        " = " + std::to_string(q[j]) +
                        " rad is outside the joint range [" +
                        std::to_string(p.joint_min[j]) + ", " +
                        std::to_string(p.joint_max[j]) + "]");
    }
  }
}

inline void check_timing(double cycle_period, double duration) {
  if (!(cycle_period > 0.0) || !std::isfinite(cycle_period)) {
    throw ConfigError("task: cycle_period must be positive");
  }
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw ConfigError("task: duration must be positive");
  }
}

}  // namespace detail

inline TrajectorySpec sinusoid_task(const LimbParams& limits,
                                    const SinusoidShape& shape = {},
                                    double cycle_period = 3.6,
                                    double duration = 20.0) {
  detail::check_timing(cycle_period, duration);
  const Vec2 amp = shape.amplitudes.cwiseAbs();
  detail::check_point_in_range(limits, shape.centers + amp, "sinusoid peak");
  detail::check_point_in_range(limits, shape.centers - amp, "sinusoid trough");
  TrajectorySpec spec;
  spec.kind = TaskKind::kSinusoid;
  spec.sinusoid = shape;
  spec.cycle_period = cycle_period;
  spec.duration = duration;
  return spec;
}

inline TrajectorySpec feature_orbit_task(const LimbParams& limits,
                                         const FeatureOrbit& orbit,
                                         double cycle_period = 3.6,
                                         double duration = 20.0) {
  detail::check_timing(cycle_period, duration);
  for (std::size_t i = 0; i < orbit.points.size(); ++i) {
    detail::check_point_in_range(limits, orbit.points[i],
                                 "feature point " + std::to_string(i));
  }
  TrajectorySpec spec;
  spec.kind = TaskKind::kFeatureOrbit;
  spec.orbit = orbit;
  spec.cycle_period = cycle_period;
  spec.duration = duration;
  return spec;
}

/// Ten-point orbit sampled from a sinusoid cycle, one waypoint every tenth of
/// the period. Handy as a stand-in feature set when none is measured.
inline FeatureOrbit orbit_from_sinusoid(const SinusoidShape& shape) {
  FeatureOrbit orbit;
  for (int i = 0; i < 10; ++i) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(i) / 10.0;
    orbit.points[static_cast<std::size_t>(i)] =
        Vec2(shape.centers[0] + shape.amplitudes[0] * std::sin(th),
             shape.centers[1] +
                 shape.amplitudes[1] *
                     std::sin(th + shape.joint_phase_shift));
  }
  return orbit;
}

/// Desired joint angles of one limb at time t (defined for all t, periodic).
inline Vec2 trajectory_angles(const TrajectorySpec& spec, LimbId limb,
                              double t) {
  const double phase = spec.limb_phase[static_cast<std::size_t>(
      limb_index(limb))];
  const double P = spec.cycle_period;
  if (spec.kind == TaskKind::kSinusoid) {
    const double th = 2.0 * std::numbers::pi * t / P + phase;
    const SinusoidShape& s = spec.sinusoid;
    return Vec2(s.centers[0] + s.amplitudes[0] * std::sin(th),
                s.centers[1] +
                    s.amplitudes[1] * std::sin(th + s.joint_phase_shift));
  }
  // Piecewise-linear loop through the ten waypoints.
  double tau = std::fmod(t + phase * P / (2.0 * std::numbers::pi), P);
  if (tau < 0.0) tau += P;
  const double seg = P / 10.0;
  int k = static_cast<int>(std::floor(tau / seg));
  if (k > 9) k = 9;  // guards fmod landing exactly on P
  const double u = (tau - k * seg) / seg;
  const Vec2& a = spec.orbit.points[static_cast<std::size_t>(k)];
  const Vec2& b = spec.orbit.points[static_cast<std::size_t>((k + 1) % 10)];
  return a + u * (b - a);
}

/// Desired angles, velocities and accelerations for all limbs on the control
/// grid: sample k lives at t = k / rate, with llround(duration * rate) + 1
/// samples so both endpoints are included.
struct DesiredKinematics {
  std::vector<double> time;
  std::array<std::vector<Vec2>, 4> q;
  std::array<std::vector<Vec2>, 4> dq;
  std::array<std::vector<Vec2>, 4> ddq;

  std::size_t size() const { return time.size(); }
};

/// Velocities and accelerations come from central differences of the angle
/// function (which is defined for all t, so the ends need no special cases).
/// This treats smooth and piecewise-linear tasks uniformly and matches what a
/// differencing sensor pipeline reports for a perfectly tracked target.
inline DesiredKinematics sample_trajectory(const TrajectorySpec& spec,
                                           double rate = Plant::kControlRate) {
  if (!(rate > 0.0)) throw ConfigError("task: sample rate must be positive");
  const auto n = static_cast<std::size_t>(
      std::llround(spec.duration * rate) + 1);
  const double h = 1.0 / rate;
  DesiredKinematics out;
  out.time.resize(n);
  for (auto& v : out.q) v.resize(n);
  for (auto& v : out.dq) v.resize(n);
  for (auto& v : out.ddq) v.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * h;
    out.time[k] = t;
    for (LimbId limb : kAllLimbs) {
      const auto li = static_cast<std::size_t>(limb_index(limb));
      const Vec2 qm = trajectory_angles(spec, limb, t - h);
      const Vec2 q0 = trajectory_angles(spec, limb, t);
      const Vec2 qp = trajectory_angles(spec, limb, t + h);
      out.q[li][k] = q0;
      out.dq[li][k] = (qp - qm) / (2.0 * h);
      out.ddq[li][k] = (qp - 2.0 * q0 + qm) / (h * h);
    }
  }
  return out;
}

}  // namespace g2p
