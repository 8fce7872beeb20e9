#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <sstream>

#include "g2p/errors.hpp"

namespace g2p {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Three per-tendon activations, unitless, each in [0, 1].
struct ActivationVector {
  Vec3 a = Vec3::Zero();

  ActivationVector() = default;
  explicit ActivationVector(const Vec3& v) : a(v) {}
  ActivationVector(double a0, double a1, double a2) : a(a0, a1, a2) {}

  ActivationVector clamped() const {
    return ActivationVector(a.cwiseMax(0.0).cwiseMin(1.0));
  }
};

inline Vec3 clamp01(const Vec3& v) { return v.cwiseMax(0.0).cwiseMin(1.0); }

/// Physical description of one planar two-joint, three-tendon limb.
///
/// Angle convention: q is measured counter-clockwise from the limb frame's
/// x axis, which points along gravity (the limb hangs from its proximal
/// joint). q = (0, 0) is the straight-down configuration. Flexion is
/// positive.
struct LimbParams {
  Vec2 link_lengths{0.10, 0.10};       // m
  Vec2 link_masses{0.08, 0.08};        // kg
  Vec2 link_com_offsets{0.05, 0.05};   // m, from the proximal joint of each link
  Vec2 link_inertias{6.6666666666666667e-5,
                     6.6666666666666667e-5};  // kg m^2, about each COM
  Vec2 damping{0.01, 0.01};            // N m s/rad, diagonal of B
  Mat23 moment_arms;                   // m, maps tendon force to joint torque
  Vec3 max_forces{20.0, 20.0, 20.0};   // N, diagonal of F0
  Vec2 joint_min{-std::numbers::pi / 3.0, 0.0};  // rad
  Vec2 joint_max{std::numbers::pi / 2.0, 2.4};   // rad
  double gravity = 9.81;               // m/s^2, 0 disables
};

/// Joint angles, velocities, and accelerations of one limb.
struct LimbState {
  Vec2 q = Vec2::Zero();
  Vec2 dq = Vec2::Zero();
  Vec2 ddq = Vec2::Zero();
};

/// Canonical parameter set. Tendon routing sign structure (flexion positive):
///   M0 extends the proximal joint and flexes the distal joint: (-, +)
///   M1 flexes the proximal joint only:                         (+, 0)
///   M2 extends both joints:                                    (-, -)
inline LimbParams default_limb_params() {
  LimbParams p;
  const double r = 0.015;
  p.moment_arms << -r, r, -r,
                    r, 0.0, -r;
  return p;
}

inline void validate(const LimbParams& p) {
  auto fail = [](const std::string& what) {
    throw ConfigError("invalid limb parameters: " + what);
  };
  for (int i = 0; i < 2; ++i) {
    if (!(p.link_lengths[i] > 0)) fail("link_lengths must be strictly positive");
    if (!(p.link_masses[i] > 0)) fail("link_masses must be strictly positive");
    if (!(p.link_inertias[i] > 0)) fail("link_inertias must be strictly positive");
    if (!(p.link_com_offsets[i] > 0)) fail("link_com_offsets must be strictly positive");
    if (!(p.damping[i] >= 0)) fail("damping must be non-negative");
    if (!(p.joint_min[i] < p.joint_max[i]))
      fail("joint_limits must satisfy min < max");
  }
  for (int i = 0; i < 3; ++i) {
    if (!(p.max_forces[i] > 0)) fail("max_forces must be strictly positive");
  }
  if (!p.moment_arms.allFinite()) fail("moment_arms must be finite");
  if (!(p.gravity >= 0)) fail("gravity must be non-negative");
}

/// Moment arm matrix at configuration q. Constant for this limb design;
/// kept behind this accessor so a configuration-dependent routing can slot in.
inline Mat23 moment_arm_matrix(const LimbParams& p, const Vec2& /*q*/) {
  return p.moment_arms;
}

/// Sign pattern of the tendon routing, entries in {-1, 0, +1}.
inline Mat23 routing_signs(const LimbParams& p) {
  Mat23 s;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      s(i, j) = p.moment_arms(i, j) > 0 ? 1.0 : (p.moment_arms(i, j) < 0 ? -1.0 : 0.0);
  return s;
}

/// Joint torque produced by tendon activations: T = M(q) F0 a.
inline Vec2 torque_from_activations(const LimbParams& p, const LimbState& s,
                                    const ActivationVector& act) {
  return moment_arm_matrix(p, s.q) * p.max_forces.asDiagonal() * act.a;
}

/// Inertia matrix of the two-link chain.
inline Mat2 inertia_matrix(const LimbParams& p, const Vec2& q) {
  const double m1 = p.link_masses[0], m2 = p.link_masses[1];
  const double l1 = p.link_lengths[0];
  const double lc1 = p.link_com_offsets[0], lc2 = p.link_com_offsets[1];
  const double i1 = p.link_inertias[0], i2 = p.link_inertias[1];
  const double c2 = std::cos(q[1]);
  Mat2 m;
  m(0, 0) = i1 + i2 + m1 * lc1 * lc1 +
            m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2);
  m(0, 1) = i2 + m2 * (lc2 * lc2 + l1 * lc2 * c2);
  m(1, 0) = m(0, 1);
  m(1, 1) = i2 + m2 * lc2 * lc2;
  return m;
}

/// Coriolis/centripetal generalized force C(q, dq) dq.
inline Vec2 coriolis_vector(const LimbParams& p, const Vec2& q, const Vec2& dq) {
  const double h = -p.link_masses[1] * p.link_lengths[0] *
                   p.link_com_offsets[1] * std::sin(q[1]);
  return {h * (2.0 * dq[0] * dq[1] + dq[1] * dq[1]), -h * dq[0] * dq[0]};
}

/// Gravity generalized force. Gravity acts along the limb frame's +x axis.
inline Vec2 gravity_vector(const LimbParams& p, const Vec2& q) {
  const double m1 = p.link_masses[0], m2 = p.link_masses[1];
  const double l1 = p.link_lengths[0];
  const double lc1 = p.link_com_offsets[0], lc2 = p.link_com_offsets[1];
  const double g = p.gravity;
  const double s1 = std::sin(q[0]);
  const double s12 = std::sin(q[0] + q[1]);
  return {g * (m1 * lc1 * s1 + m2 * (l1 * s1 + lc2 * s12)),
          g * m2 * lc2 * s12};
}

/// Joint accelerations for applied torque T:
///   I(q) ddq + C(q, dq) dq + B dq + g(q) = T
inline Vec2 forward_dynamics(const LimbParams& p, const LimbState& s,
                             const Vec2& torque) {
  const Mat2 m = inertia_matrix(p, s.q);
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  if (!(std::abs(det) > 1e-15)) {
    throw PlantFault("singular inertia matrix (check limb parameters)");
  }
  const Vec2 rhs = torque - coriolis_vector(p, s.q, s.dq) -
                   p.damping.cwiseProduct(s.dq) - gravity_vector(p, s.q);
  Mat2 inv;
  inv << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
  return (inv * rhs) / det;
}

inline double kinetic_energy(const LimbParams& p, const LimbState& s) {
  return 0.5 * s.dq.dot(inertia_matrix(p, s.q) * s.dq);
}

/// Gravitational potential, zero when all mass sits at the proximal joint.
inline double potential_energy(const LimbParams& p, const Vec2& q) {
  const double m1 = p.link_masses[0], m2 = p.link_masses[1];
  const double l1 = p.link_lengths[0];
  const double lc1 = p.link_com_offsets[0], lc2 = p.link_com_offsets[1];
  const double x1 = lc1 * std::cos(q[0]);
  const double x2 = l1 * std::cos(q[0]) + lc2 * std::cos(q[0] + q[1]);
  return -p.gravity * (m1 * x1 + m2 * x2);
}

inline double total_energy(const LimbParams& p, const LimbState& s) {
  return kinetic_energy(p, s) + potential_energy(p, s.q);
}

/// One fixed-step RK4 integration step under zero-order-hold activations,
/// followed by hard-stop enforcement: a joint outside its limits is clamped
/// to the limit and its velocity zeroed. The returned ddq is the last
/// acceleration the integrator evaluated.
inline LimbState step(const LimbParams& p, const LimbState& s,
                      const ActivationVector& act, double dt) {
  if (!(dt > 0.0) || dt > 2e-3 + 1e-12) {
    throw ConfigError("step: dt must be in (0, 2 ms], got " + std::to_string(dt));
  }
  const ActivationVector a = act.clamped();

  struct Deriv {
    Vec2 dq, ddq;
  };
  auto eval = [&](const Vec2& q, const Vec2& dq) -> Deriv {
    LimbState tmp;
    tmp.q = q;
    tmp.dq = dq;
    const Vec2 torque = torque_from_activations(p, tmp, a);
    return {dq, forward_dynamics(p, tmp, torque)};
  };

  const Deriv k1 = eval(s.q, s.dq);
  const Deriv k2 = eval(s.q + 0.5 * dt * k1.dq, s.dq + 0.5 * dt * k1.ddq);
  const Deriv k3 = eval(s.q + 0.5 * dt * k2.dq, s.dq + 0.5 * dt * k2.ddq);
  const Deriv k4 = eval(s.q + dt * k3.dq, s.dq + dt * k3.ddq);

  LimbState out;
  out.q = s.q + (dt / 6.0) * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq);
  out.dq = s.dq + (dt / 6.0) * (k1.ddq + 2.0 * k2.ddq + 2.0 * k3.ddq + k4.ddq);
  out.ddq = k4.ddq;

  for (int i = 0; i < 2; ++i) {
    if (out.q[i] < p.joint_min[i]) {
      out.q[i] = p.joint_min[i];
      out.dq[i] = 0.0;
    } else if (out.q[i] > p.joint_max[i]) {
      out.q[i] = p.joint_max[i];
      out.dq[i] = 0.0;
    }
  }

  if (!out.q.allFinite() || !out.dq.allFinite() || !out.ddq.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite limb state after step: q=[" << out.q.transpose()
        << "] dq=[" << out.dq.transpose() << "] ddq=[" << out.ddq.transpose()
        << "] a=[" << a.a.transpose() << "]";
    throw PlantFault(msg.str());
  }
  return out;
}

/// Planar forward kinematics of the two-link chain, in the limb frame.
inline Vec2 endpoint_position(const LimbParams& p, const Vec2& q) {
  const double l1 = p.link_lengths[0], l2 = p.link_lengths[1];
  return {l1 * std::cos(q[0]) + l2 * std::cos(q[0] + q[1]),
          l1 * std::sin(q[0]) + l2 * std::sin(q[0] + q[1])};
}

/// Parameters of a limb built as the mirror image of this one (hind limbs).
/// Reflection flips the rotation sense: moment arms negate and the joint
/// ranges negate and swap.
inline LimbParams mirrored(const LimbParams& p) {
  LimbParams m = p;
  m.moment_arms = -p.moment_arms;
  m.joint_min = -p.joint_max;
  m.joint_max = -p.joint_min;
  return m;
}

}  // namespace g2p
