#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>

#include "g2p/limb_dynamics.hpp"
#include "g2p/rng.hpp"

using namespace g2p;

namespace {

constexpr double kPi = std::numbers::pi;

LimbState make_state(double q1, double q2, double dq1, double dq2) {
  LimbState s;
  s.q = Vec2(q1, q2);
  s.dq = Vec2(dq1, dq2);
  return s;
}

Vec2 random_interior_q(const LimbParams& p, rng::Engine& e) {
  Vec2 q;
  for (int i = 0; i < 2; ++i) {
    const double span = p.joint_max[i] - p.joint_min[i];
    q[i] = p.joint_min[i] + span * (0.1 + 0.8 * e.uniform01());
  }
  return q;
}

// Link COM kinematics written out directly, used by the oracles below.
// Deliberately avoids inertia_matrix/gravity_vector so the checks are
// an independent derivation path.
double indep_kinetic(const LimbParams& p, const Vec2& q, const Vec2& dq) {
  const double l1 = p.link_lengths[0];
  const double lc1 = p.link_com_offsets[0], lc2 = p.link_com_offsets[1];
  const double s1 = std::sin(q[0]), c1 = std::cos(q[0]);
  const double s12 = std::sin(q[0] + q[1]), c12 = std::cos(q[0] + q[1]);
  const double v1x = -lc1 * s1 * dq[0];
  const double v1y = lc1 * c1 * dq[0];
  const double w2 = dq[0] + dq[1];
  const double v2x = -l1 * s1 * dq[0] - lc2 * s12 * w2;
  const double v2y = l1 * c1 * dq[0] + lc2 * c12 * w2;
  return 0.5 * p.link_masses[0] * (v1x * v1x + v1y * v1y) +
         0.5 * p.link_masses[1] * (v2x * v2x + v2y * v2y) +
         0.5 * p.link_inertias[0] * dq[0] * dq[0] +
         0.5 * p.link_inertias[1] * w2 * w2;
}

double indep_potential(const LimbParams& p, const Vec2& q) {
  const double x1 = p.link_com_offsets[0] * std::cos(q[0]);
  const double x2 = p.link_lengths[0] * std::cos(q[0]) +
                    p.link_com_offsets[1] * std::cos(q[0] + q[1]);
  return -p.gravity * (p.link_masses[0] * x1 + p.link_masses[1] * x2);
}

// Euler-Lagrange oracle: accelerations recovered numerically from the
// energy functions alone.
//   d/dt (dKE/ddq) - dL/dq = torque - B dq
// KE is quadratic in dq, so central differences over dq are exact and the
// generalized momentum is exactly linear in dq.
Vec2 lagrangian_acceleration(const LimbParams& p, const Vec2& q,
                             const Vec2& dq, const Vec2& torque) {
  // Inner differences over dq hit no truncation error at all (KE is
  // quadratic in dq), so a large step there just suppresses roundoff.
  const double hv = 1e-2;
  const double h = 1e-5;
  auto momentum = [&](const Vec2& qq, const Vec2& v) {
    Vec2 m;
    for (int i = 0; i < 2; ++i) {
      Vec2 vp = v, vm = v;
      vp[i] += hv;
      vm[i] -= hv;
      m[i] = (indep_kinetic(p, qq, vp) - indep_kinetic(p, qq, vm)) / (2.0 * hv);
    }
    return m;
  };

  Mat2 mass;
  for (int j = 0; j < 2; ++j) {
    mass.col(j) = momentum(q, Vec2::Unit(j));
  }

  Vec2 dmom_dq_times_dq = Vec2::Zero();
  Vec2 dlag_dq;
  for (int k = 0; k < 2; ++k) {
    Vec2 qp = q, qm = q;
    qp[k] += h;
    qm[k] -= h;
    dmom_dq_times_dq += (momentum(qp, dq) - momentum(qm, dq)) / (2.0 * h) * dq[k];
    const double lp = indep_kinetic(p, qp, dq) - indep_potential(p, qp);
    const double lm = indep_kinetic(p, qm, dq) - indep_potential(p, qm);
    dlag_dq[k] = (lp - lm) / (2.0 * h);
  }

  const Vec2 rhs =
      torque - p.damping.cwiseProduct(dq) + dlag_dq - dmom_dq_times_dq;
  return mass.colPivHouseholderQr().solve(rhs);
}

// Inertia via COM Jacobians: I = sum_i m_i Jv_i^T Jv_i + I_i Jw_i^T Jw_i.
Mat2 jacobian_inertia(const LimbParams& p, const Vec2& q) {
  const double l1 = p.link_lengths[0];
  const double lc1 = p.link_com_offsets[0], lc2 = p.link_com_offsets[1];
  const double s1 = std::sin(q[0]), c1 = std::cos(q[0]);
  const double s12 = std::sin(q[0] + q[1]), c12 = std::cos(q[0] + q[1]);
  Eigen::Matrix2d jv1, jv2;
  jv1 << -lc1 * s1, 0.0, lc1 * c1, 0.0;
  jv2 << -l1 * s1 - lc2 * s12, -lc2 * s12, l1 * c1 + lc2 * c12, lc2 * c12;
  Eigen::Matrix2d jw1, jw2;
  jw1 << 1.0, 0.0, 0.0, 0.0;
  jw2 << 1.0, 1.0, 1.0, 1.0;
  return p.link_masses[0] * jv1.transpose() * jv1 +
         p.link_masses[1] * jv2.transpose() * jv2 +
         p.link_inertias[0] * jw1 + p.link_inertias[1] * jw2;
}

}  // namespace

TEST_CASE("tendon torque matches an elementwise dense product") {
  const LimbParams p = default_limb_params();
  rng::Engine e(11);
  for (int trial = 0; trial < 200; ++trial) {
    LimbState s = make_state(e.uniform(-1.0, 1.5), e.uniform(0.0, 2.4),
                             e.uniform(-5.0, 5.0), e.uniform(-5.0, 5.0));
    ActivationVector a(e.uniform01(), e.uniform01(), e.uniform01());
    const Vec2 t = torque_from_activations(p, s, a);
    for (int i = 0; i < 2; ++i) {
      double want = 0.0;
      for (int j = 0; j < 3; ++j) {
        want += p.moment_arms(i, j) * p.max_forces[j] * a.a[j];
      }
      REQUIRE(std::abs(t[i] - want) < 1e-15);
    }
  }
}

TEST_CASE("tendon torque is affine in activation") {
  const LimbParams p = default_limb_params();
  rng::Engine e(12);
  LimbState s = make_state(0.3, 1.0, 0.0, 0.0);
  const Vec2 t0 = torque_from_activations(p, s, ActivationVector());
  REQUIRE(t0.norm() == 0.0);
  for (int trial = 0; trial < 100; ++trial) {
    ActivationVector a1(0.5 * e.uniform01(), 0.5 * e.uniform01(),
                        0.5 * e.uniform01());
    ActivationVector a2(0.5 * e.uniform01(), 0.5 * e.uniform01(),
                        0.5 * e.uniform01());
    const Vec2 sum = torque_from_activations(p, s, ActivationVector(a1.a + a2.a));
    const Vec2 parts = torque_from_activations(p, s, a1) +
                       torque_from_activations(p, s, a2) - t0;
    REQUIRE((sum - parts).norm() < 1e-15);
  }
}

TEST_CASE("tendon routing sign pattern") {
  const LimbParams p = default_limb_params();
  const Mat23 s = routing_signs(p);
  Mat23 want;
  want << -1.0, 1.0, -1.0,
           1.0, 0.0, -1.0;
  REQUIRE((s - want).cwiseAbs().maxCoeff() == 0.0);
  const Mat23 m = moment_arm_matrix(p, Vec2(0.7, 0.4));
  REQUIRE((m.cwiseAbs().maxCoeff() == 0.015));
  REQUIRE(m(1, 1) == 0.0);
}

TEST_CASE("forward kinematics reference postures") {
  const LimbParams p = default_limb_params();
  const double reach = p.link_lengths[0] + p.link_lengths[1];

  const Vec2 hang = endpoint_position(p, Vec2(0.0, 0.0));
  REQUIRE(std::abs(hang[0] - reach) < 1e-15);
  REQUIRE(std::abs(hang[1]) < 1e-15);

  const Vec2 swung = endpoint_position(p, Vec2(kPi / 2.0, 0.0));
  REQUIRE(std::abs(swung[0]) < 1e-15);
  REQUIRE(std::abs(swung[1] - reach) < 1e-15);

  // Complex-exponential oracle at a bent posture.
  const Vec2 q(kPi / 4.0, kPi / 4.0);
  const std::complex<double> i(0.0, 1.0);
  const std::complex<double> tip = p.link_lengths[0] * std::exp(i * q[0]) +
                                   p.link_lengths[1] * std::exp(i * (q[0] + q[1]));
  const Vec2 bent = endpoint_position(p, q);
  REQUIRE(std::abs(bent[0] - tip.real()) < 1e-15);
  REQUIRE(std::abs(bent[1] - tip.imag()) < 1e-15);
}

TEST_CASE("inertia matrix matches hand-derived values") {
  const LimbParams p = default_limb_params();

  const Mat2 straight = inertia_matrix(p, Vec2(0.4, 0.0));
  REQUIRE(std::abs(straight(0, 0) - 2.1333333333333333e-3) < 1e-12);
  REQUIRE(std::abs(straight(0, 1) - 6.6666666666666667e-4) < 1e-12);
  REQUIRE(std::abs(straight(1, 0) - 6.6666666666666667e-4) < 1e-12);
  REQUIRE(std::abs(straight(1, 1) - 2.6666666666666667e-4) < 1e-12);

  const Mat2 bent = inertia_matrix(p, Vec2(-0.2, kPi / 2.0));
  REQUIRE(std::abs(bent(0, 0) - 1.3333333333333333e-3) < 1e-12);
  REQUIRE(std::abs(bent(0, 1) - 2.6666666666666667e-4) < 1e-12);
  REQUIRE(std::abs(bent(1, 1) - 2.6666666666666667e-4) < 1e-12);
}

TEST_CASE("inertia matrix matches COM-Jacobian oracle") {
  const LimbParams p = default_limb_params();
  rng::Engine e(13);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec2 q(e.uniform(-3.0, 3.0), e.uniform(-3.0, 3.0));
    const Mat2 got = inertia_matrix(p, q);
    const Mat2 want = jacobian_inertia(p, q);
    REQUIRE((got - want).cwiseAbs().maxCoeff() < 1e-15);
    REQUIRE(std::abs(got(0, 1) - got(1, 0)) == 0.0);
    // Positive definite.
    REQUIRE(got(0, 0) > 0.0);
    REQUIRE(got.determinant() > 0.0);
  }
}

TEST_CASE("zero torque, zero velocity, zero gravity is an equilibrium") {
  LimbParams p = default_limb_params();
  p.gravity = 0.0;
  rng::Engine e(14);
  for (int trial = 0; trial < 50; ++trial) {
    LimbState s;
    s.q = random_interior_q(p, e);
    const Vec2 ddq = forward_dynamics(p, s, Vec2::Zero());
    REQUIRE(ddq.norm() == 0.0);
  }
  // And the straight-down posture is an equilibrium even under gravity.
  p.gravity = 9.81;
  LimbState down;
  const Vec2 ddq = forward_dynamics(p, down, Vec2::Zero());
  REQUIRE(ddq.norm() < 1e-12);
}

TEST_CASE("acceleration matches the energy-based Euler-Lagrange oracle") {
  const LimbParams p = default_limb_params();
  rng::Engine e(15);
  for (int trial = 0; trial < 100; ++trial) {
    LimbState s = make_state(e.uniform(-1.0, 1.5), e.uniform(0.1, 2.3),
                             e.uniform(-6.0, 6.0), e.uniform(-6.0, 6.0));
    ActivationVector a(e.uniform01(), e.uniform01(), e.uniform01());
    const Vec2 torque = torque_from_activations(p, s, a);
    const Vec2 got = forward_dynamics(p, s, torque);
    const Vec2 want = lagrangian_acceleration(p, s.q, s.dq, torque);
    const double scale = std::max(want.norm(), 1.0);
    REQUIRE((got - want).norm() / scale < 1e-6);
  }
}

TEST_CASE("integrator converges at fourth order") {
  const LimbParams p = default_limb_params();
  const ActivationVector act(0.2, 0.45, 0.1);
  const double horizon = 0.2;

  auto simulate = [&](double dt) {
    const int steps = static_cast<int>(std::llround(horizon / dt));
    REQUIRE(std::abs(steps * dt - horizon) < 1e-12);
    LimbState s = make_state(0.1, 0.5, 0.0, 0.0);
    for (int i = 0; i < steps; ++i) {
      s = step(p, s, act, dt);
      // The comparison below assumes smooth dynamics: no hard-stop events.
      REQUIRE(s.q[0] > p.joint_min[0] + 1e-3);
      REQUIRE(s.q[0] < p.joint_max[0] - 1e-3);
      REQUIRE(s.q[1] > p.joint_min[1] + 1e-3);
      REQUIRE(s.q[1] < p.joint_max[1] - 1e-3);
    }
    return s;
  };

  const LimbState coarse = simulate(1e-3);
  const LimbState fine = simulate(0.5e-3);
  const LimbState ref = simulate(1e-3 / 64.0);

  auto err = [&](const LimbState& s) {
    Eigen::Vector4d d;
    d << s.q - ref.q, s.dq - ref.dq;
    return d.norm();
  };
  const double e1 = err(coarse);
  const double e2 = err(fine);
  REQUIRE(e1 > 1e-13);  // above the roundoff floor, so the ratio means something
  const double order = std::log2(e1 / e2);
  INFO("e(dt)=" << e1 << " e(dt/2)=" << e2 << " order=" << order);
  REQUIRE(order >= 3.5);
  REQUIRE(order <= 4.6);
}

TEST_CASE("damped unactuated limb never gains kinetic energy") {
  LimbParams p = default_limb_params();
  p.gravity = 0.0;
  LimbState s = make_state(0.2, 1.2, 3.0, -4.0);
  double ke = kinetic_energy(p, s);
  for (int i = 0; i < 400; ++i) {
    s = step(p, s, ActivationVector(), 1e-3);
    const double next = kinetic_energy(p, s);
    REQUIRE(next <= ke + 1e-9);
    ke = next;
  }
  REQUIRE(ke < 0.9 * kinetic_energy(p, make_state(0.2, 1.2, 3.0, -4.0)));
}

TEST_CASE("undamped free swing conserves energy over 10 seconds") {
  LimbParams p = default_limb_params();
  p.damping = Vec2::Zero();
  // Wide limits keep the swing away from hard stops, which would break
  // conservation by design.
  p.joint_min = Vec2(-10.0, -10.0);
  p.joint_max = Vec2(10.0, 10.0);
  LimbState s = make_state(0.2, 0.3, 0.0, 0.0);
  const double e0 = total_energy(p, s);
  REQUIRE(std::abs(e0) > 0.01);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    s = step(p, s, ActivationVector(), 1e-3);
    REQUIRE(std::abs(s.q[0]) < 9.0);
    REQUIRE(std::abs(s.q[1]) < 9.0);
    worst = std::max(worst, std::abs(total_energy(p, s) - e0));
  }
  INFO("relative drift " << worst / std::abs(e0));
  REQUIRE(worst / std::abs(e0) < 1e-6);
}

TEST_CASE("hard stops clamp position and zero velocity") {
  const LimbParams p = default_limb_params();

  SECTION("proximal flexor drives the joint onto its upper stop") {
    LimbState s = make_state(0.2, 1.2, 0.0, 0.0);
    bool hit = false;
    for (int i = 0; i < 3000; ++i) {
      s = step(p, s, ActivationVector(0.0, 1.0, 0.0), 1e-3);
      REQUIRE(s.q[0] >= p.joint_min[0]);
      REQUIRE(s.q[0] <= p.joint_max[0]);
      if (s.q[0] == p.joint_max[0]) {
        REQUIRE(s.dq[0] == 0.0);
        hit = true;
      }
    }
    REQUIRE(hit);
  }

  SECTION("distal flexor plus proximal extensor reaches both stops") {
    LimbState s = make_state(0.2, 1.2, 0.0, 0.0);
    bool hit_distal = false;
    for (int i = 0; i < 3000; ++i) {
      s = step(p, s, ActivationVector(1.0, 0.0, 0.0), 1e-3);
      if (s.q[1] == p.joint_max[1]) {
        REQUIRE(s.dq[1] == 0.0);
        hit_distal = true;
      }
    }
    REQUIRE(hit_distal);
  }
}

TEST_CASE("states remain within joint limits under random activation") {
  const LimbParams p = default_limb_params();
  rng::Engine e(16);
  LimbState s = make_state(0.2, 1.2, 0.0, 0.0);
  for (int i = 0; i < 5000; ++i) {
    ActivationVector a(e.uniform01(), e.uniform01(), e.uniform01());
    s = step(p, s, a, 1e-3);
    REQUIRE(s.q[0] >= p.joint_min[0]);
    REQUIRE(s.q[0] <= p.joint_max[0]);
    REQUIRE(s.q[1] >= p.joint_min[1]);
    REQUIRE(s.q[1] <= p.joint_max[1]);
  }
}

TEST_CASE("activations are clamped before use") {
  const LimbParams p = default_limb_params();
  LimbState s = make_state(0.2, 1.2, 0.5, -0.5);
  const LimbState a = step(p, s, ActivationVector(1.7, -0.4, 0.3), 1e-3);
  const LimbState b = step(p, s, ActivationVector(1.0, 0.0, 0.3), 1e-3);
  REQUIRE((a.q - b.q).norm() == 0.0);
  REQUIRE((a.dq - b.dq).norm() == 0.0);
  REQUIRE((a.ddq - b.ddq).norm() == 0.0);
}

TEST_CASE("mirrored limb produces mirror-image motion") {
  const LimbParams p = default_limb_params();
  const LimbParams m = mirrored(p);
  REQUIRE(m.joint_min[0] == -p.joint_max[0]);
  REQUIRE(m.joint_max[0] == -p.joint_min[0]);
  REQUIRE((m.moment_arms + p.moment_arms).cwiseAbs().maxCoeff() == 0.0);

  rng::Engine e(17);
  LimbState sp = make_state(0.3, 0.9, 0.4, -0.2);
  LimbState sm = make_state(-0.3, -0.9, -0.4, 0.2);
  for (int i = 0; i < 1000; ++i) {
    ActivationVector a(e.uniform01(), e.uniform01(), e.uniform01());
    sp = step(p, sp, a, 1e-3);
    sm = step(m, sm, a, 1e-3);
    REQUIRE((sm.q + sp.q).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((sm.dq + sp.dq).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((sm.ddq + sp.ddq).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("fixed point at rest without gravity") {
  LimbParams p = default_limb_params();
  p.gravity = 0.0;
  LimbState s = make_state(0.37, 1.11, 0.0, 0.0);
  const LimbState next = step(p, s, ActivationVector(), 1e-3);
  REQUIRE(next.q[0] == s.q[0]);
  REQUIRE(next.q[1] == s.q[1]);
  REQUIRE(next.dq.norm() == 0.0);
  REQUIRE(next.ddq.norm() == 0.0);
}

TEST_CASE("parameter validation rejects bad inputs") {
  auto broken = [](auto mutate) {
    LimbParams p = default_limb_params();
    mutate(p);
    return p;
  };
  REQUIRE_THROWS_AS(
      validate(broken([](LimbParams& p) { p.link_masses[0] = 0.0; })),
      ConfigError);
  REQUIRE_THROWS_AS(
      validate(broken([](LimbParams& p) { p.link_lengths[1] = -0.1; })),
      ConfigError);
  REQUIRE_THROWS_AS(
      validate(broken([](LimbParams& p) { p.damping[0] = -1e-9; })),
      ConfigError);
  REQUIRE_THROWS_AS(
      validate(broken([](LimbParams& p) { p.joint_min[1] = p.joint_max[1]; })),
      ConfigError);
  REQUIRE_THROWS_AS(
      validate(broken([](LimbParams& p) { p.max_forces[2] = 0.0; })),
      ConfigError);
  REQUIRE_THROWS_AS(
      validate(broken([](LimbParams& p) { p.gravity = -9.81; })),
      ConfigError);
  REQUIRE_THROWS_AS(
      validate(broken([](LimbParams& p) { p.moment_arms(0, 0) = NAN; })),
      ConfigError);
  REQUIRE_NOTHROW(validate(default_limb_params()));
}

TEST_CASE("step rejects out-of-range dt") {
  const LimbParams p = default_limb_params();
  LimbState s;
  REQUIRE_THROWS_AS(step(p, s, ActivationVector(), 0.0), ConfigError);
  REQUIRE_THROWS_AS(step(p, s, ActivationVector(), -1e-3), ConfigError);
  REQUIRE_THROWS_AS(step(p, s, ActivationVector(), 2.5e-3), ConfigError);
  REQUIRE_NOTHROW(step(p, s, ActivationVector(), 2e-3));
  REQUIRE_NOTHROW(step(p, s, ActivationVector(), 1e-3));
}
