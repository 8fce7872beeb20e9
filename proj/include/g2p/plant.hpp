#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "g2p/limb_dynamics.hpp"
#include "g2p/rng.hpp"

namespace g2p {

enum class LimbId : int { FL = 0, FR = 1, HL = 2, HR = 3 };

inline constexpr std::array<LimbId, 4> kAllLimbs{LimbId::FL, LimbId::FR,
                                                 LimbId::HL, LimbId::HR};

inline constexpr const char* limb_name(LimbId id) {
  switch (id) {
    case LimbId::FL: return "FL";
    case LimbId::FR: return "FR";
    case LimbId::HL: return "HL";
    case LimbId::HR: return "HR";
  }
  return "??";
}

inline constexpr int limb_index(LimbId id) { return static_cast<int>(id); }

inline constexpr bool is_hind(LimbId id) {
  return id == LimbId::HL || id == LimbId::HR;
}

/// Trot pairing: diagonal limbs move together.
inline constexpr LimbId diagonal_partner(LimbId id) {
  switch (id) {
    case LimbId::FL: return LimbId::HR;
    case LimbId::FR: return LimbId::HL;
    case LimbId::HL: return LimbId::FR;
    case LimbId::HR: return LimbId::FL;
  }
  return LimbId::FL;
}

/// Twelve activations, three per limb.
struct PlantCommand {
  std::array<ActivationVector, 4> limbs{};
};

/// Sensed kinematics of all four limbs at one control tick.
///
/// Velocities and accelerations are the backward differences of the sensed
/// (noisy) angles over one control period, like an incremental-encoder
/// pipeline would produce; the first samples of a run are zero.
struct PlantObservation {
  std::array<LimbState, 4> limbs{};
  double time = 0.0;  // s, an exact multiple of the control period
};

/// The suspended-in-air quadruped: four independent limbs behind a
/// command/observe interface. Hind limbs are simulated in their mirrored
/// frame (reflected moment arms and joint ranges) and sensed back through a
/// sign flip, so all four limbs share one canonical limb convention at this
/// interface.
class Plant {
 public:
  static constexpr double kControlRate = 100.0;            // Hz
  static constexpr double kControlPeriod = 1.0 / kControlRate;
  static constexpr double kPhysicsDt = 1e-3;               // s
  static constexpr int kSubsteps = 10;

  Plant(const LimbParams& fore_params, std::uint64_t seed, double noise_std)
      : noise_std_(noise_std) {
    if (!(noise_std >= 0.0)) {
      throw ConfigError("plant: noise_std must be non-negative");
    }
    validate(fore_params);
    for (LimbId id : kAllLimbs) {
      LimbUnit& u = unit(id);
      u.mirror = is_hind(id) ? -1.0 : 1.0;
      u.params = is_hind(id) ? mirrored(fore_params) : fore_params;
      u.state.q = 0.5 * (u.params.joint_min + u.params.joint_max);  // mid-range
      u.noise.emplace(rng::derive(seed, kNoiseStream, limb_index(id)));
    }
    // Initial observation at t = 0; derivative history starts at zero.
    for (LimbId id : kAllLimbs) {
      last_obs_.limbs[limb_index(id)] = sense(unit(id), true);
    }
    last_obs_.time = 0.0;
  }

  double noise_std() const { return noise_std_; }
  int tick() const { return tick_; }
  const PlantObservation& last_observation() const { return last_obs_; }

  /// World-frame state (mirrored frame on hind limbs). Test and export hook.
  const LimbState& internal_state(LimbId id) const { return unit(id).state; }
  const LimbParams& limb_params(LimbId id) const { return unit(id).params; }

  /// Advances all limbs `ticks` control periods under zero-order-hold
  /// activations and returns one observation per tick.
  std::vector<PlantObservation> apply(const PlantCommand& cmd, int ticks) {
    if (ticks < 1) throw ConfigError("plant: ticks must be >= 1");
    std::vector<PlantObservation> out;
    out.reserve(static_cast<std::size_t>(ticks));
    for (int t = 0; t < ticks; ++t) {
      for (LimbId id : kAllLimbs) {
        LimbUnit& u = unit(id);
        const ActivationVector a = cmd.limbs[limb_index(id)].clamped();
        try {
          for (int sub = 0; sub < kSubsteps; ++sub) {
            u.state = step(u.params, u.state, a, kPhysicsDt);
          }
        } catch (const PlantFault& e) {
          throw PlantFault(std::string("limb ") + limb_name(id) + " at tick " +
                           std::to_string(tick_ + 1) + ": " + e.what());
        }
      }
      ++tick_;
      PlantObservation obs;
      for (LimbId id : kAllLimbs) {
        obs.limbs[limb_index(id)] = sense(unit(id), false);
      }
      obs.time = tick_ * kControlPeriod;
      last_obs_ = obs;
      out.push_back(obs);
    }
    return out;
  }

  // Full dynamic state (limb states, sensing history, noise streams, tick
  // count) as text, for bit-exact run resumption.
  void save_state(std::ostream& os) const {
    os.precision(17);
    os << std::hexfloat;
    os << "g2p-plant-state 1\n" << tick_ << "\n";
    for (const LimbUnit& u : limbs_) {
      os << u.state.q[0] << ' ' << u.state.q[1] << ' ' << u.state.dq[0] << ' '
         << u.state.dq[1] << ' ' << u.state.ddq[0] << ' ' << u.state.ddq[1]
         << '\n';
      os << u.prev_meas_q[0] << ' ' << u.prev_meas_q[1] << ' '
         << u.prev_meas_dq[0] << ' ' << u.prev_meas_dq[1] << '\n';
      u.noise->save(os);
      os << '\n';
    }
    os << std::defaultfloat;
    for (const LimbState& s : last_obs_.limbs) {
      os << std::hexfloat << s.q[0] << ' ' << s.q[1] << ' ' << s.dq[0] << ' '
         << s.dq[1] << ' ' << s.ddq[0] << ' ' << s.ddq[1] << '\n'
         << std::defaultfloat;
    }
    os << std::hexfloat << last_obs_.time << std::defaultfloat << "\n";
  }

  void load_state(std::istream& is) {
    std::string magic;
    int version = 0;
    is >> magic >> version;
    if (magic != "g2p-plant-state" || version != 1) {
      throw ConfigError("plant state file: bad header");
    }
    is >> tick_;
    auto rd = [&is]() {
      std::string tok;
      is >> tok;
      return std::strtod(tok.c_str(), nullptr);
    };
    for (LimbUnit& u : limbs_) {
      for (int i = 0; i < 2; ++i) u.state.q[i] = rd();
      for (int i = 0; i < 2; ++i) u.state.dq[i] = rd();
      for (int i = 0; i < 2; ++i) u.state.ddq[i] = rd();
      for (int i = 0; i < 2; ++i) u.prev_meas_q[i] = rd();
      for (int i = 0; i < 2; ++i) u.prev_meas_dq[i] = rd();
      u.noise->load(is);
    }
    for (LimbState& s : last_obs_.limbs) {
      for (int i = 0; i < 2; ++i) s.q[i] = rd();
      for (int i = 0; i < 2; ++i) s.dq[i] = rd();
      for (int i = 0; i < 2; ++i) s.ddq[i] = rd();
    }
    last_obs_.time = rd();
    if (!is) throw ConfigError("plant state file: truncated");
  }

 private:
  static constexpr std::uint64_t kNoiseStream = 0x504c414e54ull;  // "PLANT"

  struct LimbUnit {
    LimbParams params;
    LimbState state;
    double mirror = 1.0;
    std::optional<rng::Engine> noise;
    Vec2 prev_meas_q = Vec2::Zero();
    Vec2 prev_meas_dq = Vec2::Zero();
  };

  LimbUnit& unit(LimbId id) { return limbs_[limb_index(id)]; }
  const LimbUnit& unit(LimbId id) const { return limbs_[limb_index(id)]; }

  LimbState sense(LimbUnit& u, bool first) {
    Vec2 meas = u.mirror * u.state.q;
    if (noise_std_ > 0.0) {
      meas[0] += noise_std_ * u.noise->gaussian();
      meas[1] += noise_std_ * u.noise->gaussian();
    }
    LimbState obs;
    obs.q = meas;
    if (first) {
      obs.dq = Vec2::Zero();
      obs.ddq = Vec2::Zero();
    } else {
      obs.dq = (meas - u.prev_meas_q) / kControlPeriod;
      obs.ddq = (obs.dq - u.prev_meas_dq) / kControlPeriod;
    }
    u.prev_meas_q = meas;
    u.prev_meas_dq = obs.dq;
    return obs;
  }

  std::array<LimbUnit, 4> limbs_{};
  PlantObservation last_obs_{};
  double noise_std_ = 0.0;
  int tick_ = 0;
};

}  // namespace g2p
