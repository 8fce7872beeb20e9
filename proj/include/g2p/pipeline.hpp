#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "g2p/inverse_map.hpp"
#include "g2p/limb_dynamics.hpp"
#include "g2p/plant.hpp"
#include "g2p/rng.hpp"
#include "g2p/trajectory.hpp"

namespace g2p {

// Every random consumer draws from its own derived stream so that adding,
// removing, or reordering consumers leaves all other streams untouched.
inline constexpr std::uint64_t kBabbleStream = 0x4241424cull;  // "BABL"
inline constexpr std::uint64_t kInitStream = 0x494e4954ull;    // "INIT"
inline constexpr std::uint64_t kTrainStream = 0x5452414eull;   // "TRAN"

/// Seconds of babble data used to calibrate the input scaler (shorter
/// babbles use everything they have).
inline constexpr double kScalerWindowSeconds = 60.0;

struct BabbleConfig {
  double duration = 300.0;  // s
  double hold_min = 0.1;    // s, shortest activation hold
  double hold_max = 0.5;    // s, longest activation hold
};

struct LearnerConfig {
  int hidden_size = 6;       // per-limb hidden width (24 suits the pooled map)
  bool single_map = false;   // one map trained on all four limbs' data
  bool scale_by_variance = false;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 128;
  int babble_epochs = 50;
  int retune_epochs = 20;
};

struct RefinementConfig {
  int count = 15;
  double duration = 20.0;      // s per attempt
  double feedback_gain = 0.5;  // activation per rad of joint error
  double settle_time = 1.0;    // s of posture reset before each attempt
  double settle_gain = 0.5;    // feedback gain during the reset only
};

inline void validate(const BabbleConfig& cfg) {
  if (!(cfg.duration > 0.0)) throw ConfigError("babble: duration must be > 0");
  if (!(cfg.hold_min > 0.0) || !(cfg.hold_min <= cfg.hold_max)) {
    throw ConfigError("babble: need 0 < hold_min <= hold_max");
  }
}

inline void validate(const LearnerConfig& cfg) {
  if (cfg.hidden_size < 1 || cfg.hidden_size > 1024) {
    throw ConfigError("train: hidden_size out of range [1, 1024]");
  }
  if (!(cfg.learning_rate > 0.0)) {
    throw ConfigError("train: learning_rate must be > 0");
  }
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw ConfigError("train: betas must lie in [0, 1)");
  }
  if (!(cfg.epsilon > 0.0)) throw ConfigError("train: epsilon must be > 0");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.babble_epochs < 0 || cfg.retune_epochs < 0) {
    throw ConfigError("train: epoch counts must be >= 0");
  }
}

inline void validate(const RefinementConfig& cfg) {
  if (cfg.count < 0) throw ConfigError("refine: count must be >= 0");
  if (!(cfg.duration > 0.0)) throw ConfigError("refine: duration must be > 0");
  if (!(cfg.feedback_gain >= 0.0)) {
    throw ConfigError("refine: feedback_gain must be >= 0");
  }
  if (!(cfg.settle_time >= 0.0)) {
    throw ConfigError("refine: settle_time must be >= 0");
  }
  if (!(cfg.settle_gain >= 0.0)) {
    throw ConfigError("refine: settle_gain must be >= 0");
  }
}

/// Twelve independent piecewise-constant activation channels: hold length
/// ~ U[hold_min, hold_max], level ~ U[0, 1]. Channel c of the signal drives
/// tendon c % 3 of limb c / 3.
struct BabbleSignal {
  std::vector<std::array<double, 12>> levels;  // [tick][channel]
};

inline BabbleSignal generate_babble(const BabbleConfig& cfg,
                                    std::uint64_t seed,
                                    double rate = Plant::kControlRate) {
  validate(cfg);
  const auto ticks =
      static_cast<std::size_t>(std::llround(cfg.duration * rate));
  if (ticks == 0) throw ConfigError("babble: duration shorter than one tick");
  BabbleSignal sig;
  sig.levels.assign(ticks, {});
  for (int ch = 0; ch < 12; ++ch) {
    rng::Engine eng(rng::derive(seed, kBabbleStream,
                                static_cast<std::uint64_t>(ch)));
    std::size_t t = 0;
    while (t < ticks) {
      const double hold = eng.uniform(cfg.hold_min, cfg.hold_max);
      const double level = eng.uniform01();
      const auto hold_ticks = static_cast<std::size_t>(
          std::max<long long>(1, std::llround(hold * rate)));
      const std::size_t end = std::min(ticks, t + hold_ticks);
      for (; t < end; ++t) sig.levels[t][static_cast<std::size_t>(ch)] = level;
    }
  }
  return sig;
}

/// (q1, q2, dq1, dq2, ddq1, ddq2), the inverse map's input layout.
inline Vec6 kinematics_vector(const LimbState& s) {
  Vec6 v;
  v << s.q[0], s.q[1], s.dq[0], s.dq[1], s.ddq[0], s.ddq[1];
  return v;
}

/// The learner: one inverse map per limb, or a single pooled map, plus the
/// cumulative per-limb datasets they train on.
struct Learners {
  bool single = false;
  std::vector<InverseMap> maps;
  std::array<Dataset, 4> datasets;

  InverseMap& map_for(LimbId id) {
    return maps[single ? 0 : static_cast<std::size_t>(limb_index(id))];
  }
  const InverseMap& map_for(LimbId id) const {
    return maps[single ? 0 : static_cast<std::size_t>(limb_index(id))];
  }

  Dataset pooled() const {
    Dataset all;
    all.reserve(datasets[0].size() * 4);
    for (const Dataset& d : datasets) all.insert(all.end(), d.begin(), d.end());
    return all;
  }
};

inline Learners make_learners(const LearnerConfig& cfg) {
  validate(cfg);
  Learners out;
  out.single = cfg.single_map;
  const int n = cfg.single_map ? 1 : 4;
  for (int i = 0; i < n; ++i) out.maps.emplace_back(cfg.hidden_size);
  return out;
}

namespace detail {

inline TrainOptions train_options(const LearnerConfig& cfg, int epochs,
                                  std::uint64_t seed) {
  TrainOptions opt;
  opt.epochs = epochs;
  opt.batch_size = cfg.batch_size;
  opt.learning_rate = cfg.learning_rate;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.epsilon = cfg.epsilon;
  opt.seed = seed;
  return opt;
}

/// Trains every map on its cumulative data. `phase` is 0 for the babble fit
/// and the refinement index afterwards; it feeds the seed derivation so each
/// (phase, map) pair shuffles from its own stream.
inline std::vector<TrainReport> fit_all(Learners& L, const LearnerConfig& cfg,
                                        int epochs, std::uint64_t master,
                                        int phase) {
  std::vector<TrainReport> reports;
  auto seed_for = [&](int map_index) {
    return rng::derive(master, kTrainStream,
                       static_cast<std::uint64_t>(phase) * 16 +
                           static_cast<std::uint64_t>(map_index));
  };
  if (L.single) {
    reports.push_back(L.maps[0].train(
        L.pooled(), train_options(cfg, epochs, seed_for(4))));
  } else {
    for (LimbId id : kAllLimbs) {
      const auto li = static_cast<std::size_t>(limb_index(id));
      reports.push_back(L.maps[li].train(
          L.datasets[li], train_options(cfg, epochs, seed_for(limb_index(id)))));
    }
  }
  return reports;
}

}  // namespace detail

struct BabbleResult {
  std::vector<TrainReport> fit;  // one report per map
  std::size_t samples_per_limb = 0;
};

/// Plays the babble through the plant, records (observed kinematics ->
/// applied activation) pairs at the control rate, calibrates each map's
/// scaler on the first minute of data, and fits fresh maps.
inline BabbleResult babble_and_fit(Plant& plant, Learners& L,
                                   const BabbleConfig& bcfg,
                                   const LearnerConfig& lcfg,
                                   std::uint64_t master) {
  validate(lcfg);
  const BabbleSignal sig = generate_babble(bcfg, master);
  const std::size_t ticks = sig.levels.size();
  for (auto& d : L.datasets) d.reserve(d.size() + ticks);
  for (std::size_t k = 0; k < ticks; ++k) {
    PlantCommand cmd;
    for (LimbId id : kAllLimbs) {
      const auto li = static_cast<std::size_t>(limb_index(id));
      cmd.limbs[li] =
          ActivationVector(sig.levels[k][li * 3], sig.levels[k][li * 3 + 1],
                           sig.levels[k][li * 3 + 2]);
    }
    const PlantObservation obs = plant.apply(cmd, 1).front();
    for (LimbId id : kAllLimbs) {
      const auto li = static_cast<std::size_t>(limb_index(id));
      L.datasets[li].push_back(KinematicSample{
          kinematics_vector(obs.limbs[li]), cmd.limbs[li].a, 0});
    }
  }
  const auto window = static_cast<std::size_t>(
      std::llround(kScalerWindowSeconds * Plant::kControlRate));
  const std::size_t win = std::min(ticks, window);
  if (L.single) {
    Dataset slice;
    slice.reserve(4 * win);
    for (const Dataset& d : L.datasets) {
      slice.insert(slice.end(), d.end() - static_cast<std::ptrdiff_t>(ticks),
                   d.end() - static_cast<std::ptrdiff_t>(ticks - win));
    }
    L.maps[0].set_scaler(calibrate_scaler(slice, lcfg.scale_by_variance));
    L.maps[0].init_weights(rng::derive(master, kInitStream, 4));
  } else {
    for (LimbId id : kAllLimbs) {
      const auto li = static_cast<std::size_t>(limb_index(id));
      const Dataset& d = L.datasets[li];
      const Dataset slice(d.end() - static_cast<std::ptrdiff_t>(ticks),
                          d.end() - static_cast<std::ptrdiff_t>(ticks - win));
      L.maps[li].set_scaler(calibrate_scaler(slice, lcfg.scale_by_variance));
      L.maps[li].init_weights(
          rng::derive(master, kInitStream,
                      static_cast<std::uint64_t>(limb_index(id))));
    }
  }
  BabbleResult out;
  out.samples_per_limb = ticks;
  out.fit = detail::fit_all(L, lcfg, lcfg.babble_epochs, master, 0);
  return out;
}

/// delta = gain * S^T (q_des - q_obs): each tendon is recruited in the
/// direction its moment arms say reduces the joint error. The caller clamps
/// after summing with the feedforward term.
inline Vec3 feedback_correction(double gain, const Vec2& q_des,
                                const Vec2& q_obs, const Mat23& signs) {
  return gain * (signs.transpose() * (q_des - q_obs));
}

/// Per-joint tracking RMSE over the last half of the samples (the first half
/// is the transient and is discarded), plus the mean of the eight values.
/// Joint order: FL prox, FL dist, FR prox, FR dist, HL prox, HL dist,
/// HR prox, HR dist.
struct RmseRow {
  std::array<double, 8> per_joint{};
  double aggregate = 0.0;
};

inline RmseRow evaluate_rmse(const std::array<std::vector<Vec2>, 4>& desired,
                             const std::array<std::vector<Vec2>, 4>& achieved) {
  const std::size_t n = desired[0].size();
  if (n == 0) throw ConfigError("rmse: empty series");
  for (std::size_t li = 0; li < 4; ++li) {
    if (desired[li].size() != n || achieved[li].size() != n) {
      throw ConfigError("rmse: desired/achieved length mismatch");
    }
  }
  const std::size_t start = n / 2;
  RmseRow row;
  double sum = 0.0;
  for (std::size_t li = 0; li < 4; ++li) {
    for (int j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t k = start; k < n; ++k) {
        const double d = desired[li][k][j] - achieved[li][k][j];
        acc += d * d;
      }
      const double rmse = std::sqrt(acc / static_cast<double>(n - start));
      row.per_joint[li * 2 + static_cast<std::size_t>(j)] = rmse;
      sum += rmse;
    }
  }
  row.aggregate = sum / 8.0;
  return row;
}

/// One 20 s tracking attempt: what was asked, what happened, what was sent.
/// refinement 0 is the pre-refinement evaluation of the babble-only maps.
struct AttemptRecord {
  int refinement = 0;
  std::vector<double> time;                      // attempt-local, n samples
  std::array<std::vector<Vec2>, 4> desired_q;    // n
  std::array<std::vector<Vec2>, 4> achieved_q;   // n
  std::array<std::vector<Vec3>, 4> activations;  // n - 1, applied over step k
  RmseRow rmse;
  double wall_seconds = 0.0;  // measurement only, never in deterministic files
};

namespace detail {

/// Settle onto the trajectory start, then track it for one attempt.
///
/// Sample pairing: dataset rows map the kinematics observed after a step to
/// the activation applied during it, so the feedforward query for step k uses
/// the desired kinematics at k+1 while the error term compares desired and
/// observed at the current tick. Rows are appended only for real refinements
/// (k >= 1); the refinement-0 evaluation leaves the dataset untouched.
inline AttemptRecord run_attempt(Plant& plant, Learners& L,
                                 const DesiredKinematics& des,
                                 const RefinementConfig& cfg, int k_index) {
  const std::size_t n = des.size();
  if (n < 2) throw ConfigError("refine: trajectory needs at least 2 samples");
  const Mat23 signs = routing_signs(plant.limb_params(LimbId::FL));
  const auto t0 = std::chrono::steady_clock::now();

  const auto settle_steps = static_cast<long long>(
      std::llround(cfg.settle_time * Plant::kControlRate));
  for (long long s = 0; s < settle_steps; ++s) {
    const PlantObservation& obs = plant.last_observation();
    PlantCommand cmd;
    for (LimbId id : kAllLimbs) {
      const auto li = static_cast<std::size_t>(limb_index(id));
      cmd.limbs[li] = ActivationVector(clamp01(feedback_correction(
          cfg.settle_gain, des.q[li][0], obs.limbs[li].q, signs)));
    }
    plant.apply(cmd, 1);
  }

  AttemptRecord rec;
  rec.refinement = k_index;
  rec.time.reserve(n);
  for (std::size_t li = 0; li < 4; ++li) {
    rec.desired_q[li].reserve(n);
    rec.achieved_q[li].reserve(n);
    rec.activations[li].reserve(n - 1);
  }
  rec.time.push_back(des.time[0]);
  for (LimbId id : kAllLimbs) {
    const auto li = static_cast<std::size_t>(limb_index(id));
    rec.desired_q[li].push_back(des.q[li][0]);
    rec.achieved_q[li].push_back(plant.last_observation().limbs[li].q);
  }

  for (std::size_t k = 0; k + 1 < n; ++k) {
    const PlantObservation& obs = plant.last_observation();
    PlantCommand cmd;
    for (LimbId id : kAllLimbs) {
      const auto li = static_cast<std::size_t>(limb_index(id));
      Vec6 ff;
      ff << des.q[li][k + 1][0], des.q[li][k + 1][1], des.dq[li][k + 1][0],
          des.dq[li][k + 1][1], des.ddq[li][k + 1][0], des.ddq[li][k + 1][1];
      const Vec3 fb = feedback_correction(cfg.feedback_gain, des.q[li][k],
                                          obs.limbs[li].q, signs);
      cmd.limbs[li] = ActivationVector(
          clamp01(L.map_for(id).predict(ff) + fb));
    }
    const PlantObservation next = plant.apply(cmd, 1).front();
    rec.time.push_back(des.time[k + 1]);
    for (LimbId id : kAllLimbs) {
      const auto li = static_cast<std::size_t>(limb_index(id));
      rec.desired_q[li].push_back(des.q[li][k + 1]);
      rec.achieved_q[li].push_back(next.limbs[li].q);
      rec.activations[li].push_back(cmd.limbs[li].a);
      if (k_index >= 1) {
        L.datasets[li].push_back(KinematicSample{
            kinematics_vector(next.limbs[li]), cmd.limbs[li].a, k_index});
      }
    }
  }
  rec.rmse = evaluate_rmse(rec.desired_q, rec.achieved_q);
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rec;
}

}  // namespace detail

/// Refinement k: track the task with the current maps, append what happened
/// to the cumulative dataset, and retune every map on it (warm start, the
/// optimizer keeps going from where it was). k = 0 only evaluates.
inline AttemptRecord run_refinement(Plant& plant, Learners& L,
                                    const DesiredKinematics& des,
                                    const LearnerConfig& lcfg,
                                    const RefinementConfig& rcfg, int k,
                                    std::uint64_t master) {
  validate(rcfg);
  if (k < 0) throw ConfigError("refine: negative refinement index");
  AttemptRecord rec;
  try {
    rec = detail::run_attempt(plant, L, des, rcfg, k);
  } catch (const PlantFault& e) {
    throw PlantFault("refinement " + std::to_string(k) + ": " + e.what());
  }
  if (k >= 1) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::fit_all(L, lcfg, lcfg.retune_epochs, master, k);
    rec.wall_seconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  }
  return rec;
}

struct ProtocolConfig {
  LimbParams limb = default_limb_params();
  double noise_std = 0.002;  // rad, angle sensing
  BabbleConfig babble{};
  LearnerConfig learner{};
  RefinementConfig refine{};
  TrajectorySpec task{};  // duration is overridden by refine.duration
  std::uint64_t seed = 0;
};

struct ProtocolResult {
  BabbleResult babble;
  std::vector<AttemptRecord> attempts;  // refine.count + 1 rows, row 0 first
};

/// The whole protocol in one call: babble, fit, evaluate, refine repeatedly.
/// `on_attempt` (record) fires after each attempt, for progress reporting or
/// incremental persistence.
template <class Hook>
ProtocolResult run_protocol(const ProtocolConfig& cfg, Hook&& on_attempt) {
  validate(cfg.babble);
  validate(cfg.learner);
  validate(cfg.refine);
  Plant plant(cfg.limb, cfg.seed, cfg.noise_std);
  Learners learners = make_learners(cfg.learner);
  ProtocolResult result;
  result.babble =
      babble_and_fit(plant, learners, cfg.babble, cfg.learner, cfg.seed);
  TrajectorySpec task = cfg.task;
  task.duration = cfg.refine.duration;
  const DesiredKinematics des = sample_trajectory(task);
  result.attempts.reserve(static_cast<std::size_t>(cfg.refine.count) + 1);
  for (int k = 0; k <= cfg.refine.count; ++k) {
    result.attempts.push_back(run_refinement(plant, learners, des, cfg.learner,
                                             cfg.refine, k, cfg.seed));
    on_attempt(result.attempts.back());
  }
  return result;
}

inline ProtocolResult run_protocol(const ProtocolConfig& cfg) {
  return run_protocol(cfg, [](const AttemptRecord&) {});
}

}  // namespace g2p
