#pragma once

#include <fstream>
#include <functional>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "g2p/pipeline.hpp"
#include "g2p/textio.hpp"

namespace g2p {

/// Everything a run needs, flat and serializable. All angles are radians;
/// degrees appear only in exported tables.
struct ExperimentConfig {
  // [run]
  std::uint64_t seed = 0;
  std::string out;
  // [plant]
  double noise_std = 0.002;  // rad
  double gravity = 9.81;
  double link_length = 0.10;
  double link_mass = 0.08;
  double damping = 0.01;
  double moment_arm = 0.015;
  double max_force = 20.0;
  double proximal_min = -std::numbers::pi / 3.0;
  double proximal_max = std::numbers::pi / 2.0;
  double distal_min = 0.0;
  double distal_max = 2.4;
  // [babble]
  BabbleConfig babble{};
  // [train]
  LearnerConfig learner{};
  // [refine]
  RefinementConfig refine{};
  // [task]
  std::string task_kind = "sinusoid";  // or "features"
  double cycle_period = 3.6;
  double proximal_center = 0.1;
  double proximal_amplitude = 0.5;
  double distal_center = 1.2;
  double distal_amplitude = 0.5;
  double joint_phase_shift = std::numbers::pi / 2.0;
  std::vector<Vec2> feature_points;  // exactly 10 when kind = features
  // [output]
  bool save_trajectories = true;
};

namespace detail {

/// "q1,q2; q1,q2; ..." with radians inside each pair.
inline std::vector<Vec2> parse_points(const std::string& value,
                                      const std::string& where) {
  std::vector<Vec2> out;
  std::size_t pos = 0;
  while (pos <= value.size()) {
    std::size_t next = value.find(';', pos);
    if (next == std::string::npos) next = value.size();
    const std::string pair = trim(value.substr(pos, next - pos));
    if (!pair.empty()) {
      const std::size_t comma = pair.find(',');
      if (comma == std::string::npos) {
        throw ConfigError(where + ": point '" + pair +
                          "' is not 'proximal,distal'");
      }
      out.emplace_back(parse_double(pair.substr(0, comma), where),
                       parse_double(pair.substr(comma + 1), where));
    }
    pos = next + 1;
  }
  return out;
}

inline std::string points_string(const std::vector<Vec2>& points) {
  std::string out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i) out += "; ";
    out += g17(points[i][0]) + "," + g17(points[i][1]);
  }
  return out;
}

struct ConfigField {
  const char* section;
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&,
                     const std::string&)>
      set;
  std::function<std::string(const ExperimentConfig&)> get;
};

inline const std::vector<ConfigField>& config_fields() {
  auto dbl = [](double ExperimentConfig::* member) {
    return ConfigField{
        nullptr, nullptr,
        [member](ExperimentConfig& c, const std::string& v,
                 const std::string& w) { c.*member = parse_double(v, w); },
        [member](const ExperimentConfig& c) { return g17(c.*member); }};
  };
  auto field = [&dbl](const char* section, const char* key,
                      double ExperimentConfig::* member) {
    ConfigField f = dbl(member);
    f.section = section;
    f.key = key;
    return f;
  };
  static const std::vector<ConfigField> fields = {
      {"run", "seed",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.seed = parse_u64(v, w);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      {"run", "out",
       [](ExperimentConfig& c, const std::string& v, const std::string&) {
         c.out = trim(v);
       },
       [](const ExperimentConfig& c) { return c.out; }},
      field("plant", "noise_std", &ExperimentConfig::noise_std),
      field("plant", "gravity", &ExperimentConfig::gravity),
      field("plant", "link_length", &ExperimentConfig::link_length),
      field("plant", "link_mass", &ExperimentConfig::link_mass),
      field("plant", "damping", &ExperimentConfig::damping),
      field("plant", "moment_arm", &ExperimentConfig::moment_arm),
      field("plant", "max_force", &ExperimentConfig::max_force),
      field("plant", "proximal_min", &ExperimentConfig::proximal_min),
      field("plant", "proximal_max", &ExperimentConfig::proximal_max),
      field("plant", "distal_min", &ExperimentConfig::distal_min),
      field("plant", "distal_max", &ExperimentConfig::distal_max),
      {"babble", "duration",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.babble.duration = parse_double(v, w);
       },
       [](const ExperimentConfig& c) { return g17(c.babble.duration); }},
      {"babble", "hold_min",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.babble.hold_min = parse_double(v, w);
       },
       [](const ExperimentConfig& c) { return g17(c.babble.hold_min); }},
      {"babble", "hold_max",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.babble.hold_max = parse_double(v, w);
       },
       [](const ExperimentConfig& c) { return g17(c.babble.hold_max); }},
      {"train", "hidden_size",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.learner.hidden_size = parse_int(v, w);
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.learner.hidden_size);
       }},
      {"train", "single_map",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.learner.single_map = parse_bool(v, w);
       },
       [](const ExperimentConfig& c) {
         return std::string(c.learner.single_map ? "true" : "false");
       }},
      {"train", "scale_by_variance",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.learner.scale_by_variance = parse_bool(v, w);
       },
       [](const ExperimentConfig& c) {
         return std::string(c.learner.scale_by_variance ? "true" : "false");
       }},
      {"train", "learning_rate",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.learner.learning_rate = parse_double(v, w);
       },
       [](const ExperimentConfig& c) { return g17(c.learner.learning_rate); }},
      {"train", "beta1",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.learner.beta1 = parse_double(v, w);
       },
       [](const ExperimentConfig& c) { return g17(c.learner.beta1); }},
      {"train", "beta2",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.learner.beta2 = parse_double(v, w);
       },
       [](const ExperimentConfig& c) { return g17(c.learner.beta2); }},
      {"train", "epsilon",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.learner.epsilon = parse_double(v, w);
       },
       [](const ExperimentConfig& c) { return g17(c.learner.epsilon); }},
      {"train", "batch_size",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.learner.batch_size = parse_int(v, w);
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.learner.batch_size);
       }},
      {"train", "babble_epochs",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.learner.babble_epochs = parse_int(v, w);
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.learner.babble_epochs);
       }},
      {"train", "retune_epochs",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.learner.retune_epochs = parse_int(v, w);
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.learner.retune_epochs);
       }},
      {"refine", "count",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.refine.count = parse_int(v, w);
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.refine.count);
       }},
      {"refine", "duration",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.refine.duration = parse_double(v, w);
       },
       [](const ExperimentConfig& c) { return g17(c.refine.duration); }},
      {"refine", "feedback_gain",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.refine.feedback_gain = parse_double(v, w);
       },
       [](const ExperimentConfig& c) { return g17(c.refine.feedback_gain); }},
      {"refine", "settle_time",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.refine.settle_time = parse_double(v, w);
       },
       [](const ExperimentConfig& c) { return g17(c.refine.settle_time); }},
      {"refine", "settle_gain",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.refine.settle_gain = parse_double(v, w);
       },
       [](const ExperimentConfig& c) { return g17(c.refine.settle_gain); }},
      {"task", "kind",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         const std::string kind = trim(v);
         if (kind != "sinusoid" && kind != "features") {
           throw ConfigError(w + ": kind must be 'sinusoid' or 'features'");
         }
         c.task_kind = kind;
       },
       [](const ExperimentConfig& c) { return c.task_kind; }},
      field("task", "cycle_period", &ExperimentConfig::cycle_period),
      field("task", "proximal_center", &ExperimentConfig::proximal_center),
      field("task", "proximal_amplitude",
            &ExperimentConfig::proximal_amplitude),
      field("task", "distal_center", &ExperimentConfig::distal_center),
      field("task", "distal_amplitude", &ExperimentConfig::distal_amplitude),
      field("task", "joint_phase_shift", &ExperimentConfig::joint_phase_shift),
      {"task", "points",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.feature_points = parse_points(v, w);
       },
       [](const ExperimentConfig& c) {
         return points_string(c.feature_points);
       }},
      {"output", "save_trajectories",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.save_trajectories = parse_bool(v, w);
       },
       [](const ExperimentConfig& c) {
         return std::string(c.save_trajectories ? "true" : "false");
       }},
  };
  return fields;
}

}  // namespace detail

/// key = value with [sections]. Full-line comments start with '#' or ';'.
/// Unknown sections and keys are hard errors with file:line diagnostics;
/// a config that parses is a config whose every key took effect.
inline void load_config(std::istream& is, const std::string& name,
                        ExperimentConfig& cfg) {
  const auto& fields = detail::config_fields();
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string where = name + ":" + std::to_string(lineno);
    const std::string body = detail::trim(line);
    if (body.empty() || body[0] == '#' || body[0] == ';') continue;
    if (body.front() == '[') {
      if (body.back() != ']') {
        throw ConfigError(where + ": malformed section header '" + body + "'");
      }
      section = detail::trim(body.substr(1, body.size() - 2));
      bool known = false;
      for (const auto& f : fields) known = known || section == f.section;
      if (!known) {
        throw ConfigError(where + ": unknown section '" + section + "'");
      }
      continue;
    }
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value', got '" + body +
                        "'");
    }
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError(where + ": key '" + key + "' before any [section]");
    }
    const detail::ConfigField* match = nullptr;
    for (const auto& f : fields) {
      if (section == f.section && key == f.key) {
        match = &f;
        break;
      }
    }
    if (!match) {
      throw ConfigError(where + ": unknown key '" + section + "." + key +
                        "'");
    }
    match->set(cfg, value, where + ": key '" + section + "." + key + "'");
  }
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  ExperimentConfig cfg;
  load_config(is, path, cfg);
  return cfg;
}

/// Snapshot that reparses to the identical config: doubles are written with
/// 17 significant digits, which round-trips exactly.
inline void write_config(const ExperimentConfig& cfg, std::ostream& os) {
  const auto& fields = detail::config_fields();
  std::string section;
  for (const auto& f : fields) {
    if (section != f.section) {
      if (!section.empty()) os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    const std::string value = f.get(cfg);
    if (value.empty()) continue;  // unset optional values stay unset
    os << f.key << " = " << value << '\n';
  }
}

inline void write_config_file(const ExperimentConfig& cfg,
                              const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("config: cannot open " + path + " to write");
  write_config(cfg, os);
  if (!os) throw ConfigError("config: write to " + path + " failed");
}

inline LimbParams make_limb_params(const ExperimentConfig& cfg) {
  LimbParams p;
  p.link_lengths = Vec2(cfg.link_length, cfg.link_length);
  p.link_masses = Vec2(cfg.link_mass, cfg.link_mass);
  p.link_com_offsets = 0.5 * p.link_lengths;
  const double inertia =
      cfg.link_mass * cfg.link_length * cfg.link_length / 12.0;
  p.link_inertias = Vec2(inertia, inertia);
  p.damping = Vec2(cfg.damping, cfg.damping);
  const double r = cfg.moment_arm;
  p.moment_arms << -r, r, -r,
                    r, 0.0, -r;
  p.max_forces = Vec3(cfg.max_force, cfg.max_force, cfg.max_force);
  p.joint_min = Vec2(cfg.proximal_min, cfg.distal_min);
  p.joint_max = Vec2(cfg.proximal_max, cfg.distal_max);
  p.gravity = cfg.gravity;
  validate(p);
  return p;
}

inline TrajectorySpec make_task(const ExperimentConfig& cfg) {
  const LimbParams limits = make_limb_params(cfg);
  if (cfg.task_kind == "sinusoid") {
    SinusoidShape shape;
    shape.centers = Vec2(cfg.proximal_center, cfg.distal_center);
    shape.amplitudes = Vec2(cfg.proximal_amplitude, cfg.distal_amplitude);
    shape.joint_phase_shift = cfg.joint_phase_shift;
    return sinusoid_task(limits, shape, cfg.cycle_period,
                         cfg.refine.duration);
  }
  if (cfg.feature_points.size() != 10) {
    throw ConfigError("task: kind = features needs exactly 10 points, got " +
                      std::to_string(cfg.feature_points.size()));
  }
  FeatureOrbit orbit;
  for (std::size_t i = 0; i < 10; ++i) orbit.points[i] = cfg.feature_points[i];
  return feature_orbit_task(limits, orbit, cfg.cycle_period,
                            cfg.refine.duration);
}

inline ProtocolConfig make_protocol(const ExperimentConfig& cfg) {
  ProtocolConfig pc;
  pc.limb = make_limb_params(cfg);
  if (!(cfg.noise_std >= 0.0)) {
    throw ConfigError("plant: noise_std must be non-negative");
  }
  pc.noise_std = cfg.noise_std;
  pc.babble = cfg.babble;
  pc.learner = cfg.learner;
  pc.refine = cfg.refine;
  pc.task = make_task(cfg);
  pc.seed = cfg.seed;
  validate(pc.babble);
  validate(pc.learner);
  validate(pc.refine);
  return pc;
}

}  // namespace g2p
