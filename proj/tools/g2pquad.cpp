// g2pquad: motor-babbling + refinement experiments on a simulated
// tendon-driven quadruped, with resumable run directories and CSV exports.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "g2p/checkpoint.hpp"
#include "g2p/config.hpp"
#include "g2p/pipeline.hpp"
#include "g2p/run_io.hpp"

namespace fs = std::filesystem;
using namespace g2p;

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

struct Flags {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  double cycle_period = 0.0;
  double babble_duration = 0.0;
  double feedback_gain = 0.0;
  int refinements = 0;
  bool resume = false;
  bool with_babble = false;
  std::string what;
  int refinement = -1;
  std::string seeds_csv;
};

void add_common_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_path, "config file (key = value INI)");
  sub->add_option("--seed", f.seed, "master seed [run.seed]");
  sub->add_option("--out", f.out, "run directory [run.out]");
  sub->add_option("--cycle-period", f.cycle_period,
                  "task cycle period, s [task.cycle_period]");
  sub->add_option("--babble-duration", f.babble_duration,
                  "babble length, s [babble.duration]");
  sub->add_option("--refinements", f.refinements,
                  "number of refinements [refine.count]");
  sub->add_option("--feedback-gain", f.feedback_gain,
                  "joint-error feedback gain [refine.feedback_gain]");
}

/// Defaults, then the config file, then explicit flags.
ExperimentConfig effective_config(const CLI::App* sub, const Flags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg = load_config_file(f.config_path);
  if (sub->count("--seed")) cfg.seed = f.seed;
  if (sub->count("--out")) cfg.out = f.out;
  if (sub->count("--cycle-period")) cfg.cycle_period = f.cycle_period;
  if (sub->count("--babble-duration")) cfg.babble.duration = f.babble_duration;
  if (sub->count("--refinements")) cfg.refine.count = f.refinements;
  if (sub->count("--feedback-gain")) cfg.refine.feedback_gain = f.feedback_gain;
  return cfg;
}

std::string require_out(const ExperimentConfig& cfg) {
  if (cfg.out.empty()) {
    throw ConfigError("no run directory: pass --out or set [run] out");
  }
  return cfg.out;
}

/// Everything that defines the physics and learning, with run-identity
/// fields (directory, refinement count) blanked. Two runs with equal
/// fingerprints are continuations of one another.
std::string config_fingerprint(ExperimentConfig cfg) {
  cfg.out.clear();
  cfg.refine.count = 0;
  std::ostringstream ss;
  write_config(cfg, ss);
  return ss.str();
}

void append_timing(const RunPaths& paths, const std::string& label,
                   double seconds) {
  std::ofstream os(paths.timings(), std::ios::app);
  if (os) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " wall_s=%.3f", seconds);
    os << label << buf << '\n';
  }
}

struct RunState {
  ProtocolConfig pc;
  Plant plant;
  Learners learners;

  explicit RunState(const ExperimentConfig& cfg)
      : pc(make_protocol(cfg)),
        plant(pc.limb, pc.seed, pc.noise_std),
        learners(make_learners(pc.learner)) {}
};

/// Runs the babble phase and writes its artifacts. The caller has created
/// the directory and written the config snapshot.
void babble_stage(const ExperimentConfig& cfg, const RunPaths& paths,
                  RunState& st) {
  fs::create_directories(paths.babble_dir());
  const auto t0 = std::chrono::steady_clock::now();
  const BabbleResult result = babble_and_fit(st.plant, st.learners,
                                             st.pc.babble, st.pc.learner,
                                             st.pc.seed);
  for (LimbId id : kAllLimbs) {
    const auto li = static_cast<std::size_t>(limb_index(id));
    write_dataset_csv(st.learners.datasets[li],
                      paths.babble_dir() /
                          (std::string("dataset_") + limb_name(id) + ".csv"));
  }
  save_maps(st.learners, paths.babble_dir());
  save_plant_state(st.plant, paths.babble_dir() / "plant_state.txt");
  {
    std::ofstream os(paths.babble_dir() / "metrics.txt", std::ios::binary);
    os << "samples_per_limb = " << result.samples_per_limb << '\n';
    const std::vector<std::string> names = map_filenames(st.learners.single);
    for (std::size_t i = 0; i < result.fit.size(); ++i) {
      const std::string tag =
          names[i].substr(4, names[i].size() - 9);  // map_<tag>.json
      os << "final_mse_" << tag << " = "
         << g2p::detail::g17(result.fit[i].final_mse) << '\n';
    }
  }
  write_status(paths.status(), RunStatus{"babble", -1});
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  append_timing(paths, "babble", wall);
  std::cerr << "babble: " << result.samples_per_limb
            << " samples/limb over " << cfg.babble.duration << " s";
  for (std::size_t i = 0; i < result.fit.size(); ++i) {
    std::cerr << (i == 0 ? ", fit MSE " : ", ")
              << result.fit[i].final_mse;
  }
  std::cerr << '\n';
}

/// Reconstructs plant, maps, and cumulative datasets from disk.
/// `last` is the last completed refinement, -1 if only babbling finished.
void load_run_state(const RunPaths& paths, RunState& st, int last) {
  const fs::path stage_dir =
      last < 0 ? paths.babble_dir() : paths.refinement_dir(last);
  for (LimbId id : kAllLimbs) {
    const auto li = static_cast<std::size_t>(limb_index(id));
    st.learners.datasets[li] = read_dataset_csv(
        paths.babble_dir() /
        (std::string("dataset_") + limb_name(id) + ".csv"));
  }
  for (int k = 1; k <= last; ++k) {
    for (LimbId id : kAllLimbs) {
      const auto li = static_cast<std::size_t>(limb_index(id));
      const Dataset appended = read_dataset_csv(
          paths.refinement_dir(k) /
          (std::string("appended_") + limb_name(id) + ".csv"));
      st.learners.datasets[li].insert(st.learners.datasets[li].end(),
                                      appended.begin(), appended.end());
    }
  }
  load_maps(st.learners, stage_dir);
  load_plant_state(st.plant, stage_dir / "plant_state.txt");
}

/// Runs refinements `first..cfg.refine.count` inclusive and persists each
/// one before moving on, so an interrupted run restarts where it stopped.
void refine_stage(const ExperimentConfig& cfg, const RunPaths& paths,
                  RunState& st, int first) {
  fs::create_directories(paths.refine_dir());
  const DesiredKinematics des = sample_trajectory(st.pc.task);
  for (int k = first; k <= cfg.refine.count; ++k) {
    const std::array<std::size_t, 4> before{
        st.learners.datasets[0].size(), st.learners.datasets[1].size(),
        st.learners.datasets[2].size(), st.learners.datasets[3].size()};
    const AttemptRecord rec = run_refinement(
        st.plant, st.learners, des, st.pc.learner, st.pc.refine, k, st.pc.seed);
    const fs::path dir = paths.refinement_dir(k);
    fs::create_directories(dir);
    if (k >= 1) {
      for (LimbId id : kAllLimbs) {
        const auto li = static_cast<std::size_t>(limb_index(id));
        const Dataset& d = st.learners.datasets[li];
        const Dataset appended(
            d.begin() + static_cast<std::ptrdiff_t>(before[li]), d.end());
        write_dataset_csv(appended, dir / (std::string("appended_") +
                                           limb_name(id) + ".csv"));
      }
    }
    save_maps(st.learners, dir);
    save_plant_state(st.plant, dir / "plant_state.txt");
    if (cfg.save_trajectories) {
      write_trajectory_csv(rec, dir / "trajectory.csv");
    }
    append_rmse_row(paths.rmse_table(), k, rec.rmse);
    write_status(paths.status(), RunStatus{"refine", k});
    append_timing(paths, dir.filename().string(), rec.wall_seconds);
    std::fprintf(stderr,
                 "refinement %2d/%d: aggregate RMSE %.4f rad (%.1f deg)\n", k,
                 cfg.refine.count, rec.rmse.aggregate,
                 kDeg * rec.rmse.aggregate);
  }
  write_status(paths.status(), RunStatus{"complete", cfg.refine.count});
}

int cmd_babble(const CLI::App* sub, const Flags& f) {
  ExperimentConfig cfg = effective_config(sub, f);
  cfg.out = require_out(cfg);
  const RunPaths paths{fs::path(cfg.out)};
  if (try_read_status(paths.status())) {
    throw ConfigError("run directory " + cfg.out +
                      " already holds a run; use a fresh --out");
  }
  fs::create_directories(paths.root);
  write_config_file(cfg, paths.config().string());
  RunState st(cfg);
  babble_stage(cfg, paths, st);
  return 0;
}

int cmd_refine(const CLI::App* sub, const Flags& f) {
  if (f.resume) {
    for (const char* opt :
         {"--config", "--seed", "--cycle-period", "--babble-duration",
          "--feedback-gain"}) {
      if (sub->count(opt)) {
        throw ConfigError(std::string("--resume continues the run as "
                                      "configured; ") +
                          opt + " is not allowed (only --refinements may "
                                "extend it)");
      }
    }
  }
  ExperimentConfig cfg = effective_config(sub, f);
  const std::string out = require_out(cfg);
  const RunPaths paths{fs::path(out)};
  const auto status = try_read_status(paths.status());

  if (f.resume) {
    if (!status) {
      throw ConfigError("nothing to resume: " + out + " holds no run");
    }
    cfg = load_config_file(paths.config().string());
    cfg.out = out;
    if (sub->count("--refinements")) cfg.refine.count = f.refinements;
  }

  int first = 0;
  RunState st(cfg);
  if (!status) {
    if (!f.with_babble) {
      throw ConfigError(out + " holds no babble artifacts; run the babble " +
                        "command first or pass --with-babble");
    }
    fs::create_directories(paths.root);
    write_config_file(cfg, paths.config().string());
    babble_stage(cfg, paths, st);
  } else if (status->stage == "babble") {
    const ExperimentConfig snapshot = load_config_file(paths.config().string());
    if (config_fingerprint(cfg) != config_fingerprint(snapshot)) {
      throw ConfigError("config does not match the snapshot in " + out +
                        "; rerun with the same config or a fresh --out");
    }
    write_config_file(cfg, paths.config().string());
    load_run_state(paths, st, -1);
  } else {
    if (!f.resume) {
      throw ConfigError(out + " already holds refinement results; pass "
                              "--resume to continue it");
    }
    if (status->last_refinement >= cfg.refine.count) {
      if (status->stage != "complete") {
        write_status(paths.status(), RunStatus{"complete", cfg.refine.count});
      }
      std::cerr << "nothing to do: " << status->last_refinement + 1
                << " attempts already recorded\n";
      return 0;
    }
    write_config_file(cfg, paths.config().string());
    load_run_state(paths, st, status->last_refinement);
    first = status->last_refinement + 1;
  }
  refine_stage(cfg, paths, st, first);
  return 0;
}

int cmd_export(const std::string& out, const std::string& what,
               int refinement) {
  if (out.empty()) throw ConfigError("export: pass --out <run directory>");
  const RunPaths paths{fs::path(out)};
  if (!fs::exists(paths.config())) {
    throw ConfigError("export: " + out + " has no config.ini; not a run "
                                         "directory");
  }
  fs::create_directories(paths.export_dir());
  if (what == "rmse") {
    const auto rows = read_rmse_table(paths.rmse_table());
    const fs::path dst = paths.export_dir() / "rmse_deg.csv";
    write_rmse_degrees_csv(rows, dst);
    std::cerr << "wrote " << dst.string() << " (" << rows.size() << " rows)\n";
    return 0;
  }
  // joints and endpoints need one refinement's trajectory.
  int k = refinement;
  if (k < 0) {
    const auto status = try_read_status(paths.status());
    if (!status || status->stage == "babble") {
      throw ConfigError("export: no refinements recorded in " + out);
    }
    k = status->last_refinement;
  }
  const fs::path traj = paths.refinement_dir(k) / "trajectory.csv";
  if (!fs::exists(traj)) {
    std::string have;
    for (int i = 0; i <= 99; ++i) {
      if (fs::exists(paths.refinement_dir(i) / "trajectory.csv")) {
        have += (have.empty() ? "" : ", ") + std::to_string(i);
      }
    }
    throw ConfigError("export: " + traj.string() + " is missing; " +
                      (have.empty()
                           ? "no trajectories were saved (run with [output] "
                             "save_trajectories = true)"
                           : "available refinements: " + have));
  }
  const AttemptRecord rec = read_trajectory_csv(traj);
  char suffix[16];
  std::snprintf(suffix, sizeof suffix, "_r%02d.csv", k);
  if (what == "joints") {
    const fs::path dst = paths.export_dir() / ("joints" + std::string(suffix));
    write_joints_csv(rec, dst);
    std::cerr << "wrote " << dst.string() << '\n';
  } else {
    const ExperimentConfig cfg = load_config_file(paths.config().string());
    const fs::path dst =
        paths.export_dir() / ("endpoints" + std::string(suffix));
    write_endpoints_csv(rec, make_limb_params(cfg), dst);
    std::cerr << "wrote " << dst.string() << '\n';
  }
  return 0;
}

int cmd_batch(const CLI::App* sub, const Flags& f) {
  ExperimentConfig base = effective_config(sub, f);
  const std::string out = require_out(base);
  if (f.seeds_csv.empty()) {
    throw ConfigError("batch: pass --seeds as a comma-separated list");
  }
  std::vector<std::uint64_t> seeds;
  for (const std::string& tok : g2p::detail::split(f.seeds_csv, ',')) {
    seeds.push_back(g2p::detail::parse_u64(tok, "batch: --seeds"));
  }
  fs::create_directories(out);
  std::vector<std::array<double, 2>> results;  // initial, final aggregate rad
  for (const std::uint64_t seed : seeds) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    cfg.out = (fs::path(out) / ("seed_" + std::to_string(seed))).string();
    const RunPaths paths{fs::path(cfg.out)};
    if (try_read_status(paths.status())) {
      throw ConfigError("batch: " + cfg.out +
                        " already holds a run; use a fresh --out");
    }
    std::cerr << "=== seed " << seed << " -> " << cfg.out << '\n';
    fs::create_directories(paths.root);
    write_config_file(cfg, paths.config().string());
    RunState st(cfg);
    babble_stage(cfg, paths, st);
    refine_stage(cfg, paths, st, 0);
    const auto rows = read_rmse_table(paths.rmse_table());
    results.push_back(
        {rows.front().row.aggregate, rows.back().row.aggregate});
  }
  const fs::path summary = fs::path(out) / "summary.csv";
  std::ofstream os(summary, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + summary.string() + " to write");
  os << "seed,initial_rmse_rad,final_rmse_rad,initial_rmse_deg,final_rmse_deg"
     << '\n';
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    os << seeds[i] << ',' << g2p::detail::g17(results[i][0]) << ','
       << g2p::detail::g17(results[i][1]) << ','
       << g2p::detail::g17(kDeg * results[i][0]) << ','
       << g2p::detail::g17(kDeg * results[i][1]) << '\n';
  }
  std::cerr << "wrote " << summary.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tendon-driven quadruped: babble, refine, export"};
  app.require_subcommand(1);

  Flags f;
  CLI::App* babble = app.add_subcommand(
      "babble", "run motor babbling and fit the initial inverse maps");
  add_common_flags(babble, f);

  CLI::App* refine = app.add_subcommand(
      "refine", "run the refinement loop (expects babble artifacts)");
  add_common_flags(refine, f);
  refine->add_flag("--with-babble", f.with_babble,
                   "run the babble phase first if the directory is fresh");
  refine->add_flag("--resume", f.resume,
                   "continue a partial run from its last completed stage");

  CLI::App* exp = app.add_subcommand("export", "write plot-ready CSV tables");
  exp->add_option("--out", f.out, "run directory")->required();
  exp->add_option("--what", f.what, "endpoints | joints | rmse")
      ->required()
      ->check(CLI::IsMember({"endpoints", "joints", "rmse"}));
  exp->add_option("--refinement", f.refinement,
                  "which refinement to export (default: last)");

  CLI::App* batch = app.add_subcommand(
      "batch", "full runs over several seeds, one directory per seed");
  add_common_flags(batch, f);
  batch->add_option("--seeds", f.seeds_csv,
                    "comma-separated master seeds")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (babble->parsed()) return cmd_babble(babble, f);
    if (refine->parsed()) return cmd_refine(refine, f);
    if (exp->parsed()) return cmd_export(f.out, f.what, f.refinement);
    return cmd_batch(batch, f);
  } catch (const TrainingFault& e) {
    std::cerr << "training fault: " << e.what() << " (epoch " << e.epoch
              << ", batch " << e.batch << ")\n";
    return 4;
  } catch (const PlantFault& e) {
    std::cerr << "plant fault: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
