#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "g2p/run_io.hpp"

using namespace g2p;
namespace fs = std::filesystem;

namespace {

const char* binary() {
  const char* bin = std::getenv("G2PQUAD_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

fs::path scratch() {
  static fs::path root = [] {
    fs::path p = fs::temp_directory_path() /
                 ("g2p_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return root;
}

struct CliResult {
  int code = -1;
  std::string output;  // stdout and stderr combined

  bool contains(const std::string& needle) const {
    return output.find(needle) != std::string::npos;
  }
};

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path log = scratch() / ("log_" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string(binary()) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(log);
  std::stringstream ss;
  ss << is.rdbuf();
  r.output = ss.str();
  return r;
}

// Small enough to keep every CLI invocation under a second.
fs::path fast_config() {
  static fs::path path = [] {
    const fs::path p = scratch() / "fast.ini";
    std::ofstream os(p);
    os << "[babble]\nduration = 2\n"
       << "[train]\nhidden_size = 4\nbabble_epochs = 2\nretune_epochs = 1\n"
       << "[refine]\nduration = 2\ncount = 2\nsettle_time = 0.5\n";
    return p;
  }();
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream is(p);
  REQUIRE(is.good());
  std::size_t n = 0;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty()) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("cli parses arguments and reports usage errors") {
  REQUIRE(run_cli("--help").code == 0);
  REQUIRE(run_cli("").code == 2);           // a subcommand is required
  REQUIRE(run_cli("frobnicate").code == 2);
  REQUIRE(run_cli("babble --no-such-flag").code == 2);
  REQUIRE(run_cli("export --out x").code == 2);  // --what is required

  const CliResult no_out = run_cli("babble");
  REQUIRE(no_out.code == 2);
  REQUIRE(no_out.contains("no run directory"));
}

TEST_CASE("bad config keys are rejected with location") {
  const fs::path bad = scratch() / "bad.ini";
  std::ofstream(bad) << "[plant]\nwarp_factor = 9\n";
  const CliResult r = run_cli("babble --config " + bad.string() + " --out " +
                              (scratch() / "never").string());
  REQUIRE(r.code == 2);
  REQUIRE(r.contains("unknown key 'plant.warp_factor'"));
  REQUIRE(r.contains("bad.ini:2"));
  REQUIRE_FALSE(fs::exists(scratch() / "never"));
}

TEST_CASE("babble writes the expected artifacts and refuses to overwrite") {
  const fs::path dir = scratch() / "babble_run";
  const CliResult r = run_cli("babble --config " + fast_config().string() +
                              " --seed 11 --out " + dir.string());
  REQUIRE(r.code == 0);
  const RunPaths paths{dir};
  REQUIRE(fs::exists(paths.config()));
  REQUIRE(slurp(paths.status()) == "stage=babble\n");
  for (const char* limb : {"FL", "FR", "HL", "HR"}) {
    REQUIRE(line_count(paths.babble_dir() /
                       (std::string("dataset_") + limb + ".csv")) == 201);
    REQUIRE(fs::exists(paths.babble_dir() /
                       (std::string("map_") + limb + ".json")));
  }
  REQUIRE(fs::exists(paths.babble_dir() / "plant_state.txt"));
  REQUIRE(fs::exists(paths.babble_dir() / "metrics.txt"));
  REQUIRE(fs::exists(paths.timings()));
  // The snapshot records the effective seed.
  REQUIRE(slurp(paths.config()).find("seed = 11") != std::string::npos);

  const CliResult again = run_cli("babble --config " + fast_config().string() +
                                  " --seed 11 --out " + dir.string());
  REQUIRE(again.code == 2);
  REQUIRE(again.contains("already holds a run"));
}

TEST_CASE("default babble records 30000 samples per limb") {
  const fs::path cfg = scratch() / "quickfit.ini";
  std::ofstream(cfg) << "[train]\nhidden_size = 4\nbabble_epochs = 1\n";
  const fs::path dir = scratch() / "full_babble";
  const CliResult r = run_cli("babble --config " + cfg.string() + " --out " +
                              dir.string());
  REQUIRE(r.code == 0);
  REQUIRE(r.contains("30000 samples/limb"));
  const RunPaths paths{dir};
  REQUIRE(line_count(paths.babble_dir() / "dataset_FL.csv") == 30001);
}

TEST_CASE("a one-minute babble records 6000 samples per limb") {
  const fs::path cfg = scratch() / "quickfit60.ini";
  std::ofstream(cfg) << "[train]\nhidden_size = 4\nbabble_epochs = 1\n";
  const fs::path a = scratch() / "minute_a";
  const fs::path b = scratch() / "minute_b";
  const std::string base = "babble --config " + cfg.string() +
                           " --babble-duration 60 --seed 5 --out ";
  REQUIRE(run_cli(base + a.string()).code == 0);
  REQUIRE(run_cli(base + b.string()).code == 0);
  const RunPaths pa{a}, pb{b};
  REQUIRE(line_count(pa.babble_dir() / "dataset_FL.csv") == 6001);
  // Same seed, same everything: artifacts match byte for byte.
  REQUIRE(slurp(pa.babble_dir() / "dataset_HR.csv") ==
          slurp(pb.babble_dir() / "dataset_HR.csv"));
  REQUIRE(slurp(pa.babble_dir() / "metrics.txt") ==
          slurp(pb.babble_dir() / "metrics.txt"));
  REQUIRE(slurp(pa.babble_dir() / "map_FL.json") ==
          slurp(pb.babble_dir() / "map_FL.json"));
}

TEST_CASE("refine picks up a babble directory and records the rmse table") {
  const fs::path dir = scratch() / "pipeline_run";
  const std::string common =
      " --config " + fast_config().string() + " --seed 21 --out " + dir.string();
  REQUIRE(run_cli("babble" + common).code == 0);

  // A mismatched configuration must not silently continue the run.
  const CliResult wrong = run_cli("refine --config " + fast_config().string() +
                                  " --seed 22 --out " + dir.string());
  REQUIRE(wrong.code == 2);
  REQUIRE(wrong.contains("does not match"));

  const CliResult r = run_cli("refine" + common);
  REQUIRE(r.code == 0);
  const RunPaths paths{dir};
  REQUIRE(slurp(paths.status()) == "stage=complete last=2\n");
  const auto table = read_rmse_table(paths.rmse_table());
  REQUIRE(table.size() == 3);
  for (int k = 0; k <= 2; ++k) {
    REQUIRE(table[k].refinement == k);
    REQUIRE(table[k].row.aggregate > 0.0);
  }
  // Refinement 0 only evaluates: no appended data.
  REQUIRE_FALSE(fs::exists(paths.refinement_dir(0) / "appended_FL.csv"));
  REQUIRE(line_count(paths.refinement_dir(1) / "appended_FL.csv") == 201);
  REQUIRE(fs::exists(paths.refinement_dir(2) / "trajectory.csv"));
  REQUIRE(fs::exists(paths.refinement_dir(2) / "map_HL.json"));

  // Finished runs refuse to run again without --resume, and --resume with
  // nothing left to do is a no-op.
  const CliResult rerun = run_cli("refine" + common);
  REQUIRE(rerun.code == 2);
  REQUIRE(rerun.contains("--resume"));
  const CliResult noop = run_cli("refine --resume --out " + dir.string());
  REQUIRE(noop.code == 0);
  REQUIRE(noop.contains("nothing to do"));
}

TEST_CASE("refine --with-babble runs the whole protocol in one call") {
  const fs::path dir = scratch() / "oneshot_run";
  const CliResult missing =
      run_cli("refine --config " + fast_config().string() + " --out " +
              dir.string());
  REQUIRE(missing.code == 2);
  REQUIRE(missing.contains("--with-babble"));

  const CliResult r = run_cli("refine --with-babble --config " +
                              fast_config().string() + " --seed 31 --out " +
                              dir.string());
  REQUIRE(r.code == 0);
  const RunPaths paths{dir};
  REQUIRE(read_rmse_table(paths.rmse_table()).size() == 3);
  REQUIRE(slurp(paths.status()) == "stage=complete last=2\n");
}

TEST_CASE("an interrupted run resumes bit-exactly") {
  const fs::path full = scratch() / "resume_full";
  const fs::path split = scratch() / "resume_split";
  const std::string cfg = " --config " + fast_config().string() + " --seed 41";

  REQUIRE(run_cli("refine --with-babble" + cfg + " --refinements 4 --out " +
                  full.string()).code == 0);
  REQUIRE(run_cli("refine --with-babble" + cfg + " --refinements 2 --out " +
                  split.string()).code == 0);

  // Flags that would change the run are rejected while resuming.
  const CliResult blocked =
      run_cli("refine --resume --seed 9 --out " + split.string());
  REQUIRE(blocked.code == 2);
  REQUIRE(blocked.contains("--seed"));

  REQUIRE(run_cli("refine --resume --refinements 4 --out " + split.string())
              .code == 0);

  const RunPaths pf{full}, ps{split};
  REQUIRE(slurp(ps.status()) == "stage=complete last=4\n");
  REQUIRE(slurp(pf.rmse_table()) == slurp(ps.rmse_table()));
  for (const char* limb : {"FL", "FR", "HL", "HR"}) {
    const std::string map = std::string("map_") + limb + ".json";
    REQUIRE(slurp(pf.refinement_dir(4) / map) ==
            slurp(ps.refinement_dir(4) / map));
  }
  REQUIRE(slurp(pf.refinement_dir(4) / "plant_state.txt") ==
          slurp(ps.refinement_dir(4) / "plant_state.txt"));
  REQUIRE(slurp(pf.refinement_dir(3) / "appended_HL.csv") ==
          slurp(ps.refinement_dir(3) / "appended_HL.csv"));
}

TEST_CASE("export writes degree tables and per-refinement figures") {
  const fs::path dir = scratch() / "export_run";
  REQUIRE(run_cli("refine --with-babble --config " + fast_config().string() +
                  " --seed 51 --out " + dir.string()).code == 0);
  const RunPaths paths{dir};

  const CliResult rmse = run_cli("export --what rmse --out " + dir.string());
  REQUIRE(rmse.code == 0);
  const fs::path deg_table = paths.export_dir() / "rmse_deg.csv";
  REQUIRE(line_count(deg_table) == 4);  // header + 3 rows
  {
    const auto rad = read_rmse_table(paths.rmse_table());
    std::ifstream is(deg_table);
    std::string header, first;
    std::getline(is, header);
    std::getline(is, first);
    REQUIRE(header.rfind("refinement,", 0) == 0);
    const auto cells = g2p::detail::split(first, ',');
    REQUIRE(cells.size() == 10);
    const double got = g2p::detail::parse_double(cells[9], "deg");
    const double want = rad[0].row.aggregate * 180.0 / 3.14159265358979323846;
    REQUIRE(std::abs(got - want) < 1e-12 * std::max(1.0, std::abs(want)));
  }

  REQUIRE(run_cli("export --what joints --out " + dir.string()).code == 0);
  REQUIRE(line_count(paths.export_dir() / "joints_r02.csv") == 202);

  REQUIRE(run_cli("export --what endpoints --refinement 1 --out " +
                  dir.string()).code == 0);
  REQUIRE(fs::exists(paths.export_dir() / "endpoints_r01.csv"));

  const CliResult missing =
      run_cli("export --what joints --refinement 9 --out " + dir.string());
  REQUIRE(missing.code == 2);
  REQUIRE(missing.contains("available refinements: 0, 1, 2"));

  const CliResult notrun =
      run_cli("export --what rmse --out " + (scratch() / "nowhere").string());
  REQUIRE(notrun.code == 2);
  REQUIRE(notrun.contains("not a run directory"));
}

TEST_CASE("plant faults surface as exit code 3") {
  const fs::path dir = scratch() / "fault_run";
  const std::string common =
      " --config " + fast_config().string() + " --seed 61 --out " + dir.string();
  REQUIRE(run_cli("babble" + common).code == 0);

  // Poison the saved plant state: token 3 is the FL proximal angle.
  const RunPaths paths{dir};
  const fs::path state = paths.babble_dir() / "plant_state.txt";
  std::istringstream in(slurp(state));
  std::string tok, rebuilt;
  int n = 0;
  while (in >> tok) {
    rebuilt += (n == 3 ? std::string("inf") : tok) + " ";
    ++n;
  }
  std::ofstream(state, std::ios::binary) << rebuilt;

  const CliResult r = run_cli("refine" + common);
  REQUIRE(r.code == 3);
  REQUIRE(r.contains("plant fault"));
  REQUIRE(r.contains("limb FL"));
}

TEST_CASE("training divergence surfaces as exit code 4") {
  const fs::path cfg = scratch() / "diverge.ini";
  std::ofstream(cfg) << "[babble]\nduration = 2\n"
                     << "[train]\nhidden_size = 4\nlearning_rate = 1e200\n";
  const CliResult r = run_cli("babble --config " + cfg.string() + " --out " +
                              (scratch() / "diverge_run").string());
  REQUIRE(r.code == 4);
  REQUIRE(r.contains("training fault"));
  REQUIRE(r.contains("epoch"));
}

TEST_CASE("batch runs one directory per seed and summarizes") {
  const fs::path dir = scratch() / "batch_out";
  const CliResult r = run_cli("batch --config " + fast_config().string() +
                              " --seeds 71,72 --out " + dir.string());
  REQUIRE(r.code == 0);
  for (const char* seed : {"71", "72"}) {
    const RunPaths paths{dir / (std::string("seed_") + seed)};
    REQUIRE(slurp(paths.status()) == "stage=complete last=2\n");
    REQUIRE(read_rmse_table(paths.rmse_table()).size() == 3);
  }
  const fs::path summary = dir / "summary.csv";
  REQUIRE(line_count(summary) == 3);
  std::ifstream is(summary);
  std::string header;
  std::getline(is, header);
  REQUIRE(header ==
          "seed,initial_rmse_rad,final_rmse_rad,initial_rmse_deg,"
          "final_rmse_deg");

  const CliResult again = run_cli("batch --config " + fast_config().string() +
                                  " --seeds 71 --out " + dir.string());
  REQUIRE(again.code == 2);
  REQUIRE(again.contains("already holds a run"));

  const CliResult bad_seed = run_cli("batch --seeds 6,x --out " +
                                     (scratch() / "batch_bad").string());
  REQUIRE(bad_seed.code == 2);
}
