#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "g2p/checkpoint.hpp"
#include "g2p/pipeline.hpp"
#include "g2p/textio.hpp"

namespace g2p {

/// On-disk layout of one run:
///   config.ini          frozen effective config (reparses to the same run)
///   status.txt          last completed stage, for resume and refuse logic
///   timings.txt         wall-clock log; the one file that is not deterministic
///   babble/             dataset_<limb>.csv, map_*.json, metrics.txt,
///                       plant_state.txt
///   refine/rmse.csv     one row per attempt, radians
///   refine/rNN/         map_*.json, plant_state.txt, appended_<limb>.csv
///                       (N >= 1), trajectory.csv (optional)
///   export/             plot-ready tables, degrees where the figures use them
struct RunPaths {
  std::filesystem::path root;

  explicit RunPaths(std::filesystem::path dir) : root(std::move(dir)) {}

  std::filesystem::path config() const { return root / "config.ini"; }
  std::filesystem::path status() const { return root / "status.txt"; }
  std::filesystem::path timings() const { return root / "timings.txt"; }
  std::filesystem::path babble_dir() const { return root / "babble"; }
  std::filesystem::path refine_dir() const { return root / "refine"; }
  std::filesystem::path rmse_table() const { return refine_dir() / "rmse.csv"; }
  std::filesystem::path export_dir() const { return root / "export"; }

  std::filesystem::path refinement_dir(int k) const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "r%02d", k);
    return refine_dir() / buf;
  }
};

inline constexpr const char* kDatasetHeader =
    "q1,q2,dq1,dq2,ddq1,ddq2,a1,a2,a3,phase";
inline constexpr const char* kRmseHeader =
    "refinement,FL_proximal,FL_distal,FR_proximal,FR_distal,HL_proximal,"
    "HL_distal,HR_proximal,HR_distal,aggregate";

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path.string() + " to write");
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  return is;
}

inline void expect_header(std::ifstream& is, const std::string& expected,
                          const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != expected) {
    throw ConfigError(path.string() + ": expected header '" + expected + "'");
  }
}

}  // namespace detail

inline void write_dataset_csv(const Dataset& data,
                              const std::filesystem::path& path) {
  std::ofstream os = detail::open_out(path);
  os << kDatasetHeader << '\n';
  for (const KinematicSample& s : data) {
    for (int j = 0; j < 6; ++j) os << detail::g17(s.input[j]) << ',';
    for (int j = 0; j < 3; ++j) os << detail::g17(s.target[j]) << ',';
    os << s.phase << '\n';
  }
  if (!os) throw ConfigError("write to " + path.string() + " failed");
}

inline Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream is = detail::open_in(path);
  detail::expect_header(is, kDatasetHeader, path);
  Dataset out;
  std::string line;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> cells = detail::split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != 10) {
      throw ConfigError(where + ": expected 10 columns");
    }
    KinematicSample s;
    for (int j = 0; j < 6; ++j) {
      s.input[j] = detail::parse_double(cells[static_cast<std::size_t>(j)],
                                        where);
    }
    for (int j = 0; j < 3; ++j) {
      s.target[j] =
          detail::parse_double(cells[static_cast<std::size_t>(6 + j)], where);
    }
    s.phase = detail::parse_int(cells[9], where);
    out.push_back(s);
  }
  return out;
}

/// Appends one attempt's row, creating the file with its header first.
inline void append_rmse_row(const std::filesystem::path& path, int refinement,
                            const RmseRow& row) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream os(path, std::ios::binary | std::ios::app);
  if (!os) throw ConfigError("cannot open " + path.string() + " to write");
  if (fresh) os << kRmseHeader << '\n';
  os << refinement;
  for (double v : row.per_joint) os << ',' << detail::g17(v);
  os << ',' << detail::g17(row.aggregate) << '\n';
  if (!os) throw ConfigError("write to " + path.string() + " failed");
}

struct RmseTableEntry {
  int refinement = 0;
  RmseRow row;
};

inline std::vector<RmseTableEntry> read_rmse_table(
    const std::filesystem::path& path) {
  std::ifstream is = detail::open_in(path);
  detail::expect_header(is, kRmseHeader, path);
  std::vector<RmseTableEntry> out;
  std::string line;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> cells = detail::split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != 10) {
      throw ConfigError(where + ": expected 10 columns");
    }
    RmseTableEntry e;
    e.refinement = detail::parse_int(cells[0], where);
    for (std::size_t j = 0; j < 8; ++j) {
      e.row.per_joint[j] = detail::parse_double(cells[j + 1], where);
    }
    e.row.aggregate = detail::parse_double(cells[9], where);
    out.push_back(e);
  }
  return out;
}

inline std::string trajectory_header() {
  std::string h = "t";
  for (LimbId id : kAllLimbs) {
    const std::string name = limb_name(id);
    h += "," + name + "_qd_prox," + name + "_qd_dist," + name + "_qo_prox," +
         name + "_qo_dist," + name + "_a0," + name + "_a1," + name + "_a2";
  }
  return h;
}

/// One row per sample: desired and observed angles plus the activations
/// applied over the step that arrived at the sample (zeros on the first row,
/// where nothing has been applied yet).
inline void write_trajectory_csv(const AttemptRecord& rec,
                                 const std::filesystem::path& path) {
  std::ofstream os = detail::open_out(path);
  os << trajectory_header() << '\n';
  const std::size_t n = rec.time.size();
  for (std::size_t k = 0; k < n; ++k) {
    os << detail::g17(rec.time[k]);
    for (std::size_t li = 0; li < 4; ++li) {
      os << ',' << detail::g17(rec.desired_q[li][k][0]) << ','
         << detail::g17(rec.desired_q[li][k][1]) << ','
         << detail::g17(rec.achieved_q[li][k][0]) << ','
         << detail::g17(rec.achieved_q[li][k][1]);
      const Vec3 a = k == 0 ? Vec3::Zero() : rec.activations[li][k - 1];
      os << ',' << detail::g17(a[0]) << ',' << detail::g17(a[1]) << ','
         << detail::g17(a[2]);
    }
    os << '\n';
  }
  if (!os) throw ConfigError("write to " + path.string() + " failed");
}

inline AttemptRecord read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream is = detail::open_in(path);
  detail::expect_header(is, trajectory_header(), path);
  AttemptRecord rec;
  std::string line;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> cells = detail::split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != 29) {
      throw ConfigError(where + ": expected 29 columns");
    }
    auto cell = [&](std::size_t j) {
      return detail::parse_double(cells[j], where);
    };
    rec.time.push_back(cell(0));
    for (std::size_t li = 0; li < 4; ++li) {
      const std::size_t base = 1 + li * 7;
      rec.desired_q[li].emplace_back(cell(base), cell(base + 1));
      rec.achieved_q[li].emplace_back(cell(base + 2), cell(base + 3));
      if (lineno > 2) {
        rec.activations[li].emplace_back(cell(base + 4), cell(base + 5),
                                         cell(base + 6));
      }
    }
  }
  if (rec.time.empty()) throw ConfigError(path.string() + ": no samples");
  rec.rmse = evaluate_rmse(rec.desired_q, rec.achieved_q);
  return rec;
}

struct RunStatus {
  std::string stage;          // "babble" | "refine" | "complete"
  int last_refinement = -1;   // meaningful for refine and complete
};

inline void write_status(const std::filesystem::path& path,
                         const RunStatus& s) {
  std::ofstream os = detail::open_out(path);
  os << "stage=" << s.stage;
  if (s.stage != "babble") os << " last=" << s.last_refinement;
  os << '\n';
  if (!os) throw ConfigError("write to " + path.string() + " failed");
}

inline std::optional<RunStatus> try_read_status(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  std::string line;
  if (!std::getline(is, line)) return std::nullopt;
  const std::vector<std::string> parts = detail::split(detail::trim(line), ' ');
  RunStatus s;
  if (parts.empty() || parts[0].rfind("stage=", 0) != 0) {
    throw ConfigError(path.string() + ": malformed status line '" + line + "'");
  }
  s.stage = parts[0].substr(6);
  if (s.stage != "babble" && s.stage != "refine" && s.stage != "complete") {
    throw ConfigError(path.string() + ": unknown stage '" + s.stage + "'");
  }
  if (s.stage != "babble") {
    if (parts.size() != 2 || parts[1].rfind("last=", 0) != 0) {
      throw ConfigError(path.string() + ": missing last= in status");
    }
    s.last_refinement =
        detail::parse_int(parts[1].substr(5), path.string() + ": last");
  }
  return s;
}

inline std::vector<std::string> map_filenames(bool single_map) {
  if (single_map) return {"map_all.json"};
  std::vector<std::string> names;
  for (LimbId id : kAllLimbs) {
    names.push_back(std::string("map_") + limb_name(id) + ".json");
  }
  return names;
}

inline void save_maps(const Learners& L, const std::filesystem::path& dir) {
  const std::vector<std::string> names = map_filenames(L.single);
  for (std::size_t i = 0; i < L.maps.size(); ++i) {
    save_inverse_map(L.maps[i], (dir / names[i]).string());
  }
}

inline void load_maps(Learners& L, const std::filesystem::path& dir) {
  const std::vector<std::string> names = map_filenames(L.single);
  for (std::size_t i = 0; i < L.maps.size(); ++i) {
    InverseMap loaded = load_inverse_map((dir / names[i]).string());
    if (loaded.hidden_size() != L.maps[i].hidden_size()) {
      throw ConfigError("checkpoint " + (dir / names[i]).string() +
                        ": hidden_size " +
                        std::to_string(loaded.hidden_size()) +
                        " does not match the configured " +
                        std::to_string(L.maps[i].hidden_size()));
    }
    L.maps[i] = std::move(loaded);
  }
}

inline void save_plant_state(const Plant& plant,
                             const std::filesystem::path& path) {
  std::ofstream os = detail::open_out(path);
  plant.save_state(os);
  if (!os) throw ConfigError("write to " + path.string() + " failed");
}

inline void load_plant_state(Plant& plant,
                             const std::filesystem::path& path) {
  std::ifstream is = detail::open_in(path);
  plant.load_state(is);
}

// Export tables. Figures use degrees for angles; endpoints stay in meters.

inline void write_joints_csv(const AttemptRecord& rec,
                             const std::filesystem::path& path) {
  std::ofstream os = detail::open_out(path);
  os << "t";
  for (LimbId id : kAllLimbs) {
    const std::string name = limb_name(id);
    os << ',' << name << "_qd_prox_deg," << name << "_qd_dist_deg," << name
       << "_qo_prox_deg," << name << "_qo_dist_deg";
  }
  os << '\n';
  const double deg = 180.0 / std::numbers::pi;
  for (std::size_t k = 0; k < rec.time.size(); ++k) {
    os << detail::g17(rec.time[k]);
    for (std::size_t li = 0; li < 4; ++li) {
      os << ',' << detail::g17(deg * rec.desired_q[li][k][0]) << ','
         << detail::g17(deg * rec.desired_q[li][k][1]) << ','
         << detail::g17(deg * rec.achieved_q[li][k][0]) << ','
         << detail::g17(deg * rec.achieved_q[li][k][1]);
    }
    os << '\n';
  }
  if (!os) throw ConfigError("write to " + path.string() + " failed");
}

inline void write_endpoints_csv(const AttemptRecord& rec,
                                const LimbParams& params,
                                const std::filesystem::path& path) {
  std::ofstream os = detail::open_out(path);
  os << "t";
  for (LimbId id : kAllLimbs) {
    const std::string name = limb_name(id);
    os << ',' << name << "_xd," << name << "_yd," << name << "_xo," << name
       << "_yo";
  }
  os << '\n';
  for (std::size_t k = 0; k < rec.time.size(); ++k) {
    os << detail::g17(rec.time[k]);
    for (std::size_t li = 0; li < 4; ++li) {
      const Vec2 pd = endpoint_position(params, rec.desired_q[li][k]);
      const Vec2 po = endpoint_position(params, rec.achieved_q[li][k]);
      os << ',' << detail::g17(pd[0]) << ',' << detail::g17(pd[1]) << ','
         << detail::g17(po[0]) << ',' << detail::g17(po[1]);
    }
    os << '\n';
  }
  if (!os) throw ConfigError("write to " + path.string() + " failed");
}

inline void write_rmse_degrees_csv(const std::vector<RmseTableEntry>& rows,
                                   const std::filesystem::path& path) {
  std::ofstream os = detail::open_out(path);
  os << "refinement,FL_proximal_deg,FL_distal_deg,FR_proximal_deg,"
        "FR_distal_deg,HL_proximal_deg,HL_distal_deg,HR_proximal_deg,"
        "HR_distal_deg,aggregate_deg\n";
  const double deg = 180.0 / std::numbers::pi;
  for (const RmseTableEntry& e : rows) {
    os << e.refinement;
    for (double v : e.row.per_joint) os << ',' << detail::g17(deg * v);
    os << ',' << detail::g17(deg * e.row.aggregate) << '\n';
  }
  if (!os) throw ConfigError("write to " + path.string() + " failed");
}

}  // namespace g2p
