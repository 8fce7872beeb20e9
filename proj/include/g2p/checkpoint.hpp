#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "g2p/errors.hpp"
#include "g2p/inverse_map.hpp"

namespace g2p {

namespace detail {

inline nlohmann::json matrix_rows(const MatX& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline MatX rows_matrix(const nlohmann::json& j, Eigen::Index rows,
                        Eigen::Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ConfigError("checkpoint: " + what + " has wrong row count");
  }
  MatX m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const nlohmann::json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError("checkpoint: " + what + " has wrong column count");
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

template <class Vec>
nlohmann::json vector_values(const Vec& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline VecX values_vector(const nlohmann::json& j, Eigen::Index size,
                          const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size) {
    throw ConfigError("checkpoint: " + what + " has wrong length");
  }
  VecX v(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    v[i] = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

}  // namespace detail

/// JSON checkpoint of one inverse map: weights, optimizer state, and the
/// frozen input scaler. Keys are emitted in sorted order and doubles use the
/// shortest round-trip form, so identical models write identical bytes.
inline void save_inverse_map(const InverseMap& map, std::ostream& os) {
  const InverseMap::AdamState adam = map.adam_state();
  nlohmann::json j;
  j["format"] = "g2p-inverse-map";
  j["version"] = 1;
  j["hidden_size"] = map.hidden_size();
  j["W1"] = detail::matrix_rows(map.W1());
  j["b1"] = detail::vector_values(map.b1());
  j["W2"] = detail::matrix_rows(map.W2());
  j["b2"] = detail::vector_values(map.b2());
  j["adam"] = {{"t", adam.t},
               {"mW1", detail::matrix_rows(adam.mW1)},
               {"vW1", detail::matrix_rows(adam.vW1)},
               {"mb1", detail::vector_values(adam.mb1)},
               {"vb1", detail::vector_values(adam.vb1)},
               {"mW2", detail::matrix_rows(adam.mW2)},
               {"vW2", detail::matrix_rows(adam.vW2)},
               {"mb2", detail::vector_values(adam.mb2)},
               {"vb2", detail::vector_values(adam.vb2)}};
  const Scaler& s = map.scaler();
  nlohmann::json degenerate = nlohmann::json::array();
  for (bool flag : s.degenerate) degenerate.push_back(flag);
  j["scaler"] = {{"factors", detail::vector_values(s.factors)},
                 {"degenerate", degenerate},
                 {"by_variance", s.by_variance}};
  os << j.dump(2) << '\n';
}

inline InverseMap load_inverse_map(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "g2p-inverse-map" ||
        j.at("version").get<int>() != 1) {
      throw ConfigError("checkpoint: unknown format or version");
    }
    const int hidden = j.at("hidden_size").get<int>();
    InverseMap map(hidden);
    const nlohmann::json& ja = j.at("adam");
    InverseMap::AdamState adam;
    adam.t = ja.at("t").get<std::int64_t>();
    adam.mW1 = detail::rows_matrix(ja.at("mW1"), hidden, 6, "adam.mW1");
    adam.vW1 = detail::rows_matrix(ja.at("vW1"), hidden, 6, "adam.vW1");
    adam.mb1 = detail::values_vector(ja.at("mb1"), hidden, "adam.mb1");
    adam.vb1 = detail::values_vector(ja.at("vb1"), hidden, "adam.vb1");
    adam.mW2 = detail::rows_matrix(ja.at("mW2"), 3, hidden, "adam.mW2");
    adam.vW2 = detail::rows_matrix(ja.at("vW2"), 3, hidden, "adam.vW2");
    adam.mb2 = detail::values_vector(ja.at("mb2"), 3, "adam.mb2");
    adam.vb2 = detail::values_vector(ja.at("vb2"), 3, "adam.vb2");
    const nlohmann::json& js = j.at("scaler");
    Scaler scaler;
    scaler.factors = detail::values_vector(js.at("factors"), 6,
                                           "scaler.factors");
    const nlohmann::json& jd = js.at("degenerate");
    if (!jd.is_array() || jd.size() != 6) {
      throw ConfigError("checkpoint: scaler.degenerate has wrong length");
    }
    for (std::size_t i = 0; i < 6; ++i) {
      scaler.degenerate[i] = jd[i].get<bool>();
    }
    scaler.by_variance = js.at("by_variance").get<bool>();
    map.restore(detail::rows_matrix(j.at("W1"), hidden, 6, "W1"),
                detail::values_vector(j.at("b1"), hidden, "b1"),
                detail::rows_matrix(j.at("W2"), 3, hidden, "W2"),
                detail::values_vector(j.at("b2"), 3, "b2"), adam, scaler);
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed contents: ") +
                      e.what());
  }
}

inline void save_inverse_map(const InverseMap& map, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("checkpoint: cannot open " + path + " to write");
  save_inverse_map(map, os);
  if (!os) throw ConfigError("checkpoint: write to " + path + " failed");
}

inline InverseMap load_inverse_map(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("checkpoint: cannot open " + path);
  return load_inverse_map(is);
}

}  // namespace g2p
