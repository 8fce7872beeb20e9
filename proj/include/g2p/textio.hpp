#pragma once

#include <cctype>
#include <climits>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "g2p/errors.hpp"

namespace g2p::detail {

/// 17 significant digits: enough for strtod to give back the same double.
inline std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = s.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
}

inline double parse_double(const std::string& value, const std::string& where) {
  const std::string v = trim(value);
  if (!v.empty()) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() + v.size() && std::isfinite(d)) return d;
  }
  throw ConfigError(where + ": expected a finite number, got '" + value + "'");
}

inline std::uint64_t parse_u64(const std::string& value,
                               const std::string& where) {
  const std::string v = trim(value);
  if (!v.empty() && v[0] != '-' && v[0] != '+') {
    char* end = nullptr;
    const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() + v.size()) return u;
  }
  throw ConfigError(where + ": expected an unsigned integer, got '" + value +
                    "'");
}

inline int parse_int(const std::string& value, const std::string& where) {
  const std::string v = trim(value);
  if (!v.empty()) {
    char* end = nullptr;
    const long n = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() + v.size() && n >= INT_MIN && n <= INT_MAX) {
      return static_cast<int>(n);
    }
  }
  throw ConfigError(where + ": expected an integer, got '" + value + "'");
}

inline bool parse_bool(const std::string& value, const std::string& where) {
  const std::string v = trim(value);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(where + ": expected true/false, got '" + value + "'");
}

}  // namespace g2p::detail
