#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace g2p::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Derives an independent sub-stream seed from a master seed and a stream path.
/// Every random consumer in a run gets its own (stream, index) pair so that
/// reordering or parallelizing consumers cannot change any stream's draws.
inline std::uint64_t derive(std::uint64_t master, std::uint64_t stream,
                            std::uint64_t index = 0) {
  std::uint64_t s = splitmix64(master ^ 0x6a09e667f3bcc908ull);
  s = splitmix64(s ^ splitmix64(stream));
  s = splitmix64(s ^ splitmix64(index ^ 0xbb67ae8584caa73bull));
  return s;
}

/// mt19937_64 with explicit double mappings. The standard <random>
/// distributions are implementation-defined, so the mappings here are spelled
/// out to keep streams identical across platforms and library versions.
class Engine {
 public:
  explicit Engine(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller, one cached spare.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 =
        (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  /// Uniform integer in [0, n), rejection-sampled so it is exactly unbiased.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t limit = (~0ull / n) * n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  /// Fisher-Yates shuffle (std::shuffle is implementation-defined).
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // mt19937_64 stream operators are standardized, so engine state survives a
  // save/load round trip exactly. The Box-Muller spare rides along.
  void save(std::ostream& os) const {
    os << gen_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
    os.precision(17);
    os << std::hexfloat << spare_ << std::defaultfloat;
  }

  void load(std::istream& is) {
    int spare_flag = 0;
    is >> gen_ >> spare_flag;
    std::string tok;
    is >> tok;
    spare_ = std::strtod(tok.c_str(), nullptr);
    has_spare_ = spare_flag != 0;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace g2p::rng
