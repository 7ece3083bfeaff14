#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "lscnn/errors.hpp"

namespace lscnn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// The one random source used in the numeric path. The stream is fully
// pinned down so that a seed reproduces the same values everywhere:
//   - engine: std::mt19937_64 seeded directly with `seed`
//   - uniform(): top 53 bits of one engine draw, scaled to [0, 1)
//   - normal(): Box-Muller over two uniforms; the sine variate of each
//     pair is cached and returned by the next call
//   - child(k): independent stream derived from (seed, k) via splitmix64;
//     depends only on the constructing seed, never on draws consumed
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Unbiased-enough index in [0, n) via 128-bit multiply-shift.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw ConfigError("uniform_index: n must be positive");
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double normal(double mean, double stddev) {
    if (stddev < 0.0) throw ConfigError("normal: negative standard deviation");
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  Rng child(std::uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x517CC1B727220A95ULL)));
  }

  Rng child(std::string_view tag) const { return child(fnv1a64(tag)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lscnn
