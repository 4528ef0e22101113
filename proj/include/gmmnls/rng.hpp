#ifndef GMMNLS_RNG_HPP
#define GMMNLS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace gmmnls {

/// Deterministic random source. The engine is the standard-specified
/// mt19937_64; the variate mappings are implemented here so that sequences
/// do not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from (master seed, stream id). Trials each
  /// own one stream, so parallel and serial schedules produce identical
  /// results.
  static Rng stream(std::uint64_t master_seed, std::uint64_t stream_id) {
    std::uint64_t x = master_seed ^ (0x9e3779b97f4a7c15ull * (stream_id + 1));
    return Rng(splitmix64(splitmix64(x)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second variate of a pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace gmmnls

#endif  // GMMNLS_RNG_HPP
