#pragma once
#include <cmath>
#include <cstdint>
#include <random>

namespace cwish {

/// Deterministic random stream with platform-independent output.
///
/// std::mt19937_64 produces an identical bit stream everywhere, but the
/// standard <random> distributions do not; uniform and Gaussian variates are
/// therefore derived here directly from the raw 64-bit stream so that a seed
/// pins every simulated dataset bit-for-bit across compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(mix(seed)) {}

  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (cached spare variate).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    const double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();  // guard log(0)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n) by rejection (unbiased); n >= 1.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  /// Independent child stream; distinct ids give decorrelated streams.
  Rng derive(std::uint64_t id) const {
    return Rng(mix(seed_ + 0x9e3779b97f4a7c15ULL * (id + 1)));
  }

  /// The seed this stream was constructed with.
  std::uint64_t seed() const { return seed_; }

 private:
  // splitmix64 finalizer: spreads low-entropy seeds over the full state space
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cwish
