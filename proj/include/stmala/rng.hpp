#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace stmala {

// Counter-based generator: the state walks an arithmetic sequence and each
// output is a bijective hash of the state (SplitMix64).  Streams are derived
// by hashing (seed, stream), so replicate chains, the data-generation stream
// and per-mask oracle streams are all independent and reproducible from one
// master seed, on any platform.
inline constexpr const char* kRngDescription = "splitmix64+box-muller";

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(derive_state(seed, stream)) {}

  // Injective in `stream` for a fixed seed, so derived streams never collide.
  static std::uint64_t derive_state(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    (void)detail::splitmix64(s);
    s ^= stream * 0xD1B54A32D192ED03ULL;
    (void)detail::splitmix64(s);
    return s;
  }

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  // Uniform on the open interval (0,1): (k + 0.5) / 2^53 with k in [0, 2^53).
  // Never returns 0, so log(uniform()) is always finite.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  // Unbiased integer in [0, n) via rejection; consumes nothing when n == 1.
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x > limit);
    return x % n;
  }

  // Standard normal via Box-Muller; the paired deviate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace stmala
