#pragma once

#include <cmath>
#include <cstdint>

namespace gdro {

// Counter-based pseudorandom stream (splitmix64). All randomized code in this
// library draws from one of these with a documented draw order, so any run is
// reproducible bit-for-bit from its seed.
//
// Draw costs are fixed: next_u64/next_unit/next_below consume one 64-bit
// draw, next_gaussian consumes two.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform index in [0, n). Multiply-high range reduction: exactly one draw,
  // bias below n / 2^64.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller (cosine branch only).
  double next_gaussian() {
    double u1 = 1.0 - next_unit();  // (0, 1], keeps log finite
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.28318530717958647692528676655900577 * u2);
  }

  // Derives an independent substream seed from (seed, tag); used for
  // per-group and per-stage streams.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t tag) {
    SplitMix64 h(seed);
    std::uint64_t x = h.next_u64() ^ (tag * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
    SplitMix64 h2(x);
    return h2.next_u64();
  }

 private:
  std::uint64_t state_;
};

}  // namespace gdro
