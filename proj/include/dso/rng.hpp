#pragma once

#include <cstddef>
#include <cstdint>

namespace dso {

// SplitMix64-based generator. Fully specified arithmetic, so sample paths
// are bit-reproducible across platforms for a given 64-bit seed. fork()
// derives independent streams from the original seed, which lets batches
// of sample paths run in parallel with stable per-sample results.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform index in [0, n). Lemire's multiply-shift rejection.
  std::size_t uniform_index(std::size_t n) {
    if (n <= 1) {
      if (n == 1) return 0;
      return 0;  // degenerate; callers guard n >= 1
    }
    const std::uint64_t range = static_cast<std::uint64_t>(n);
    while (true) {
      const std::uint64_t x = next_u64();
      const unsigned __int128 m = static_cast<unsigned __int128>(x) * range;
      const std::uint64_t lo = static_cast<std::uint64_t>(m);
      if (lo < range) {
        const std::uint64_t threshold = (0ull - range) % range;
        if (lo < threshold) continue;
      }
      return static_cast<std::size_t>(m >> 64);
    }
  }

  // Child stream keyed on the original seed, independent of draw position.
  Rng fork(std::uint64_t stream) const {
    std::uint64_t z = seed_ ^ (0xD1B54A32D192ED03ull * (stream + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace dso
