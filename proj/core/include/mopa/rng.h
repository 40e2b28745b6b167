#pragma once

#include <cmath>
#include <cstdint>

namespace mopa {

// Deterministic pseudo-random source. All distributions are implemented by
// hand so that identical seeds reproduce identical streams regardless of the
// standard library in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // splitmix warm-up avoids correlated low-entropy seeds (0, 1, 2, ...)
    next_u64();
    next_u64();
  }

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // uniform integer in [0, n)
  std::uint64_t uniform_index(std::uint64_t n) {
    // multiply-shift; bias is negligible for n << 2^64
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // standard normal via Box-Muller (no cached spare, two draws per sample)
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // derive an independent child stream
  Rng split(std::uint64_t stream) {
    std::uint64_t s = next_u64();
    return Rng(s ^ (0xD1B54A32D192ED03ull * (stream + 1)));
  }

 private:
  std::uint64_t state_;
};

// stateless mixing helper for per-episode / per-pixel seeds
inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace mopa
