#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace kiv {

// All randomness in the library flows through this generator so that runs
// are byte-reproducible across platforms and standard libraries. The
// contract is pinned: mt19937_64 engine, uniforms built as
// (x >> 11) * 2^-53, normals by Box-Muller with the spare value cached,
// bounded integers by rejection sampling, shuffles by Fisher-Yates.
// std::uniform_real_distribution / std::normal_distribution /
// std::shuffle are implementation-defined and deliberately not used.
class Rng {
 public:
  // Recorded in benchmark output metadata; bump if the contract changes.
  static constexpr const char* kIdentity = "mt19937_64/box-muller/v1";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; generates pairs, caches the second.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * kPi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Unbiased integer in [0, bound); bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// SplitMix64 finalizer; full-period bijection on 64-bit words.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Derives an independent seed stream from a base seed and a salt.
// Chaining calls derives streams from multiple salts.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  return splitmix64(splitmix64(base) ^ salt);
}

}  // namespace kiv
