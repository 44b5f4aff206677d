#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "tvts/common.hpp"

namespace tvts {

// xoshiro256** seeded through splitmix64. Hand-rolled so streams are
// bit-identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  // Independent stream keyed by (seed, purpose, a, b). Used so that every
  // sampling decision in the pipeline is a pure function of its coordinates.
  static Rng derive(uint64_t seed, std::string_view purpose, uint64_t a = 0, uint64_t b = 0) {
    uint64_t x = seed;
    x = splitmix64(x) ^ fnv1a64(purpose);
    x = splitmix64(x) ^ a;
    x = splitmix64(x) ^ b;
    return Rng(splitmix64(x));
  }

  uint64_t u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53 random bits.
  double uniform01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n).
  uint64_t below(uint64_t n) {
    if (n == 0) throw ContractError("Rng::below(0)");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x = u64();
    while (x >= limit) x = u64();
    return x % n;
  }

  // Box-Muller; the unused sine branch is dropped to keep the stream simple.
  double normal() {
    const double u1 = (static_cast<double>(u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Normal(0, std) clipped by rejection to +/- clip*std.
  double trunc_normal(double stddev, double clip = 2.0) {
    for (;;) {
      const double z = normal();
      if (std::fabs(z) <= clip) return z * stddev;
    }
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Uniformly random permutation of {0, ..., k-1}.
  std::vector<int> permutation(int k) {
    std::vector<int> p(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) p[static_cast<size_t>(i)] = i;
    shuffle(p);
    return p;
  }

  std::array<uint64_t, 4> state() const { return {s_[0], s_[1], s_[2], s_[3]}; }
  void set_state(const std::array<uint64_t, 4>& st) {
    for (int i = 0; i < 4; ++i) s_[i] = st[static_cast<size_t>(i)];
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9E3779B97f4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  uint64_t s_[4];
};

}  // namespace tvts
