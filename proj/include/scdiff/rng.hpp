#pragma once

#include <cstdint>
#include <cmath>

namespace scdiff {

/// Seedable 64-bit generator used for every random draw in the library.
///
/// The update rule is xoshiro256**: with state s[0..3],
///   result = rotl(s[1] * 5, 7) * 9
///   t = s[1] << 17
///   s[2] ^= s[0]; s[3] ^= s[1]; s[1] ^= s[2]; s[0] ^= s[3]
///   s[2] ^= t;    s[3] = rotl(s[3], 45)
/// The four state words are produced from the seed by iterating splitmix64:
///   z = (x += 0x9E3779B97F4A7C15)
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
/// Gaussian variates come from the Box-Muller transform (see gaussian()).
/// Identical seeds therefore give identical streams on any platform, and
/// the full generator state is exactly the four state words.
class Rng {
 public:
  explicit Rng(uint64_t seed) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  uint64_t next_u64() {
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

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [lo, hi] inclusive, by modulo reduction.
  /// The modulo bias is negligible for the ranges used here (hi - lo + 1
  /// is tiny relative to 2^64).
  uint64_t uniform_int(uint64_t lo, uint64_t hi) {
    return lo + next_u64() % (hi - lo + 1);
  }

  /// Standard normal variate via Box-Muller:
  ///   z = sqrt(-2 ln u1) cos(2 pi u2)
  /// with u1 in (0, 1] so the log is finite. Only the cosine branch is
  /// used; each variate consumes exactly two uniforms, which keeps the
  /// stream position a pure function of the draw count (no cached spare
  /// to lose across checkpoint save/restore).
  double gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Deterministic stream split: stream k of a run seeded with `seed` is
  /// an Rng seeded with seed XOR k. Within one run every k is distinct,
  /// so per-stream results are independent of execution order.
  static Rng split(uint64_t seed, uint64_t stream_index) {
    return Rng(seed ^ stream_index);
  }

  // Raw state access, used to checkpoint and restore a stream exactly.
  void state(uint64_t out[4]) const {
    for (int i = 0; i < 4; ++i) out[i] = s_[i];
  }
  void set_state(const uint64_t in[4]) {
    for (int i = 0; i < 4; ++i) s_[i] = in[i];
  }

  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  uint64_t s_[4] = {};
};

}  // namespace scdiff
