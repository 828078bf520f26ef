#pragma once

#include <cstdint>

#include "nerfgs/common.hpp"
#include "nerfgs/vec.hpp"

namespace nerfgs {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// xoshiro256++ seeded via splitmix64. Self-contained so sequences are
// bit-identical across platforms and standard libraries.
class Rng {
public:
  explicit Rng(uint64_t seed = 0) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  real uniform() { return real(next_u64() >> 11) * real(0x1.0p-53); }

  real uniform(real lo, real hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

  real normal() {
    // Box-Muller; one value per call keeps the stream layout simple.
    real u1 = uniform();
    real u2 = uniform();
    if (u1 <= real(0)) u1 = real(0x1.0p-53);
    return std::sqrt(real(-2) * std::log(u1)) * std::cos(real(6.283185307179586477) * u2);
  }

  Vec3 uniform_vec3(real lo, real hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }

  Vec3 unit_vec3() {
    // Rejection-free: normalize a Gaussian triple.
    Vec3 v{normal(), normal(), normal()};
    real n = v.norm();
    return n > 0 ? v / n : Vec3{1, 0, 0};
  }

  // Independent child stream; (seed, stream, index) choose the branch.
  static Rng split(uint64_t seed, uint64_t stream, uint64_t index = 0) {
    uint64_t st = seed;
    uint64_t a = splitmix64(st);
    st = a ^ (stream * 0x9e3779b97f4a7c15ull + 0x7f4a7c15ull);
    uint64_t b = splitmix64(st);
    st = b ^ (index * 0xbf58476d1ce4e5b9ull + 0x1ce4e5b9ull);
    return Rng(splitmix64(st));
  }

private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

}  // namespace nerfgs
