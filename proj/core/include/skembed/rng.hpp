#pragma once

#include <cstdint>

namespace skembed {

/// splitmix64, used to expand seeds into generator state.
struct SplitMix64 {
  std::uint64_t x;
  explicit SplitMix64(std::uint64_t seed) : x(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
};

/// xoshiro256++, one independent stream per simulated path so that results
/// do not depend on how paths are distributed over workers.
class Xoshiro256pp {
 public:
  Xoshiro256pp(std::uint64_t master_seed, std::uint64_t stream) {
    SplitMix64 sm(master_seed ^ (0x9E3779B97F4A7C15ull * (stream + 1)));
    for (auto& w : s_) w = sm.next();
    bits_ = 0;
    nbits_ = 0;
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// uniform double in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// fair coin from a refilled 64-bit pool
  bool coin() {
    if (nbits_ == 0) {
      bits_ = next();
      nbits_ = 64;
    }
    const bool b = bits_ & 1u;
    bits_ >>= 1;
    --nbits_;
    return b;
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }
  std::uint64_t s_[4];
  std::uint64_t bits_;
  int nbits_;
};

}  // namespace skembed
