#pragma once

#include <cstdint>
#include <random>

namespace contactservo {

/// Mixes an arbitrary number of 64-bit words into one stream key
/// (splitmix64 finalizer). Used to derive independent, order-insensitive
/// RNG streams from (seed, episode, step, purpose) tuples.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t stream_key(uint64_t a) { return mix64(a); }
template <typename... Rest>
uint64_t stream_key(uint64_t a, Rest... rest) {
  return mix64(a ^ stream_key(static_cast<uint64_t>(rest)...));
}

/// Deterministic per-purpose generator; the key fully determines the draw
/// sequence regardless of what other streams were used before.
class RngStream {
 public:
  explicit RngStream(uint64_t key) : engine_(key) {}
  template <typename... Words>
  static RngStream of(Words... words) {
    return RngStream(stream_key(static_cast<uint64_t>(words)...));
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double gaussian(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  uint64_t integer(uint64_t n) {  // in [0, n)
    return std::uniform_int_distribution<uint64_t>(0, n - 1)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace contactservo
