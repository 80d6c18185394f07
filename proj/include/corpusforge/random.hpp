#pragma once

#include <cstdint>
#include <random>

namespace corpusforge {

// splitmix64 finalizer. Stable across platforms, unlike std::hash.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t id) noexcept {
  return mix64(mix64(seed) ^ id);
}

// Random stream keyed by (seed, record id). Uses only the raw engine output,
// which the standard fixes bit-for-bit; the std distributions are not.
class KeyedRng {
 public:
  KeyedRng(std::uint64_t seed, std::uint64_t id) : engine_(stream_key(seed, id)) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling removes modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace corpusforge
