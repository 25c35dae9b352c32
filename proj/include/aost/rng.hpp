#pragma once

#include <cstdint>
#include <random>

namespace aost {

/// SplitMix64 finalizer. Used to derive independent sub-seeds and per-pixel
/// noise without sequential generator state.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed ^ mix64(value));
}

template <typename... Rest>
constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value, Rest... rest) {
  return hash_combine(hash_combine(seed, value), static_cast<std::uint64_t>(rest)...);
}

/// Maps 64 random bits to [0, 1) with 53 bits of resolution.
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Seeded generator with platform-independent draws. The standard
/// distributions are implementation-defined, so the few we need are spelled
/// out here on top of mt19937_64 (whose output sequence is fixed).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t bits() { return engine_(); }
  double uniform() { return to_unit(engine_()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace aost
