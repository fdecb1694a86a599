#pragma once

#include <cstdint>

namespace lightfit {

/// SplitMix64. Fully specified, so seeded streams are identical on every
/// platform and standard library (unlike std:: distributions).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

/// Stateless hash of (seed, a, b) used for lattice noise.
inline std::uint64_t hash_combine(std::uint64_t seed, std::int64_t a, std::int64_t b) {
  SplitMix64 h(seed ^ (static_cast<std::uint64_t>(a) * 0x9e3779b97f4a7c15ULL) ^
               (static_cast<std::uint64_t>(b) * 0xc2b2ae3d27d4eb4fULL));
  h.next();
  return h.next();
}

}  // namespace lightfit
