#pragma once

#include <cstdint>
#include <vector>

namespace vburst {

// SplitMix64 (Steele, Lea & Flood 2014). Every random draw in the project goes
// through this generator so that a single seed reproduces identical bytes on
// any IEEE-754 platform, independent of standard-library internals.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Irwin-Hall approximation to a standard normal: sum of 12 uniforms minus 6.
  // Needs no transcendental functions, so the output stream is bit-identical
  // across platforms. Support is [-6, 6]; mean 0, variance 1.
  double normal() {
    double s = 0.0;
    for (int i = 0; i < 12; ++i) s += next_double();
    return s - 6.0;
  }

  // Unbiased uniform integer in [0, n) via rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

 private:
  std::uint64_t state_;
};

// One scrambling round of SplitMix64, used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  SplitMix64 s(a ^ (b * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
  return s.next_u64();
}

// Fisher-Yates shuffle driven by the portable generator.
template <typename T>
void shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace vburst
