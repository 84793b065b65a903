#pragma once

#include <cstdint>
#include <vector>

namespace dualmae {

// Counter-based deterministic generator (splitmix64 core). Same seed gives the
// same stream on every platform; split() derives an independent stream so
// masking, init, and data sampling never perturb each other.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), rejection-sampled so the stream stays portable.
  uint64_t next_below(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // Box-Muller without a cached spare: two uniforms per draw, fully stateless
  // beyond the counter.
  double next_gaussian();

  // Truncated N(0, sigma^2) at +-2 sigma (rejection).
  double next_trunc_normal(double sigma);

  // Independent stream derived from this generator's seed and a stream tag.
  Rng split(uint64_t stream) const {
    uint64_t z = state_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

  // First k of a uniformly shuffled [0, n) (partial Fisher-Yates), unsorted.
  std::vector<int64_t> sample_without_replacement(int64_t n, int64_t k);

 private:
  uint64_t state_;
};

}  // namespace dualmae
