#include "dualmae/rng.hpp"

#include <cmath>
#include <numbers>

namespace dualmae {

double Rng::next_gaussian() {
  // u in (0,1] so log stays finite.
  double u = 1.0 - next_double();
  double v = next_double();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

double Rng::next_trunc_normal(double sigma) {
  for (;;) {
    double g = next_gaussian();
    if (std::abs(g) <= 2.0) return g * sigma;
  }
}

std::vector<int64_t> Rng::sample_without_replacement(int64_t n, int64_t k) {
  std::vector<int64_t> pool(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
  if (k > n) k = n;
  for (int64_t i = 0; i < k; ++i) {
    int64_t j = i + static_cast<int64_t>(next_below(static_cast<uint64_t>(n - i)));
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
  }
  pool.resize(static_cast<size_t>(k));
  return pool;
}

}  // namespace dualmae
