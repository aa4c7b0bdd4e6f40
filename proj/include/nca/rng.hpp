#pragma once

// Seeded generator with hand-rolled transforms so that streams are stable for
// a given seed on one platform. All randomness in a run flows from one seed.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace nca {

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : g_(seed) {}

  uint64_t next() { return g_(); }

  // uniform in [0,1)
  double uniform() { return (g_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [0, n)
  int randint(int n) {
    int k = (int)(uniform() * n);
    return k < n ? k : n - 1;
  }

  double normal() {
    // Box-Muller, one value per call
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // derive an independent stream for a named component
  Rng fork(uint64_t salt) {
    return Rng(g_() ^ (salt * 0x9e3779b97f4a7c15ull));
  }

  std::mt19937_64& engine() { return g_; }

 private:
  std::mt19937_64 g_;
};

}  // namespace nca
