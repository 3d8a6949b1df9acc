#pragma once

#include <cstdint>
#include <random>

namespace zsim {

// mt19937_64 with portable range reduction; std distributions differ across
// standard libraries, which would break golden files.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }

  // Uniform in [0, n). Rejection sampling keeps it unbiased.
  uint64_t below(uint64_t n) {
    if (n <= 1) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do v = gen_();
    while (v >= limit);
    return v % n;
  }

  int64_t range(int64_t lo, int64_t hi) { return lo + int64_t(below(uint64_t(hi - lo) + 1)); }

  // Uniform in [0, 1) with 53 bits.
  double unit() { return double(gen_() >> 11) * 0x1.0p-53; }

  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace zsim
