#pragma once

#include "abpid/core.hpp"

#include <cstdint>
#include <random>

namespace abpid::testing {

/// Seeded generator for hand-rolled property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

  Vec vec(int n, double lo, double hi) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }
  Mat mat(int r, int c, double lo, double hi) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = uniform(lo, hi);
    return m;
  }
  /// Well-conditioned square matrix: diagonal dominant with random signs off it.
  Mat invertible(int n) {
    Mat m = mat(n, n, -0.3, 0.3);
    for (int i = 0; i < n; ++i) m(i, i) = uniform(1.0, 3.0) * (coin() ? 1.0 : -1.0);
    return m;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline double max_abs_diff(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace abpid::testing
