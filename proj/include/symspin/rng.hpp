#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "symspin/types.hpp"

namespace symspin {

// Deterministic random source.  The gaussian transform is done by hand
// (Box-Muller) instead of std::normal_distribution because the standard
// library does not pin the algorithm, and reports have to be byte-identical
// for a fixed seed.
class Prng {
 public:
  explicit Prng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // uniform in [0,1)
  double real01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform integer in [lo, hi], inclusive
  long long int_range(long long lo, long long hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1u;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return lo + static_cast<long long>(v % span);
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = real01();
    while (u1 == 0.0) u1 = real01();
    const double u2 = real01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  cd cgaussian() {
    const double re = gaussian();
    const double im = gaussian();
    return {re, im};
  }

  RMat gaussian_mat(int rows, int cols) {
    RMat m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = gaussian();
    return m;
  }

  Mat cgaussian_mat(int rows, int cols) {
    Mat m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = cgaussian();
    return m;
  }

  Vec cgaussian_vec(int size) {
    Vec v(size);
    for (int i = 0; i < size; ++i) v(i) = cgaussian();
    return v;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace symspin
