#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "symspin/quadrature.hpp"

using namespace symspin;

TEST_CASE("rule integrates gaussians exactly enough") {
  auto f = [](double x) { return cd(std::exp(-M_PI * x * x), 0.0); };
  // \int e^{-2 pi x^2} dx = 1/sqrt(2)
  cd v = quadrature_inner_product(f, f);
  CHECK(std::abs(v - cd(1.0 / std::sqrt(2.0), 0.0)) < 1e-14);
}

TEST_CASE("hermite functions are orthonormal") {
  const int mmax = 18;
  const auto& rule = default_rule();
  RMat gram = RMat::Zero(mmax + 1, mmax + 1);
  for (int i = 0; i < rule.x.size(); ++i) {
    RVec h = hermite_values(mmax, rule.x(i));
    gram += rule.w(i) * h * h.transpose();
  }
  for (int a = 0; a <= mmax; ++a)
    for (int b = 0; b <= mmax; ++b)
      CHECK(std::abs(gram(a, b) - (a == b ? 1.0 : 0.0)) < 1e-12);
}

TEST_CASE("three-term recurrence matches the multiplication operator") {
  // x h_m = (1/(2 sqrt(pi))) (sqrt(m+1) h_{m+1} + sqrt(m) h_{m-1});
  // check the quadrature inner products <h_k, x h_m> against these entries
  const int mmax = 14;
  const auto& rule = default_rule();
  RMat xmat = RMat::Zero(mmax + 2, mmax + 1);
  for (int i = 0; i < rule.x.size(); ++i) {
    RVec h = hermite_values(mmax + 1, rule.x(i));
    xmat += rule.w(i) * rule.x(i) * h * h.head(mmax + 1).transpose();
  }
  const double t = 1.0 / (2.0 * std::sqrt(M_PI));
  for (int m = 0; m <= mmax; ++m) {
    for (int k = 0; k <= mmax + 1; ++k) {
      double expect = 0.0;
      if (k == m + 1) expect = t * std::sqrt(double(m + 1));
      if (k == m - 1) expect = t * std::sqrt(double(m));
      CHECK(std::abs(xmat(k, m) - expect) < 1e-12);
    }
  }
}

TEST_CASE("ground state value") {
  CHECK(std::abs(hermite_values(0, 0.0)(0) - std::pow(2.0, 0.25)) < 1e-15);
}
