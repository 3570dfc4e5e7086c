#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "symspin/types.hpp"

namespace symspin {

// Gauss-Hermite rule for the weight e^{-x^2}.  Eigenvalues of the tridiagonal
// Jacobi matrix seed the nodes; a few Newton steps on the orthonormal
// polynomial recurrence polish them to machine precision, and the weights come
// out as Christoffel numbers 1/sum_k p_k(x)^2.  The eigenvector-squared weight
// formula is avoided on purpose: dense solvers lose all relative accuracy in
// the ~1e-47 tail components, which ruins the compensated weights.
struct GaussHermiteRule {
  RVec x;
  RVec w;  // raw weights for the e^{-x^2} weight
  RVec wc; // weights with the e^{+x^2} compensation folded in

  explicit GaussHermiteRule(int m) {
    if (m < 2) throw std::invalid_argument("GaussHermiteRule: need at least 2 nodes");
    RMat j = RMat::Zero(m, m);
    for (int k = 1; k < m; ++k) {
      const double b = std::sqrt(0.5 * k);
      j(k, k - 1) = b;
      j(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(j, Eigen::EigenvaluesOnly);
    x = es.eigenvalues();
    w.resize(m);
    wc.resize(m);
    RVec p(m + 1);
    for (int i = 0; i < m; ++i) {
      for (int iter = 0; iter < 4; ++iter) {
        eval_all(m, x(i), p);
        const double deriv = std::sqrt(2.0 * m) * p(m - 1);
        x(i) -= p(m) / deriv;
      }
      eval_all(m, x(i), p);
      double christoffel = 0.0;
      for (int k = 0; k < m; ++k) christoffel += p(k) * p(k);
      wc(i) = std::exp(x(i) * x(i)) / christoffel;
      w(i) = 1.0 / christoffel;
    }
  }

 private:
  // orthonormal polynomials for e^{-x^2}: p_0 = pi^{-1/4},
  // p_{k+1} = x sqrt(2/(k+1)) p_k - sqrt(k/(k+1)) p_{k-1}
  static void eval_all(int m, double x, RVec& p) {
    p(0) = std::pow(M_PI, -0.25);
    if (m >= 1) p(1) = std::sqrt(2.0) * x * p(0);
    for (int k = 1; k < m; ++k)
      p(k + 1) = x * std::sqrt(2.0 / (k + 1)) * p(k) -
                 std::sqrt(double(k) / (k + 1)) * p(k - 1);
  }
};

// Plain-measure rule tuned to the Gaussian profile of the basis functions.
// Substituting u = x sqrt(2 pi) in the e^{-x^2} rule makes integrals of
// poly * e^{-2 pi x^2} exact up to polynomial degree 2m-1, so every oracle
// integral in this code base sits at machine precision.  Using the raw
// e^{-x^2} rule instead loses ~7 digits by weight-width mismatch.
struct LebesgueRule {
  RVec x;
  RVec w;

  explicit LebesgueRule(int m) {
    const GaussHermiteRule gh(m);
    const double s = std::sqrt(2.0 * M_PI);
    x = gh.x / s;
    w = gh.wc / s;
  }
};

inline const LebesgueRule& default_rule() {
  static const LebesgueRule rule(120);
  return rule;
}

// Hermite functions, L^2(R)-orthonormal against the plain Lebesgue measure:
//   h_0(x) = 2^{1/4} e^{-pi x^2}
//   h_{m+1} = (2 sqrt(pi) x h_m - sqrt(m) h_{m-1}) / sqrt(m+1)
// For large |x| the seed value underflows to zero and the recurrence keeps
// everything at zero, which is the right answer for quadrature purposes.
inline RVec hermite_values(int mmax, double x) {
  RVec h(mmax + 1);
  const double s = 2.0 * std::sqrt(M_PI);
  h(0) = std::pow(2.0, 0.25) * std::exp(-M_PI * x * x);
  if (mmax >= 1) h(1) = s * x * h(0);  // sqrt(1) denominators written out
  for (int m = 1; m < mmax; ++m)
    h(m + 1) = (s * x * h(m) - std::sqrt(double(m)) * h(m - 1)) / std::sqrt(double(m + 1));
  return h;
}

inline cd quadrature_inner_product(const std::function<cd(double)>& f,
                                   const std::function<cd(double)>& g,
                                   const LebesgueRule& rule = default_rule()) {
  cd acc = 0.0;
  for (int i = 0; i < rule.x.size(); ++i)
    acc += rule.w(i) * std::conj(f(rule.x(i))) * g(rule.x(i));
  return acc;
}

// double integral against a two-point kernel: \int\int conj(f(y)) K(x,y) g(x) dx dy
inline cd quadrature_kernel_product(const std::function<cd(double)>& f,
                                    const std::function<cd(double, double)>& kernel,
                                    const std::function<cd(double)>& g,
                                    const LebesgueRule& rule = default_rule()) {
  cd acc = 0.0;
  for (int i = 0; i < rule.x.size(); ++i) {
    const double y = rule.x(i);
    cd inner = 0.0;
    for (int j = 0; j < rule.x.size(); ++j)
      inner += rule.w(j) * kernel(rule.x(j), y) * g(rule.x(j));
    acc += rule.w(i) * std::conj(f(y)) * inner;
  }
  return acc;
}

}  // namespace symspin
