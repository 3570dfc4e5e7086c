#pragma once

#include <complex>
#include <Eigen/Dense>

namespace symspin {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using IVec = Eigen::VectorXi;

// absolute singular-value cutoff for rank and kernel decisions.  All the bases
// we feed into rank tests are orthonormalized and the operators are O(1), so an
// absolute threshold is meaningful.  A relative-to-largest threshold would
// misread an exactly-zero matrix (largest singular value ~1e-14 of pure noise)
// as full rank, which is precisely the case that shows up when a raising chain
// terminates.
inline constexpr double rank_tolerance = 1e-9;

inline double max_abs(const Mat& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double max_abs(const Vec& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace symspin
