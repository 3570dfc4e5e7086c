#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "symspin/types.hpp"

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace symspin {

// Thin wrappers over the LAPACKE drivers.  SVDs go through zgesvd (the QR
// iteration driver): the divide-and-conquer one is faster but occasionally
// fails to converge on the tall rank-deficient stacks produced by the raising
// chains, and a kernel computation that can randomly throw is useless.

namespace detail {
inline void check_info(lapack_int info, const char* who) {
  if (info != 0)
    throw std::runtime_error(std::string(who) + " failed, info=" +
                             std::to_string(info));
}
}  // namespace detail

struct Svd {
  Mat u;   // thin left factor (may be empty if not requested)
  RVec s;  // singular values, descending
  Mat vh;  // full or thin V^H depending on the call
};

inline RVec singular_values(Mat a) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  const lapack_int k = std::min(m, n);
  RVec s = RVec::Zero(std::max<lapack_int>(k, 1));
  if (m == 0 || n == 0) return RVec::Zero(0);
  std::vector<double> superb(std::max<lapack_int>(k, 2));
  lapack_int info =
      LAPACKE_zgesvd(LAPACK_COL_MAJOR, 'N', 'N', m, n, a.data(), m, s.data(),
                     nullptr, 1, nullptr, 1, superb.data());
  detail::check_info(info, "zgesvd");
  return s.head(k);
}

inline Svd svd_thin(Mat a) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  const lapack_int k = std::min(m, n);
  Svd out;
  out.u = Mat::Zero(m, k);
  out.s = RVec::Zero(k);
  out.vh = Mat::Zero(k, n);
  if (k == 0) return out;
  std::vector<double> superb(std::max<lapack_int>(k, 2));
  lapack_int info = LAPACKE_zgesvd(LAPACK_COL_MAJOR, 'S', 'S', m, n, a.data(),
                                   m, out.s.data(), out.u.data(), m,
                                   out.vh.data(), k, superb.data());
  detail::check_info(info, "zgesvd");
  return out;
}

inline int rank_abs(Mat a, double tol = rank_tolerance) {
  const RVec s = singular_values(std::move(a));
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++r;
  return r;
}

// orthonormal basis of the null space (columns)
inline Mat kernel_basis(Mat a, double tol = rank_tolerance) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  if (n == 0) return Mat::Zero(0, 0);
  if (m == 0) return Mat::Identity(n, n);
  const lapack_int k = std::min(m, n);
  RVec s = RVec::Zero(k);
  Mat vh = Mat::Zero(n, n);
  std::vector<double> superb(std::max<lapack_int>(k, 2));
  lapack_int info =
      LAPACKE_zgesvd(LAPACK_COL_MAJOR, 'N', 'A', m, n, a.data(), m, s.data(),
                     nullptr, 1, vh.data(), n, superb.data());
  detail::check_info(info, "zgesvd");
  int r = 0;
  for (int i = 0; i < k; ++i)
    if (s(i) > tol) ++r;
  return vh.bottomRows(n - r).adjoint();
}

// orthonormal basis of the column space
inline Mat column_space(Mat a, double tol = rank_tolerance) {
  Svd f = svd_thin(std::move(a));
  int r = 0;
  for (int i = 0; i < f.s.size(); ++i)
    if (f.s(i) > tol) ++r;
  return f.u.leftCols(r);
}

inline Mat pinv_svd(Mat a, double tol = rank_tolerance) {
  const auto rows = a.rows();
  const auto cols = a.cols();
  if (rows == 0 || cols == 0) return Mat::Zero(cols, rows);
  Svd f = svd_thin(std::move(a));
  int r = 0;
  for (int i = 0; i < f.s.size(); ++i)
    if (f.s(i) > tol) ++r;
  Mat out = Mat::Zero(cols, rows);
  if (r > 0)
    out = f.vh.topRows(r).adjoint() *
          f.s.head(r).cwiseInverse().asDiagonal() * f.u.leftCols(r).adjoint();
  return out;
}

// pseudoinverse of a full-column-rank matrix via Householder QR; cheaper and
// more robust than the SVD route for the big projector assemblies
inline Mat pinv_qr(Mat a) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  if (n == 0) return Mat::Zero(0, m);
  if (m < n) throw std::invalid_argument("pinv_qr: matrix has fewer rows than columns");
  std::vector<cd> tau(n);
  lapack_int info = LAPACKE_zgeqrf(LAPACK_COL_MAJOR, m, n, a.data(), m, tau.data());
  detail::check_info(info, "zgeqrf");
  Mat r = a.topRows(n).triangularView<Eigen::Upper>();
  info = LAPACKE_zungqr(LAPACK_COL_MAJOR, m, n, n, a.data(), m, tau.data());
  detail::check_info(info, "zungqr");
  Mat x = a.leftCols(n).adjoint();  // Q^H, n x m
  info = LAPACKE_ztrtrs(LAPACK_COL_MAJOR, 'U', 'N', 'N', n, m,
                        r.data(), n, x.data(), n);
  detail::check_info(info, "ztrtrs");
  return x;
}

struct Eig {
  Vec values;
  Mat vectors;
};

inline Eig eig(Mat a) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  if (a.cols() != n) throw std::invalid_argument("eig: square matrix required");
  Eig out;
  out.values = Vec::Zero(n);
  out.vectors = Mat::Zero(n, n);
  if (n == 0) return out;
  lapack_int info =
      LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'V', n, a.data(), n,
                    out.values.data(), nullptr, 1, out.vectors.data(), n);
  detail::check_info(info, "zgeev");
  return out;
}

struct EigH {
  RVec values;  // ascending
  Mat vectors;
};

inline EigH eigh(Mat a) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  if (a.cols() != n) throw std::invalid_argument("eigh: square matrix required");
  EigH out;
  out.values = RVec::Zero(n);
  if (n == 0) {
    out.vectors = Mat::Zero(0, 0);
    return out;
  }
  lapack_int info =
      LAPACKE_zheev(LAPACK_COL_MAJOR, 'V', 'L', n, a.data(), n, out.values.data());
  detail::check_info(info, "zheev");
  out.vectors = std::move(a);
  return out;
}

}  // namespace symspin
