#pragma once

#include <stdexcept>
#include <vector>

#include "symspin/types.hpp"

namespace symspin {

// Operators on a tensor product act as sums of Kronecker terms A (x) B.  A
// state is kept as a matrix V with the left factor on rows and the right
// factor on columns, so a term applies as A * V * B^T without ever
// materializing the product space.  Dense materialization is available for
// the small blocks the decomposition engine diagonalizes.

inline Mat kron_dense(const Mat& A, const Mat& B) {
  Mat out(A.rows() * B.rows(), A.cols() * B.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

struct KronTerm {
  Mat left;
  Mat right;
};

class KronOpSum {
 public:
  KronOpSum() = default;
  explicit KronOpSum(std::vector<KronTerm> terms) : terms_(std::move(terms)) {}

  const std::vector<KronTerm>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  void add(Mat left, Mat right) {
    if (!terms_.empty() &&
        (terms_.front().left.rows() != left.rows() ||
         terms_.front().left.cols() != left.cols() ||
         terms_.front().right.rows() != right.rows() ||
         terms_.front().right.cols() != right.cols()))
      throw std::invalid_argument("KronOpSum: inconsistent term shapes");
    terms_.push_back({std::move(left), std::move(right)});
  }

  Mat apply(const Mat& V) const {
    if (terms_.empty()) throw std::logic_error("KronOpSum: no terms");
    const auto& t0 = terms_.front();
    if (V.rows() != t0.left.cols() || V.cols() != t0.right.cols())
      throw std::invalid_argument("KronOpSum: state shape mismatch");
    Mat out = Mat::Zero(t0.left.rows(), t0.right.rows());
    for (const auto& t : terms_) out += t.left * V * t.right.transpose();
    return out;
  }

  KronOpSum scaled(cd s) const {
    KronOpSum out = *this;
    for (auto& t : out.terms_) t.left *= s;
    return out;
  }

  KronOpSum adjoint() const {
    KronOpSum out;
    for (const auto& t : terms_) out.add(t.left.adjoint(), t.right.adjoint());
    return out;
  }

  // (A (x) B)(C (x) D) = AC (x) BD, expanded over all term pairs
  friend KronOpSum operator*(const KronOpSum& a, const KronOpSum& b) {
    KronOpSum out;
    for (const auto& ta : a.terms_)
      for (const auto& tb : b.terms_)
        out.add(ta.left * tb.left, ta.right * tb.right);
    return out;
  }

  friend KronOpSum operator+(const KronOpSum& a, const KronOpSum& b) {
    KronOpSum out = a;
    for (const auto& t : b.terms_) out.add(t.left, t.right);
    return out;
  }

  Mat materialize() const {
    if (terms_.empty()) throw std::logic_error("KronOpSum: no terms");
    Mat out = kron_dense(terms_[0].left, terms_[0].right);
    for (size_t k = 1; k < terms_.size(); ++k)
      out += kron_dense(terms_[k].left, terms_[k].right);
    return out;
  }

 private:
  std::vector<KronTerm> terms_;
};

// commutator and anticommutator evaluated on a state, never materialized
inline Mat commutator_apply(const KronOpSum& a, const KronOpSum& b, const Mat& V) {
  return a.apply(b.apply(V)) - b.apply(a.apply(V));
}

inline Mat anticommutator_apply(const KronOpSum& a, const KronOpSum& b, const Mat& V) {
  return a.apply(b.apply(V)) + b.apply(a.apply(V));
}

}  // namespace symspin
