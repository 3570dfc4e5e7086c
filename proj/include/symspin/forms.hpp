#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "symspin/types.hpp"

namespace symspin {

// Exterior algebra over the 2n-dimensional symplectic vector space, with the
// index-raising calculus and the sp action on forms.  Basis covectors are
// labeled 0..2n-1 and subsets are stored as bitmasks; all structure constants
// are signs, so this layer is exact in double arithmetic.

// The symplectic form is the anti-diagonal one: omega(e_i, e_j) = +1 when
// j = 2n-1-i and i < n, antisymmetric otherwise zero.  The inverse-component
// matrix satisfies sum_k omega_{ik} omega^{jk} = delta_i^j and coincides with
// the lower-index matrix; the compatible complex structure J = -Omega then
// gives the metric g(v,w) = omega(v, Jw) = Id.
struct SymplecticData {
  int n;
  RMat omega_lower;  // omega_{ij}
  RMat omega_upper;  // omega^{ij}
  RMat J;
  RMat g;

  explicit SymplecticData(int n_) : n(n_) {
    if (n < 1) throw std::invalid_argument("SymplecticData: n must be positive");
    const int d = 2 * n;
    omega_lower = RMat::Zero(d, d);
    for (int i = 0; i < d; ++i) {
      const int j = d - 1 - i;
      omega_lower(i, j) = (i < n) ? 1.0 : -1.0;
    }
    omega_upper = omega_lower;
    J = -omega_lower;
    g = omega_lower * J;
    if ((omega_lower * omega_upper.transpose() - RMat::Identity(d, d)).cwiseAbs().maxCoeff() != 0.0)
      throw std::runtime_error("SymplecticData: omega inverse identity failed");
    if ((J * J + RMat::Identity(d, d)).cwiseAbs().maxCoeff() != 0.0)
      throw std::runtime_error("SymplecticData: J is not a complex structure");
    if ((g - g.transpose()).cwiseAbs().maxCoeff() != 0.0 ||
        (g - RMat::Identity(d, d)).cwiseAbs().maxCoeff() != 0.0)
      throw std::runtime_error("SymplecticData: induced metric is not the identity");
  }
};

// change of basis from the block order (q_1..q_n, p_1..p_n) used by the
// canonical sp blocks to the symplectic frame (q_1..q_n, p_n..p_1)
inline RMat can_to_symp(int n) {
  RMat T = RMat::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    T(i, i) = 1.0;
    T(n + i, 2 * n - 1 - i) = 1.0;
  }
  return T;
}

inline RMat sp_canonical(const RMat& A, const RMat& B, const RMat& C) {
  const int n = (int)A.rows();
  RMat X(2 * n, 2 * n);
  X << A, B, C, -A.transpose();
  return X;
}

inline RMat to_symp(const RMat& X_can, int n) {
  const RMat T = can_to_symp(n);
  return T.transpose() * X_can * T;  // T is a permutation, so T^{-1} = T^T
}

// The ladder realization multiplies momentum directions by -1/(2 pi) relative
// to the raw frame; the coframe in which the dual sp action takes its natural
// matrix form is rescaled accordingly.
inline RMat coframe_scaling(int n) {
  RMat S = RMat::Identity(2 * n, 2 * n);
  for (int i = n; i < 2 * n; ++i) S(i, i) = -1.0 / (2.0 * M_PI);
  return S;
}

namespace detail {

// sign of eps^k wedged into the sorted subset: parity of entries below k
inline int wedge_sign(uint32_t mask, int k) {
  return (__builtin_popcount(mask & ((1u << k) - 1)) % 2 == 0) ? 1 : -1;
}

}  // namespace detail

// homogeneous exterior form: complex coefficients over sorted index subsets
class ExteriorElement {
 public:
  ExteriorElement(int generators, int degree)
      : gens_(generators), degree_(degree) {
    if (generators < 1 || degree < 0 || degree > generators)
      throw std::invalid_argument("ExteriorElement: bad degree or generator count");
  }

  int generators() const { return gens_; }
  int degree() const { return degree_; }
  const std::map<uint32_t, cd>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  void add_term(uint32_t mask, cd coef) {
    if (__builtin_popcount(mask) != degree_ || mask >= (1u << gens_))
      throw std::invalid_argument("ExteriorElement: mask degree mismatch");
    auto it = terms_.find(mask);
    if (it == terms_.end()) {
      if (coef != cd(0.0, 0.0)) terms_.emplace(mask, coef);
    } else {
      it->second += coef;
      if (it->second == cd(0.0, 0.0)) terms_.erase(it);
    }
  }

  static ExteriorElement basis_form(int generators, uint32_t mask) {
    ExteriorElement a(generators, __builtin_popcount(mask));
    a.add_term(mask, 1.0);
    return a;
  }

  friend ExteriorElement operator+(const ExteriorElement& a, const ExteriorElement& b) {
    if (a.gens_ != b.gens_ || a.degree_ != b.degree_)
      throw std::invalid_argument("ExteriorElement: sum shape mismatch");
    ExteriorElement out = a;
    for (const auto& [m, c] : b.terms_) out.add_term(m, c);
    return out;
  }
  friend ExteriorElement operator-(const ExteriorElement& a, const ExteriorElement& b) {
    if (a.gens_ != b.gens_ || a.degree_ != b.degree_)
      throw std::invalid_argument("ExteriorElement: difference shape mismatch");
    ExteriorElement out = a;
    for (const auto& [m, c] : b.terms_) out.add_term(m, -c);
    return out;
  }
  friend ExteriorElement operator*(cd s, const ExteriorElement& a) {
    ExteriorElement out(a.gens_, a.degree_);
    for (const auto& [m, c] : a.terms_) out.add_term(m, s * c);
    return out;
  }

  double max_abs() const {
    double worst = 0.0;
    for (const auto& [m, c] : terms_) worst = std::max(worst, std::abs(c));
    return worst;
  }

 private:
  int gens_, degree_;
  std::map<uint32_t, cd> terms_;
};

inline ExteriorElement wedge(const ExteriorElement& a, const ExteriorElement& b) {
  if (a.generators() != b.generators())
    throw std::invalid_argument("wedge: generator count mismatch");
  ExteriorElement out(a.generators(), std::min(a.degree() + b.degree(), a.generators()));
  if (a.degree() + b.degree() > a.generators()) return out;  // forced zero
  for (const auto& [ma, ca] : a.terms())
    for (const auto& [mb, cb] : b.terms()) {
      if (ma & mb) continue;
      // merge parity: count, over entries of b, the entries of a above them
      int sign = 1;
      for (uint32_t rest = mb; rest;) {
        const int k = __builtin_ctz(rest);
        rest &= rest - 1;
        if (__builtin_popcount(ma >> (k + 1)) % 2) sign = -sign;
      }
      out.add_term(ma | mb, double(sign) * ca * cb);
    }
  return out;
}

// interior product with the basis vector e_k
inline ExteriorElement contract(int k, const ExteriorElement& a) {
  if (a.degree() == 0) return ExteriorElement(a.generators(), 0);
  ExteriorElement out(a.generators(), a.degree() - 1);
  for (const auto& [m, c] : a.terms())
    if (m & (1u << k))
      out.add_term(m & ~(1u << k), double(detail::wedge_sign(m, k)) * c);
  return out;
}

// interior product with the vector v = sum v_k e_k
inline ExteriorElement contract(const Vec& v, const ExteriorElement& a) {
  if (v.size() != a.generators())
    throw std::invalid_argument("contract: vector length mismatch");
  ExteriorElement out(a.generators(), std::max(a.degree() - 1, 0));
  if (a.degree() == 0) return out;
  for (int k = 0; k < v.size(); ++k) {
    if (v(k) == cd(0.0, 0.0)) continue;
    const ExteriorElement part = contract(k, a);
    for (const auto& [m, c] : part.terms()) out.add_term(m, v(k) * c);
  }
  return out;
}

// Dense small tensor with every slot running over 0..2n-1, row-major strides.
// Only the low ranks needed by the curvature calculus are ever used.
class SmallTensor {
 public:
  SmallTensor(int edge, int rank)
      : edge_(edge), rank_(rank), data_((size_t)ipow(edge, rank), cd(0.0, 0.0)) {
    if (edge < 1 || rank < 0) throw std::invalid_argument("SmallTensor: bad shape");
  }

  int edge() const { return edge_; }
  int rank() const { return rank_; }
  size_t size() const { return data_.size(); }

  cd& at(const std::vector<int>& idx) { return data_[offset(idx)]; }
  const cd& at(const std::vector<int>& idx) const { return data_[offset(idx)]; }
  cd& flat(size_t i) { return data_[i]; }
  const cd& flat(size_t i) const { return data_[i]; }

  double max_abs_diff(const SmallTensor& o) const {
    if (o.edge_ != edge_ || o.rank_ != rank_)
      throw std::invalid_argument("SmallTensor: shape mismatch");
    double worst = 0.0;
    for (size_t i = 0; i < data_.size(); ++i)
      worst = std::max(worst, std::abs(data_[i] - o.data_[i]));
    return worst;
  }

 private:
  static size_t ipow(int b, int e) {
    size_t out = 1;
    for (int k = 0; k < e; ++k) out *= b;
    return out;
  }
  size_t offset(const std::vector<int>& idx) const {
    if ((int)idx.size() != rank_)
      throw std::invalid_argument("SmallTensor: index rank mismatch");
    size_t off = 0;
    for (int s = 0; s < rank_; ++s) {
      if (idx[s] < 0 || idx[s] >= edge_)
        throw std::out_of_range("SmallTensor: index out of range");
      off = off * edge_ + idx[s];
    }
    return off;
  }

  int edge_, rank_;
  std::vector<cd> data_;
};

enum class SlotDirection { raise_index, lower_index };

// Index gymnastics against the symplectic form: raising contracts with
// omega^{ic} on the slot, lowering with omega_{ci}, paired so that the two
// are mutually inverse under sum_k omega_{ik} omega^{jk} = delta_i^j.
inline SmallTensor raise_lower(const SmallTensor& t, int slot, SlotDirection dir,
                               const SymplecticData& sd) {
  const int edge = t.edge();
  if (edge != 2 * sd.n)
    throw std::invalid_argument("raise_lower: tensor edge does not match 2n");
  if (slot < 0 || slot >= t.rank())
    throw std::invalid_argument("raise_lower: slot out of range");
  SmallTensor out(edge, t.rank());
  size_t stride = 1;
  for (int s = t.rank() - 1; s > slot; --s) stride *= edge;
  const size_t block = stride * edge;
  for (size_t base = 0; base < t.size(); base += block)
    for (size_t inner = 0; inner < stride; ++inner)
      for (int i = 0; i < edge; ++i) {
        cd acc = 0.0;
        for (int c = 0; c < edge; ++c) {
          const double w = (dir == SlotDirection::raise_index)
                               ? sd.omega_upper(i, c)
                               : sd.omega_lower(c, i);
          if (w != 0.0) acc += w * t.flat(base + (size_t)c * stride + inner);
        }
        out.flat(base + (size_t)i * stride + inner) = acc;
      }
  return out;
}

// Whole exterior algebra as one graded basis: subsets ordered by degree, then
// lexicographically on the sorted index tuple.  For the truncations in play
// (n <= 3) the total dimension is at most 64, so dense operators are cheap.
class FormSpace {
 public:
  explicit FormSpace(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("FormSpace: n must be positive");
    const int d = 2 * n;
    offsets_.assign(d + 2, 0);
    for (int deg = 0; deg <= d; ++deg) {
      offsets_[deg] = (int)basis_.size();
      std::vector<int> tuple;
      emit_combinations(0, deg, d, tuple);
    }
    offsets_[d + 1] = (int)basis_.size();
    for (int i = 0; i < (int)basis_.size(); ++i) index_[basis_[i]] = i;
  }

  int n() const { return n_; }
  int dim() const { return (int)basis_.size(); }
  uint32_t mask(int i) const { return basis_[i]; }
  int find(uint32_t mask) const { return index_.at(mask); }
  int degree_offset(int deg) const { return offsets_.at(deg); }
  int degree_dim(int deg) const { return offsets_.at(deg + 1) - offsets_.at(deg); }

  IVec degrees() const {
    IVec out(dim());
    for (int i = 0; i < dim(); ++i) out(i) = __builtin_popcount(basis_[i]);
    return out;
  }

  RMat wedge_op(int k) const {
    RMat M = RMat::Zero(dim(), dim());
    for (int i = 0; i < dim(); ++i) {
      const uint32_t m = basis_[i];
      if (m & (1u << k)) continue;
      M(find(m | (1u << k)), i) = detail::wedge_sign(m, k);
    }
    return M;
  }

  RMat iota_op(int k) const {
    RMat M = RMat::Zero(dim(), dim());
    for (int i = 0; i < dim(); ++i) {
      const uint32_t m = basis_[i];
      if (!(m & (1u << k))) continue;
      M(find(m & ~(1u << k)), i) = detail::wedge_sign(m, k);
    }
    return M;
  }

  // block of an operator mapping homogeneous degree `from` to degree `to`
  template <typename Derived>
  auto block(const Eigen::MatrixBase<Derived>& op, int to, int from) const {
    return op.block(degree_offset(to), degree_offset(from), degree_dim(to),
                    degree_dim(from));
  }

  Vec coordinates(const ExteriorElement& a) const {
    if (a.generators() != 2 * n_)
      throw std::invalid_argument("FormSpace: element generator mismatch");
    Vec v = Vec::Zero(dim());
    for (const auto& [m, c] : a.terms()) v(find(m)) = c;
    return v;
  }

  ExteriorElement element(const Vec& v, int degree) const {
    ExteriorElement out(2 * n_, degree);
    for (int i = 0; i < dim(); ++i)
      if (v(i) != cd(0.0, 0.0)) {
        if (__builtin_popcount(basis_[i]) != degree)
          throw std::invalid_argument("FormSpace: vector not homogeneous");
        out.add_term(basis_[i], v(i));
      }
    return out;
  }

 private:
  void emit_combinations(int start, int remaining, int d, std::vector<int>& tuple) {
    if (remaining == 0) {
      uint32_t m = 0;
      for (int k : tuple) m |= 1u << k;
      basis_.push_back(m);
      return;
    }
    for (int k = start; k <= d - remaining; ++k) {
      tuple.push_back(k);
      emit_combinations(k + 1, remaining - 1, d, tuple);
      tuple.pop_back();
    }
  }

  int n_;
  std::vector<uint32_t> basis_;
  std::map<uint32_t, int> index_;
  std::vector<int> offsets_;
};

// derivation extension of the coframe map eps^k -> sum_m M[m,k] eps^m
inline RMat form_derivation(const RMat& M, const FormSpace& fs) {
  const int d = 2 * fs.n();
  if (M.rows() != d || M.cols() != d)
    throw std::invalid_argument("form_derivation: matrix size mismatch");
  RMat out = RMat::Zero(fs.dim(), fs.dim());
  for (int m = 0; m < d; ++m)
    for (int k = 0; k < d; ++k)
      if (M(m, k) != 0.0) out += M(m, k) * (fs.wedge_op(m) * fs.iota_op(k));
  return out;
}

// The sp element X (symplectic frame) acting on forms: the dual action
// written in the rescaled coframe adapted to the ladder realization, extended
// as a derivation.  This is the form-factor half of the action that commutes
// with the spinor-valued ladder operators.
inline RMat sp_form_matrix(const RMat& X, const FormSpace& fs) {
  const int n = fs.n();
  const RMat S = coframe_scaling(n);
  RMat Af = RMat::Zero(2 * n, 2 * n);
  for (int i = 0; i < 2 * n; ++i)
    for (int j = 0; j < 2 * n; ++j) Af(i, j) = X(i, j) * S(j, j) / S(i, i);
  return form_derivation(Af, fs);
}

inline ExteriorElement sp_form_action(const RMat& X, const ExteriorElement& a) {
  const int n = a.generators() / 2;
  if (a.generators() != 2 * n || X.rows() != 2 * n || X.cols() != 2 * n)
    throw std::invalid_argument("sp_form_action: size mismatch");
  const RMat S = coframe_scaling(n);
  ExteriorElement out(a.generators(), a.degree());
  for (const auto& [mask, coef] : a.terms())
    for (uint32_t rest = mask; rest;) {
      const int k = __builtin_ctz(rest);
      rest &= rest - 1;
      const uint32_t without = mask & ~(1u << k);
      const int sc = detail::wedge_sign(mask, k);
      for (int m = 0; m < 2 * n; ++m) {
        const double afe = X(m, k) * S(k, k) / S(m, m);
        if (afe == 0.0 || (without & (1u << m))) continue;
        const int sw = detail::wedge_sign(without, m);
        out.add_term(without | (1u << m), double(sc * sw) * afe * coef);
      }
    }
  return out;
}

}  // namespace symspin
