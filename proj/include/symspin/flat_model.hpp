#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "symspin/fock.hpp"
#include "symspin/forms.hpp"
#include "symspin/lapack.hpp"
#include "symspin/multiindex.hpp"
#include "symspin/osp.hpp"
#include "symspin/rng.hpp"
#include "symspin/types.hpp"

namespace symspin {

// Flat models of spinor-valued form fields over R^{2n}: polynomial
// coefficients for the affine picture, and one Fock-valued form per integer
// mode for the torus picture.  Everything downstream of the fiber
// decomposition (the twistor walk, the two Dirac operators, the Laplacian
// comparison, the Killing pencil) is built from per-form-degree blocks, which
// is what keeps the n = 3 truncations inside the memory budget.

// ---------------------------------------------------------------------------
// degree-block coordinates
//
// A degree-i block vector lists the rows of that form degree in form-major
// order (form index times fock_dim plus Hermite index), matching the layout
// of the projection engine in osp.hpp.

inline Vec block_coordinates(const SpinorPtr& S, const Mat& state, int deg) {
  const int nf = S->fock_dim(), dd = S->forms.degree_dim(deg);
  const int off = S->forms.degree_offset(deg);
  if (state.rows() != S->form_dim() || state.cols() != nf)
    throw std::invalid_argument("block_coordinates: state shape mismatch");
  Vec v(dd * nf);
  for (int f = 0; f < dd; ++f)
    v.segment(f * nf, nf) = state.row(off + f).transpose();
  return v;
}

inline Mat state_from_block(const SpinorPtr& S, const Vec& v, int deg) {
  const int nf = S->fock_dim(), dd = S->forms.degree_dim(deg);
  const int off = S->forms.degree_offset(deg);
  if (v.size() != dd * nf)
    throw std::invalid_argument("state_from_block: size mismatch");
  Mat out = Mat::Zero(S->form_dim(), nf);
  for (int f = 0; f < dd; ++f)
    out.row(off + f) = v.segment(f * nf, nf).transpose();
  return out;
}

// apply sum_a c_a (eps^a wedge) to a degree-block vector
inline Vec wedge_block_apply(const SpinorPtr& S, int deg, const Vec& c, const Vec& v) {
  const int nf = S->fock_dim();
  const int din = S->forms.degree_dim(deg), dout = S->forms.degree_dim(deg + 1);
  if (c.size() != 2 * S->n || v.size() != din * nf)
    throw std::invalid_argument("wedge_block_apply: size mismatch");
  using RowMat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> V(v.data(), din, nf);
  RowMat W = RowMat::Zero(dout, nf);
  for (int a = 0; a < c.size(); ++a) {
    if (c(a) == cd(0.0, 0.0)) continue;
    const RMat wb = S->forms.block(S->forms.wedge_op(a), deg + 1, deg);
    W.noalias() += c(a) * (wb.cast<cd>() * V);
  }
  return Eigen::Map<const Vec>(W.data(), dout * nf);
}

// ---------------------------------------------------------------------------
// factored degree-block decompositions

namespace detail {

using RowMat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// one (form (x) fock) factor pair restricted to a form-degree transition
struct BlockTerm {
  Mat form;
  Mat fock;
};

// the terms of F+ out of form degree b
inline std::vector<BlockTerm> fplus_terms(const SpinorPtr& S, int b) {
  std::vector<BlockTerm> terms;
  for (int k = 0; k < 2 * S->n; ++k) {
    const RMat wb = S->forms.block(S->forms.wedge_op(k), b + 1, b);
    if (wb.cwiseAbs().maxCoeff() == 0.0) continue;
    terms.push_back({cd(0.0, 0.5) * wb.cast<cd>(), clifford_matrix(S->fock, k)});
  }
  return terms;
}

// apply a sum of factor pairs to every column of a block matrix; columns are
// reshaped to (form degree dim) x (fock dim) so no dense Kronecker matrix is
// ever materialized
inline Mat apply_terms(const SpinorPtr& S, const std::vector<BlockTerm>& terms,
                       int to, int from, const Mat& cols) {
  const int nf = S->fock_dim();
  const int din = S->forms.degree_dim(from), dout = S->forms.degree_dim(to);
  Mat out = Mat::Zero(dout * nf, cols.cols());
  RowMat W(dout, nf);
  for (int c = 0; c < cols.cols(); ++c) {
    Eigen::Map<const RowMat> V(cols.col(c).data(), din, nf);
    W.setZero();
    for (const auto& t : terms) W.noalias() += t.form * (V * t.fock.transpose());
    out.col(c) = Eigen::Map<const Vec>(W.data(), dout * nf);
  }
  return out;
}

// Primitive kernel of one parity class, with the rows of F- compressed to the
// class they can hit.  Both F+ and F- shift the form degree and the Hermite
// degree by one each, so (form degree + Hermite degree) mod 2 never changes;
// the complementary rows are structural zeros and would only pad the SVD.
inline Mat parity_primitive(const SpinorPtr& S, int j, int dmax, int p) {
  const auto cols = block_columns(S, j, dmax, p);
  const int rows = S->block_rows(j);
  if (cols.empty()) return Mat::Zero(rows, 0);
  Mat K;
  if (j == 0) {
    K = Mat::Identity((int)cols.size(), (int)cols.size());
  } else {
    const auto img = block_columns(S, j - 1, dmax + 1, p);
    const Mat A = fm_block(S, j);
    Mat Ar((int)img.size(), (int)cols.size());
    for (int r = 0; r < (int)img.size(); ++r)
      for (int c = 0; c < (int)cols.size(); ++c) Ar(r, c) = A(img[r], cols[c]);
    K = kernel_basis(std::move(Ar), rank_tolerance);
  }
  Mat out = Mat::Zero(rows, K.cols());
  for (int c = 0; c < (int)cols.size(); ++c) out.row(cols[c]) = K.row(c);
  return out;
}

}  // namespace detail

// Decomposition of one form-degree block into raised-primitive summands,
// kept factored: per parity class the concatenated summand spans and a single
// pseudoinverse.  Applying a summand projector is then two slim products, and
// the two classes are assembled independently, which roughly quarters the
// factorization work compared to one dense block.
struct BlockProjectors {
  struct Assembly {
    std::vector<int> rows;  // block rows of this parity class
    Mat basis;              // summand spans, side by side
    Mat dual;               // pinv(basis); component projectors read off per span
    std::vector<int> offset, width, target;
  };

  int degree = 0;
  int block_size = 0;
  std::array<Assembly, 2> cls;
  std::vector<int> targets;  // distinct summand form degrees, ascending

  bool has(int j) const {
    return std::find(targets.begin(), targets.end(), j) != targets.end();
  }

  // component of a degree-block vector along the (degree, j) summand; zero if
  // the summand is absent
  Vec apply(int j, const Vec& v) const {
    if (v.size() != block_size)
      throw std::invalid_argument("BlockProjectors: block size mismatch");
    Vec out = Vec::Zero(block_size);
    for (const auto& A : cls) {
      if (A.basis.cols() == 0) continue;
      bool hit = false;
      for (int t : A.target)
        if (t == j) hit = true;
      if (!hit) continue;
      Vec vc((int)A.rows.size());
      for (int r = 0; r < (int)A.rows.size(); ++r) vc(r) = v(A.rows[r]);
      const Vec y = A.dual * vc;
      Vec oc = Vec::Zero((int)A.rows.size());
      for (size_t b = 0; b < A.target.size(); ++b)
        if (A.target[b] == j)
          oc.noalias() +=
              A.basis.middleCols(A.offset[b], A.width[b]) * y.segment(A.offset[b], A.width[b]);
      for (int r = 0; r < (int)A.rows.size(); ++r) out(A.rows[r]) += oc(r);
    }
    return out;
  }

  // dense projector onto the (degree, j) summand, mostly for the small fiber
  // computations; the big sweeps stay on apply()
  Mat matrix(int j) const {
    Mat P = Mat::Zero(block_size, block_size);
    for (const auto& A : cls) {
      if (A.basis.cols() == 0) continue;
      Mat Pc = Mat::Zero((int)A.rows.size(), (int)A.rows.size());
      bool hit = false;
      for (size_t b = 0; b < A.target.size(); ++b)
        if (A.target[b] == j) {
          Pc.noalias() += A.basis.middleCols(A.offset[b], A.width[b]) *
                          A.dual.middleRows(A.offset[b], A.width[b]);
          hit = true;
        }
      if (!hit) continue;
      for (int r = 0; r < (int)A.rows.size(); ++r)
        for (int c = 0; c < (int)A.rows.size(); ++c) P(A.rows[r], A.rows[c]) = Pc(r, c);
    }
    return P;
  }
};

inline BlockProjectors block_projectors(const SpinorPtr& S, int i) {
  if (i < 0 || i > 2 * S->n)
    throw std::invalid_argument("block_projectors: degree out of range");
  BlockProjectors out;
  out.degree = i;
  out.block_size = S->block_rows(i);
  std::array<std::vector<int>, 2> rows_cls;
  for (int q : {0, 1}) rows_cls[q] = detail::block_columns(S, i, S->N, q);

  std::map<int, std::vector<detail::BlockTerm>> fpt;
  auto fp_terms = [&](int b) -> const std::vector<detail::BlockTerm>& {
    auto it = fpt.find(b);
    if (it == fpt.end()) it = fpt.emplace(b, detail::fplus_terms(S, b)).first;
    return it->second;
  };

  struct Span {
    int j;
    Mat span;
  };
  std::array<std::vector<Span>, 2> spans;
  for (int j = 0; j <= std::min(i, 2 * S->n - i); ++j) {
    // the window that keeps every raising step below the truncation edge
    const int dmax = S->N - 1 - (i - j);
    if (dmax < 0) continue;
    for (int p : {0, 1}) {
      Mat R = detail::parity_primitive(S, j, dmax, p);
      if (R.cols() == 0) continue;
      for (int step = 0; step < i - j; ++step)
        R = detail::apply_terms(S, fp_terms(j + step), j + step + 1, j + step, R);
      // compress to the class rows and prune directions the clipping killed
      Mat Rc((int)rows_cls[p].size(), R.cols());
      for (int r = 0; r < (int)rows_cls[p].size(); ++r) Rc.row(r) = R.row(rows_cls[p][r]);
      Svd svd = svd_thin(std::move(Rc));
      int rk = 0;
      while (rk < svd.s.size() && svd.s(rk) > rank_tolerance) ++rk;
      if (rk == 0) continue;
      spans[p].push_back({j, Mat(svd.u.leftCols(rk))});
    }
  }

  for (int q : {0, 1}) {
    auto& A = out.cls[q];
    A.rows = rows_cls[q];
    int total = 0;
    for (const auto& s : spans[q]) total += (int)s.span.cols();
    A.basis = Mat((int)A.rows.size(), total);
    int off = 0;
    for (const auto& s : spans[q]) {
      A.basis.middleCols(off, s.span.cols()) = s.span;
      A.offset.push_back(off);
      A.width.push_back((int)s.span.cols());
      A.target.push_back(s.j);
      off += (int)s.span.cols();
    }
    spans[q].clear();
    A.dual = total > 0 ? pinv_qr(A.basis) : Mat::Zero(0, (int)A.rows.size());
    for (int t : A.target)
      if (!out.has(t)) out.targets.push_back(t);
  }
  std::sort(out.targets.begin(), out.targets.end());
  return out;
}

using BlockPtr = std::shared_ptr<const BlockProjectors>;

// Per-degree decompositions built on first use.  Sweeps that walk the form
// degrees drop the ones behind them, so at most a three-degree window is
// resident at n = 3.
class ProjectorCache {
 public:
  explicit ProjectorCache(SpinorPtr space) : space_(std::move(space)) {}

  const SpinorPtr& space() const { return space_; }

  BlockPtr at(int degree) {
    auto it = built_.find(degree);
    if (it != built_.end()) return it->second;
    auto made = std::make_shared<const BlockProjectors>(block_projectors(space_, degree));
    built_.emplace(degree, made);
    return made;
  }

  void drop(int degree) { built_.erase(degree); }

 private:
  SpinorPtr space_;
  std::map<int, BlockPtr> built_;
};

// project one state onto the (degree, j) summand; rows of other form degrees
// are dropped
inline Mat project_state(const SpinorPtr& S, const BlockProjectors& P, int j, const Mat& state) {
  return state_from_block(S, P.apply(j, block_coordinates(S, state, P.degree)), P.degree);
}

// ---------------------------------------------------------------------------
// field models

// polynomial-coefficient model over R^{2n}: monomials up to a degree bound,
// one spinor-form state per monomial
struct PolyModel {
  SpinorPtr space;
  std::shared_ptr<const MultiIndexSet> monomials;
};

inline PolyModel poly_model(const SpinorPtr& space, int poly_degree) {
  if (poly_degree < 0) throw std::invalid_argument("poly_model: negative degree bound");
  return {space, std::make_shared<MultiIndexSet>(2 * space->n, poly_degree)};
}

// a polynomial field: one coefficient state per monomial of the model
struct PolySpinorForm {
  std::vector<Mat> coeff;
};

inline PolySpinorForm zero_form(const PolyModel& model) {
  return {std::vector<Mat>(
      (size_t)model.monomials->size(),
      Mat::Zero(model.space->form_dim(), model.space->fock_dim()))};
}

// seeded field with Hermite degrees <= mask, optionally concentrated in one
// form degree
inline PolySpinorForm random_form(const PolyModel& model, Prng& rng, int mask,
                                  int form_degree = -1) {
  const SpinorPtr& S = model.space;
  const IVec deg = S->fock->degrees();
  PolySpinorForm f = zero_form(model);
  const int lo = form_degree < 0 ? 0 : S->forms.degree_offset(form_degree);
  const int hi = form_degree < 0 ? S->form_dim() : lo + S->forms.degree_dim(form_degree);
  for (auto& M : f.coeff)
    for (int r = lo; r < hi; ++r)
      for (int c = 0; c < M.cols(); ++c)
        if (deg(c) <= mask) M(r, c) = rng.cgaussian();
  return f;
}

inline PolySpinorForm operator-(const PolySpinorForm& a, const PolySpinorForm& b) {
  if (a.coeff.size() != b.coeff.size())
    throw std::invalid_argument("PolySpinorForm: size mismatch");
  PolySpinorForm out = a;
  for (size_t m = 0; m < out.coeff.size(); ++m) out.coeff[m] -= b.coeff[m];
  return out;
}

inline PolySpinorForm operator*(cd s, const PolySpinorForm& a) {
  PolySpinorForm out = a;
  for (auto& M : out.coeff) M *= s;
  return out;
}

inline double max_abs(const PolySpinorForm& f) {
  double worst = 0.0;
  for (const auto& M : f.coeff) worst = std::max(worst, max_abs(M));
  return worst;
}

// largest entry over Hermite degrees <= mask; residuals are measured inside
// the window so truncation spill at the top degrees stays out of the verdict
inline double masked_max(const SpinorPtr& S, const Mat& state, int mask) {
  const IVec deg = S->fock->degrees();
  double worst = 0.0;
  for (int c = 0; c < state.cols(); ++c) {
    if (deg(c) > mask) continue;
    for (int r = 0; r < state.rows(); ++r)
      worst = std::max(worst, std::abs(state(r, c)));
  }
  return worst;
}

inline double masked_max(const PolyModel& model, const PolySpinorForm& f, int mask) {
  double worst = 0.0;
  for (const auto& M : f.coeff) worst = std::max(worst, masked_max(model.space, M, mask));
  return worst;
}

inline double masked_norm(const PolyModel& model, const PolySpinorForm& f, int mask) {
  const IVec deg = model.space->fock->degrees();
  double sum = 0.0;
  for (const auto& M : f.coeff)
    for (int c = 0; c < M.cols(); ++c) {
      if (deg(c) > mask) continue;
      for (int r = 0; r < M.rows(); ++r) sum += std::norm(M(r, c));
    }
  return std::sqrt(sum);
}

inline PolySpinorForm project_form(const PolyModel& model, const BlockProjectors& P, int j,
                                   const PolySpinorForm& f) {
  PolySpinorForm out = zero_form(model);
  for (size_t m = 0; m < out.coeff.size(); ++m)
    out.coeff[m] = project_state(model.space, P, j, f.coeff[m]);
  return out;
}

// ---------------------------------------------------------------------------
// the flat covariant derivative on both models

// polynomial picture: partial_a lowers the monomial in slot a, the coframe
// wedges on the left
inline PolySpinorForm poly_derivative(const PolyModel& model, const PolySpinorForm& f) {
  const SpinorPtr& S = model.space;
  const auto& mi = *model.monomials;
  if ((int)f.coeff.size() != mi.size())
    throw std::invalid_argument("poly_derivative: field does not match model");
  const int d = 2 * S->n;
  std::vector<Mat> wedges(d);
  for (int a = 0; a < d; ++a) wedges[a] = S->forms.wedge_op(a).cast<cd>();
  PolySpinorForm out = zero_form(model);
  std::vector<int> idx;
  for (int m = 0; m < mi.size(); ++m)
    for (int a = 0; a < d; ++a) {
      idx = mi[m];
      idx[a] += 1;
      const int src = mi.find(idx);
      if (src < 0) continue;
      out.coeff[m].noalias() += double(idx[a]) * (wedges[a] * f.coeff[src]);
    }
  return out;
}

// torus picture: the mode k differentiates to a wedge by 2 pi i k
inline Mat mode_derivative(const SpinorPtr& S, const std::vector<int>& k, const Mat& state) {
  if ((int)k.size() != 2 * S->n)
    throw std::invalid_argument("mode_derivative: mode has wrong length");
  Mat out = Mat::Zero(state.rows(), state.cols());
  for (int a = 0; a < 2 * S->n; ++a) {
    if (k[a] == 0) continue;
    out.noalias() += cd(0.0, 2.0 * M_PI * k[a]) * (S->forms.wedge_op(a).cast<cd>() * state);
  }
  return out;
}

// ---------------------------------------------------------------------------
// field operators

namespace detail {

inline void check_model(const SpinorPtr& S, const PolyModel& model) {
  if (model.space->n != S->n || model.space->N != S->N)
    throw std::invalid_argument("FieldOperator: model built over a different space");
}

}  // namespace detail

// Operator acting on either field model, with coarse degree bookkeeping.
// Projector-built operators mix all Hermite degrees of one parity, so they
// carry the full truncation span as their window.
struct FieldOperator {
  int poly_degree_shift = 0;
  int form_shift = 0;
  int herm_lo = 0, herm_hi = 0;

  std::function<PolySpinorForm(const PolyModel&, const PolySpinorForm&)> on_poly;
  std::function<Mat(const std::vector<int>&, const Mat&)> on_mode;

  PolySpinorForm poly(const PolyModel& model, const PolySpinorForm& f) const {
    if (!on_poly) throw std::logic_error("FieldOperator: no polynomial action");
    return on_poly(model, f);
  }

  Mat mode(const std::vector<int>& k, const Mat& state) const {
    if (!on_mode) throw std::logic_error("FieldOperator: no mode action");
    return on_mode(k, state);
  }
};

inline FieldOperator exterior_spinor_derivative(const SpinorPtr& space) {
  FieldOperator op;
  op.poly_degree_shift = -1;
  op.form_shift = +1;
  op.herm_lo = 0;
  op.herm_hi = 0;
  op.on_poly = [space](const PolyModel& model, const PolySpinorForm& f) {
    detail::check_model(space, model);
    return poly_derivative(model, f);
  };
  op.on_mode = [space](const std::vector<int>& k, const Mat& st) {
    return mode_derivative(space, k, st);
  };
  return op;
}

// p^{i+1,k} d p^{ij}: one block of the covariant derivative against the fiber
// decomposition; vanishes unless the target degree is within one of j
inline FieldOperator block_operator(ProjectorCache& cache, int i, int j, int k) {
  const SpinorPtr S = cache.space();
  if (i < 0 || i >= 2 * S->n)
    throw std::invalid_argument("block_operator: form degree out of range");
  auto dom = cache.at(i);
  auto tgt = cache.at(i + 1);
  FieldOperator op;
  op.poly_degree_shift = -1;
  op.form_shift = +1;
  op.herm_lo = -S->N;
  op.herm_hi = +S->N;
  op.on_poly = [S, dom, tgt, j, k](const PolyModel& model, const PolySpinorForm& f) {
    detail::check_model(S, model);
    PolySpinorForm g = poly_derivative(model, project_form(model, *dom, j, f));
    PolySpinorForm out = zero_form(model);
    for (size_t m = 0; m < out.coeff.size(); ++m)
      out.coeff[m] = project_state(S, *tgt, k, g.coeff[m]);
    return out;
  };
  op.on_mode = [S, dom, tgt, j, k](const std::vector<int>& kvec, const Mat& st) {
    return project_state(S, *tgt, k, mode_derivative(S, kvec, project_state(S, *dom, j, st)));
  };
  return op;
}

inline int twistor_source(int n, int i) { return i < n ? i : 2 * n - i; }
inline int twistor_target(int n, int i) { return i < n ? i + 1 : 2 * n - i - 1; }

// the diagonal walk through the decomposition: up the first half, down the
// mirrored one; the step joining the halves belongs to neither complex
inline FieldOperator twistor(ProjectorCache& cache, int i) {
  const int n = cache.space()->n;
  if (i < 0 || i >= 2 * n) throw std::invalid_argument("twistor: index out of range");
  return block_operator(cache, i, twistor_source(n, i), twistor_target(n, i));
}

// symplectic Dirac operator: contract the degree-(0 -> 1) derivative block
// back to spinors with F-
inline FieldOperator dirac(ProjectorCache& cache) {
  const SpinorPtr S = cache.space();
  auto p0 = cache.at(0);
  auto p1 = cache.at(1);
  auto fm1 = std::make_shared<const Mat>(fm_block(S, 1));
  FieldOperator op;
  op.poly_degree_shift = -1;
  op.form_shift = 0;
  op.herm_lo = -S->N;
  op.herm_hi = +S->N;
  op.on_poly = [S, p0, p1, fm1](const PolyModel& model, const PolySpinorForm& f) {
    detail::check_model(S, model);
    PolySpinorForm g = poly_derivative(model, project_form(model, *p0, 0, f));
    PolySpinorForm out = zero_form(model);
    for (size_t m = 0; m < out.coeff.size(); ++m)
      out.coeff[m] = state_from_block(
          S, Vec((*fm1) * p1->apply(0, block_coordinates(S, g.coeff[m], 1))), 0);
    return out;
  };
  op.on_mode = [S, p0, p1, fm1](const std::vector<int>& kvec, const Mat& st) {
    const Mat g = mode_derivative(S, kvec, project_state(S, *p0, 0, st));
    return state_from_block(S, Vec((*fm1) * p1->apply(0, block_coordinates(S, g, 1))), 0);
  };
  return op;
}

// the degree-one companion: F- applied to the (1,1) -> (2,1) derivative block
inline FieldOperator rarita_schwinger(ProjectorCache& cache) {
  const SpinorPtr S = cache.space();
  auto p1 = cache.at(1);
  auto p2 = cache.at(2);
  auto fm2 = std::make_shared<const Mat>(fm_block(S, 2));
  FieldOperator op;
  op.poly_degree_shift = -1;
  op.form_shift = 0;
  op.herm_lo = -S->N;
  op.herm_hi = +S->N;
  op.on_poly = [S, p1, p2, fm2](const PolyModel& model, const PolySpinorForm& f) {
    detail::check_model(S, model);
    PolySpinorForm g = poly_derivative(model, project_form(model, *p1, 1, f));
    PolySpinorForm out = zero_form(model);
    for (size_t m = 0; m < out.coeff.size(); ++m)
      out.coeff[m] = state_from_block(
          S, Vec((*fm2) * p2->apply(1, block_coordinates(S, g.coeff[m], 2))), 1);
    return out;
  };
  op.on_mode = [S, p1, p2, fm2](const std::vector<int>& kvec, const Mat& st) {
    const Mat g = mode_derivative(S, kvec, project_state(S, *p1, 1, st));
    return state_from_block(S, Vec((*fm2) * p2->apply(1, block_coordinates(S, g, 2))), 1);
  };
  return op;
}

namespace detail {

// fock factors of a frame-contracted derivative: direction a acts by the
// Clifford generator of frame.col(a)
inline std::vector<Mat> contracted_gens(const SpinorPtr& S, const RMat& frame) {
  const int d = 2 * S->n;
  std::vector<Mat> gens(d), out(d);
  for (int k = 0; k < d; ++k) gens[k] = clifford_matrix(S->fock, k);
  for (int a = 0; a < d; ++a) {
    out[a] = Mat::Zero(S->fock_dim(), S->fock_dim());
    for (int p = 0; p < d; ++p)
      if (frame(p, a) != 0.0) out[a] += frame(p, a) * gens[p];
  }
  return out;
}

// polynomial action of sum_a G_a . partial_a (fock factors only, the form
// factor is untouched)
inline PolySpinorForm poly_contraction(const PolyModel& model, const std::vector<Mat>& G,
                                       const PolySpinorForm& f) {
  const auto& mi = *model.monomials;
  PolySpinorForm out = zero_form(model);
  std::vector<int> idx;
  for (int m = 0; m < mi.size(); ++m)
    for (int a = 0; a < (int)G.size(); ++a) {
      idx = mi[m];
      idx[a] += 1;
      const int src = mi.find(idx);
      if (src < 0) continue;
      out.coeff[m].noalias() += double(idx[a]) * (f.coeff[src] * G[a].transpose());
    }
  return out;
}

// per-mode matrix of the same contraction
inline Mat mode_contraction(const std::vector<Mat>& G, const std::vector<int>& k) {
  if (k.size() != G.size())
    throw std::invalid_argument("mode_contraction: mode has wrong length");
  Mat M = Mat::Zero(G[0].rows(), G[0].cols());
  for (size_t a = 0; a < G.size(); ++a)
    if (k[a] != 0) M += cd(0.0, 2.0 * M_PI * k[a]) * G[a];
  return M;
}

}  // namespace detail

// frame-contracted derivative sum_a (F e_a) . partial_a for a constant frame;
// with the identity frame this is the unprojected Dirac contraction, which on
// form-degree-zero fields agrees with twice dirac() above
inline FieldOperator frame_dirac(const SpinorPtr& space, const RMat& frame) {
  if (frame.rows() != 2 * space->n || frame.cols() != 2 * space->n)
    throw std::invalid_argument("frame_dirac: frame has wrong shape");
  auto G = std::make_shared<const std::vector<Mat>>(detail::contracted_gens(space, frame));
  FieldOperator op;
  op.poly_degree_shift = -1;
  op.form_shift = 0;
  op.herm_lo = -1;
  op.herm_hi = +1;
  op.on_poly = [space, G](const PolyModel& model, const PolySpinorForm& f) {
    detail::check_model(space, model);
    return detail::poly_contraction(model, *G, f);
  };
  op.on_mode = [space, G](const std::vector<int>& k, const Mat& st) {
    return Mat(st * detail::mode_contraction(*G, k).transpose());
  };
  return op;
}

inline FieldOperator frame_dirac(const SpinorPtr& space) {
  return frame_dirac(space, RMat::Identity(2 * space->n, 2 * space->n));
}

// the contraction twisted by the compatible complex structure
inline FieldOperator second_dirac(const SpinorPtr& space) {
  SymplecticData sd(space->n);
  return frame_dirac(space, sd.J);
}

// i[second_dirac, frame_dirac]; per mode this is a multiple of the identity,
// compared against the flat Laplacian by weitzenboeck_check
inline FieldOperator p_operator(const SpinorPtr& space) {
  SymplecticData sd(space->n);
  auto GJ = std::make_shared<const std::vector<Mat>>(detail::contracted_gens(space, sd.J));
  auto GI = std::make_shared<const std::vector<Mat>>(
      detail::contracted_gens(space, RMat::Identity(2 * space->n, 2 * space->n)));
  FieldOperator op;
  op.poly_degree_shift = -2;
  op.form_shift = 0;
  op.herm_lo = -2;
  op.herm_hi = +2;
  op.on_poly = [space, GJ, GI](const PolyModel& model, const PolySpinorForm& f) {
    detail::check_model(space, model);
    PolySpinorForm a = detail::poly_contraction(model, *GJ, detail::poly_contraction(model, *GI, f));
    PolySpinorForm b = detail::poly_contraction(model, *GI, detail::poly_contraction(model, *GJ, f));
    return cd(0.0, 1.0) * (a - b);
  };
  op.on_mode = [space, GJ, GI](const std::vector<int>& k, const Mat& st) {
    const Mat Dt = detail::mode_contraction(*GJ, k);
    const Mat Dh = detail::mode_contraction(*GI, k);
    const Mat M = cd(0.0, 1.0) * (Dt * Dh - Dh * Dt);
    return Mat(st * M.transpose());
  };
  return op;
}

// seeded nonzero integer modes with entries in [-3, 3]
inline std::vector<std::vector<int>> random_modes(int n, int count, Prng& rng) {
  std::vector<std::vector<int>> out;
  while ((int)out.size() < count) {
    std::vector<int> k(2 * n);
    bool nz = false;
    for (auto& v : k) {
      v = (int)rng.int_range(-3, 3);
      nz = nz || v != 0;
    }
    if (nz) out.push_back(std::move(k));
  }
  return out;
}

// ---------------------------------------------------------------------------
// twistor complex residuals

struct TwistorComplexReport {
  std::string model;
  int probes = 0;
  int mask = 0;
  int gap_index = 0;              // position of the unpaired step, n - 1
  std::vector<double> composite;  // T_{i+1} T_i for i = 0 .. 2n-2
  double gap = 0.0;               // composite at the turn, reported not bounded
  double splice_lower = 0.0;      // (T_n T_{n-1}) T_{n-2}
  double splice_upper = 0.0;      // T_{n+1} (T_n T_{n-1})
  double forbidden = 0.0;         // far-target leakage over every block pair

  // everything that must vanish, i.e. all but the gap
  double worst() const {
    double w = std::max({splice_lower, splice_upper, forbidden});
    for (size_t i = 0; i < composite.size(); ++i)
      if ((int)i != gap_index) w = std::max(w, composite[i]);
    return w;
  }
};

namespace detail {

inline void check_twistor_args(const SpinorPtr& S, int mask) {
  if (S->n < 2)
    throw std::invalid_argument("twistor_complex_residuals: the complexes need n > 1");
  // every summand in play must keep the probe window below its raising edge
  if (S->N < 2 * S->n + mask)
    throw std::invalid_argument(
        "twistor_complex_residuals: truncation too small for the probe window");
}

}  // namespace detail

// Residuals of both complexes on the polynomial model.  Probes are drawn
// inside the Hermite window, pushed through adjacent operator pairs, and the
// output is measured back inside the window; the composite at the turn of the
// walk is genuinely order one and reported as `gap`.
inline TwistorComplexReport twistor_complex_residuals(const PolyModel& model, int probes,
                                                      int mask, std::uint64_t seed) {
  const SpinorPtr& S = model.space;
  detail::check_twistor_args(S, mask);
  const int n = S->n;
  ProjectorCache cache(S);
  std::vector<FieldOperator> T;
  for (int i = 0; i < 2 * n; ++i) T.push_back(twistor(cache, i));

  TwistorComplexReport rep;
  rep.model = "polynomial";
  rep.probes = probes;
  rep.mask = mask;
  rep.gap_index = n - 1;
  rep.composite.assign(2 * n - 1, 0.0);

  Prng rng(seed);
  for (int t = 0; t < probes; ++t) {
    for (int i = 0; i + 1 < 2 * n; ++i) {
      PolySpinorForm f = random_form(model, rng, mask, i);
      PolySpinorForm fin = project_form(model, *cache.at(i), twistor_source(n, i), f);
      const double den = max_abs(fin);
      if (den < 1e-14) continue;
      PolySpinorForm w = T[(size_t)i + 1].poly(model, T[(size_t)i].poly(model, fin));
      rep.composite[i] = std::max(rep.composite[i], masked_max(model, w, mask) / den);
    }
    {
      PolySpinorForm f = random_form(model, rng, mask, n - 2);
      PolySpinorForm fin = project_form(model, *cache.at(n - 2), twistor_source(n, n - 2), f);
      const double den = max_abs(fin);
      if (den >= 1e-14) {
        PolySpinorForm w =
            T[n].poly(model, T[n - 1].poly(model, T[n - 2].poly(model, fin)));
        rep.splice_lower = std::max(rep.splice_lower, masked_max(model, w, mask) / den);
      }
    }
    {
      PolySpinorForm f = random_form(model, rng, mask, n - 1);
      PolySpinorForm fin = project_form(model, *cache.at(n - 1), twistor_source(n, n - 1), f);
      const double den = max_abs(fin);
      if (den >= 1e-14) {
        PolySpinorForm w =
            T[n + 1].poly(model, T[n].poly(model, T[n - 1].poly(model, fin)));
        rep.splice_upper = std::max(rep.splice_upper, masked_max(model, w, mask) / den);
      }
    }
    {
      PolySpinorForm f = random_form(model, rng, mask);
      const double den = max_abs(f);
      for (int i = 0; i + 1 < 2 * n; ++i) {
        auto Pi = cache.at(i);
        auto Pk = cache.at(i + 1);
        for (int j : Pi->targets) {
          bool any_far = false;
          for (int kk : Pk->targets) any_far = any_far || std::abs(kk - j) >= 2;
          if (!any_far) continue;
          PolySpinorForm g = poly_derivative(model, project_form(model, *Pi, j, f));
          for (int kk : Pk->targets) {
            if (std::abs(kk - j) < 2) continue;
            PolySpinorForm h = project_form(model, *Pk, kk, g);
            rep.forbidden = std::max(rep.forbidden, masked_max(model, h, mask) / den);
          }
        }
      }
    }
  }
  rep.gap = rep.composite[n - 1];
  return rep;
}

// Fourier-model version.  Block decompositions are built degree by degree and
// dropped once the walk has moved past them; the splice chains carry their
// intermediates across window steps so nothing is ever rebuilt.
inline TwistorComplexReport twistor_complex_residuals(
    const SpinorPtr& S, const std::vector<std::vector<int>>& modes, int probes, int mask,
    std::uint64_t seed) {
  detail::check_twistor_args(S, mask);
  if (modes.empty())
    throw std::invalid_argument("twistor_complex_residuals: no modes");
  for (const auto& k : modes)
    if ((int)k.size() != 2 * S->n)
      throw std::invalid_argument("twistor_complex_residuals: mode has wrong length");
  const int n = S->n;
  const int nm = (int)modes.size();

  TwistorComplexReport rep;
  rep.model = "fourier";
  rep.probes = probes;
  rep.mask = mask;
  rep.gap_index = n - 1;
  rep.composite.assign(2 * n - 1, 0.0);

  std::vector<Vec> wc(nm);
  for (int m = 0; m < nm; ++m) {
    wc[m] = Vec::Zero(2 * n);
    for (int a = 0; a < 2 * n; ++a) wc[m](a) = cd(0.0, 2.0 * M_PI * modes[m][a]);
  }

  Prng rng(seed);
  ProjectorCache cache(S);
  const IVec fdeg = S->fock->degrees();
  const int nf = S->fock_dim();

  auto random_block = [&](int deg) {
    Vec v = Vec::Zero(S->block_rows(deg));
    for (int f = 0; f < S->forms.degree_dim(deg); ++f)
      for (int s = 0; s < nf; ++s)
        if (fdeg(s) <= mask) v(f * nf + s) = rng.cgaussian();
    return v;
  };
  auto masked_block = [&](const Vec& v) {
    double worst = 0.0;
    for (int idx = 0; idx < v.size(); ++idx)
      if (fdeg(idx % nf) <= mask) worst = std::max(worst, std::abs(v(idx)));
    return worst;
  };

  struct Carried {
    Vec v;
    double den = 0.0;
  };
  std::vector<Carried> low(nm * probes), up(nm * probes);

  for (int i = 0; i + 1 < 2 * n; ++i) {
    if (i >= 1) cache.drop(i - 1);
    auto Pi = cache.at(i);
    auto P1 = cache.at(i + 1);
    auto P2 = cache.at(i + 2);
    const int sj = twistor_source(n, i);
    const int t1 = twistor_target(n, i);  // equals twistor_source(n, i + 1)
    const int t2 = twistor_target(n, i + 1);
    for (int m = 0; m < nm; ++m) {
      for (int t = 0; t < probes; ++t) {
        const int slot = m * probes + t;
        const Vec v = random_block(i);
        const Vec vin = Pi->apply(sj, v);
        const double den = max_abs(vin);
        Vec w2;
        if (den >= 1e-14) {
          const Vec w1 = P1->apply(t1, wedge_block_apply(S, i, wc[m], vin));
          w2 = P2->apply(t2, wedge_block_apply(S, i + 1, wc[m], w1));
          rep.composite[i] = std::max(rep.composite[i], masked_block(w2) / den);
        }
        if (i == n - 2 && den >= 1e-14) low[slot] = {w2, den};
        if (i == n - 1) {
          if (low[slot].den > 0.0) {
            const Vec z =
                P2->apply(t2, wedge_block_apply(S, i + 1, wc[m], P1->apply(t1, low[slot].v)));
            rep.splice_lower =
                std::max(rep.splice_lower, masked_block(z) / low[slot].den);
          }
          if (den >= 1e-14) up[slot] = {w2, den};
        }
        if (i == n && up[slot].den > 0.0) {
          const Vec z =
              P2->apply(t2, wedge_block_apply(S, i + 1, wc[m], P1->apply(t1, up[slot].v)));
          rep.splice_upper = std::max(rep.splice_upper, masked_block(z) / up[slot].den);
        }
      }
      {
        // far-target leakage at this block level; the top block has no far
        // pairs, so sweeping i through 2n-2 covers all of them
        const Vec v = random_block(i);
        const double den = max_abs(v);
        for (int j : Pi->targets) {
          bool any_far = false;
          for (int kk : P1->targets) any_far = any_far || std::abs(kk - j) >= 2;
          if (!any_far) continue;
          const Vec g = wedge_block_apply(S, i, wc[m], Pi->apply(j, v));
          for (int kk : P1->targets) {
            if (std::abs(kk - j) < 2) continue;
            rep.forbidden = std::max(rep.forbidden, masked_block(P1->apply(kk, g)) / den);
          }
        }
      }
    }
  }
  rep.gap = rep.composite[n - 1];
  return rep;
}

// ---------------------------------------------------------------------------
// Laplacian comparison

struct WeitzenboeckReport {
  std::vector<std::vector<int>> modes;
  std::vector<double> laplacian_residual;  // against 4 pi^2 |k|^2, relative above 1
  std::vector<double> self_adjointness;
  double worst = 0.0;
};

// Per-mode comparison of i[second_dirac, frame_dirac] with the flat spinor
// Laplacian.  Columns are restricted to Hermite degrees <= N - 2 so both
// Clifford factors act unclipped; on those columns the identity needs no row
// restriction.  The form factor is inert here, so the check runs on the Fock
// factor alone.
inline WeitzenboeckReport weitzenboeck_check(int n, const FockPtr& trunc,
                                             const std::vector<std::vector<int>>& modes) {
  SymplecticData sd(n);
  const int d = 2 * n, nf = trunc->dim();
  std::vector<Mat> gens(d), gj(d);
  for (int k = 0; k < d; ++k) gens[k] = clifford_matrix(trunc, k);
  for (int a = 0; a < d; ++a) {
    gj[a] = Mat::Zero(nf, nf);
    for (int p = 0; p < d; ++p)
      if (sd.J(p, a) != 0.0) gj[a] += sd.J(p, a) * gens[p];
  }
  const IVec deg = trunc->degrees();
  std::vector<int> safe;
  for (int s = 0; s < nf; ++s)
    if (deg(s) <= trunc->maxdeg() - 2) safe.push_back(s);

  WeitzenboeckReport rep;
  rep.modes = modes;
  for (const auto& k : modes) {
    if ((int)k.size() != d)
      throw std::invalid_argument("weitzenboeck_check: mode has wrong length");
    const Mat Dt = detail::mode_contraction(gj, k);
    const Mat Dh = detail::mode_contraction(gens, k);
    const Mat P = cd(0.0, 1.0) * (Dt * Dh - Dh * Dt);
    double k2 = 0.0;
    for (int a = 0; a < d; ++a) k2 += double(k[a]) * double(k[a]);
    const double lam = 4.0 * M_PI * M_PI * k2;
    double resid = 0.0;
    for (int c : safe)
      for (int r = 0; r < nf; ++r) {
        const cd want = (r == c) ? cd(lam, 0.0) : cd(0.0, 0.0);
        resid = std::max(resid, std::abs(P(r, c) - want));
      }
    resid /= std::max(lam, 1.0);
    double sa = 0.0;
    for (int c : safe)
      for (int r : safe) sa = std::max(sa, std::abs(P(r, c) - std::conj(P(c, r))));
    rep.laplacian_residual.push_back(resid);
    rep.self_adjointness.push_back(sa);
    rep.worst = std::max({rep.worst, resid, sa});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// the first-order pencil on polynomial fields

struct KillingReport {
  std::vector<cd> eigenvalues;      // verified pencil values
  double pencil_bound = 0.0;        // worst sigma_min / sigma_max among them
  int kernel_dim = 0;               // solution space at mu = 0
  int constant_dim = 0;             // coefficient-constant fields
  int intersection_dim = 0;         // Ker T_0 cap Ker dirac on windowed columns
  int derivative_kernel_dim = 0;    // Ker d on the same columns
  int safe_constant_dim = 0;        // constants inside the window
  double constant_residual = 0.0;   // constants pushed through [T_0; dirac]
  double inclusion_residual = 0.0;  // mutual projection defect of the two kernels
  bool descriptions_match = false;
};

// Joint first-order pencil on spinor fields: monomial differentiation against
// Clifford contraction, one block row per coordinate direction.  Flat space
// admits only mu = 0, and its solution space is cross-checked against the
// kernel-intersection description computed independently from fiber blocks.
inline KillingReport killing_solve(const PolyModel& model) {
  const SpinorPtr& S = model.space;
  const auto& mi = *model.monomials;
  if (mi.maxdeg() < 1)
    throw std::invalid_argument("killing_solve: polynomial degree bound must be at least 1");
  const int d = 2 * S->n, NM = mi.size(), nf = S->fock_dim();
  const int fields = NM * nf;

  std::vector<Mat> gens(d);
  for (int k = 0; k < d; ++k) gens[k] = clifford_matrix(S->fock, k);

  Mat M0 = Mat::Zero(d * fields, fields), M1 = Mat::Zero(d * fields, fields);
  std::vector<int> idx;
  for (int m = 0; m < NM; ++m)
    for (int a = 0; a < d; ++a) {
      idx = mi[m];
      idx[a] += 1;
      const int src = mi.find(idx);
      if (src >= 0)
        M0.block(a * fields + m * nf, src * nf, nf, nf) =
            double(idx[a]) * Mat::Identity(nf, nf);
      M1.block(a * fields + m * nf, m * nf, nf, nf) = gens[a];
    }

  KillingReport rep;
  rep.constant_dim = nf;

  // candidate values from the pseudoinverse compression, then a direct rank
  // verdict on the pencil for each candidate
  const Eig eg = eig(Mat(pinv_svd(M1) * M0));
  std::vector<cd> cands;
  for (int i = 0; i < eg.values.size(); ++i) {
    bool dup = false;
    for (const cd& c : cands)
      if (std::abs(eg.values(i) - c) < 1e-7) dup = true;
    if (!dup) cands.push_back(eg.values(i));
  }
  for (const cd& mu : cands) {
    const RVec s = singular_values(Mat(M0 - mu * M1));
    const double ratio = s(s.size() - 1) / std::max(s(0), 1e-300);
    if (ratio < 1e-8) {
      rep.eigenvalues.push_back(mu);
      rep.pencil_bound = std::max(rep.pencil_bound, ratio);
    }
  }
  {
    const RVec s = singular_values(M0);
    int k = 0;
    for (int i = 0; i < s.size(); ++i)
      if (s(i) < 1e-8 * std::max(s(0), 1e-300)) ++k;
    rep.kernel_dim = k;
  }

  // Independent description: fields killed by both T_0 and the Dirac
  // contraction.  Columns are restricted to Hermite degrees <= N - 2; the
  // full columns drag truncation junk into the kernel count.
  const int dsafe = S->N - 2;
  ProjectorCache cache(S);
  auto P1 = cache.at(1);
  const int rows1 = S->block_rows(1);
  const Mat fm1 = fm_block(S, 1);
  const Mat P1m0 = P1->matrix(0), P1m1 = P1->matrix(1);
  std::vector<Mat> T0W(d), DW(d), dW(d);
  for (int a = 0; a < d; ++a) {
    Mat W = Mat::Zero(rows1, nf);
    const RMat wb = S->forms.block(S->forms.wedge_op(a), 1, 0);
    for (int f = 0; f < S->forms.degree_dim(1); ++f)
      if (wb(f, 0) != 0.0)
        W.middleRows(f * nf, nf) = wb(f, 0) * Mat::Identity(nf, nf);
    dW[a] = W;
    T0W[a] = P1m1 * W;
    DW[a] = fm1 * (P1m0 * W);
  }

  const IVec fdeg = S->fock->degrees();
  std::vector<int> safe;
  for (int s = 0; s < nf; ++s)
    if (fdeg(s) <= dsafe) safe.push_back(s);
  const int ns = (int)safe.size();
  rep.safe_constant_dim = ns;
  const int ncols = NM * ns;

  Mat T0m = Mat::Zero(NM * rows1, ncols);
  Mat Dfm = Mat::Zero(NM * nf, ncols);
  Mat dm = Mat::Zero(NM * rows1, ncols);
  for (int m = 0; m < NM; ++m)
    for (int a = 0; a < d; ++a) {
      idx = mi[m];
      idx[a] += 1;
      const int src = mi.find(idx);
      if (src < 0) continue;
      const double cf = double(idx[a]);
      for (int c = 0; c < ns; ++c) {
        const int col = src * ns + c;
        T0m.col(col).segment(m * rows1, rows1) += cf * T0W[a].col(safe[c]);
        Dfm.col(col).segment(m * nf, nf) += cf * DW[a].col(safe[c]);
        dm.col(col).segment(m * rows1, rows1) += cf * dW[a].col(safe[c]);
      }
    }

  auto kernel_count = [](const Mat& A) {
    const RVec s = singular_values(A);
    int k = (int)A.cols() - (int)s.size();
    for (int i = 0; i < s.size(); ++i)
      if (s(i) < 1e-8 * std::max(s(0), 1e-300)) ++k;
    return k;
  };
  Mat stacked(T0m.rows() + Dfm.rows(), ncols);
  stacked.topRows(T0m.rows()) = T0m;
  stacked.bottomRows(Dfm.rows()) = Dfm;
  rep.intersection_dim = kernel_count(stacked);
  rep.derivative_kernel_dim = kernel_count(dm);

  // constants occupy the leading monomial; their columns must be dead exactly
  double cres = 0.0;
  for (int c = 0; c < ns; ++c)
    cres = std::max(cres, stacked.col(c).cwiseAbs().maxCoeff());
  rep.constant_residual = cres;

  // Mutual containment of the two kernels, not just a dimension count.  The
  // pencil's mu = 0 member is rebuilt on the windowed columns so both kernels
  // live in the same coordinate space, then each orthonormal basis is
  // projected onto the other.
  {
    Mat M0w = Mat::Zero(d * fields, ncols);
    for (int m = 0; m < NM; ++m)
      for (int a = 0; a < d; ++a) {
        idx = mi[m];
        idx[a] += 1;
        const int src = mi.find(idx);
        if (src < 0) continue;
        for (int c = 0; c < ns; ++c)
          M0w(a * fields + m * nf + safe[c], src * ns + c) += double(idx[a]);
      }
    auto kernel_of = [](const Mat& A) -> Mat {
      const RVec s = singular_values(A);
      return kernel_basis(A, 1e-8 * std::max(s(0), 1e-300));
    };
    const Mat K1 = kernel_of(M0w), K2 = kernel_of(stacked);
    if (K1.cols() > 0 && K1.cols() == K2.cols()) {
      const double r12 = max_abs(Mat(K1 - K2 * (K2.adjoint() * K1)));
      const double r21 = max_abs(Mat(K2 - K1 * (K1.adjoint() * K2)));
      rep.inclusion_residual = std::max(r12, r21);
    } else {
      rep.inclusion_residual = 1.0;
    }
  }

  bool only_zero = !rep.eigenvalues.empty();
  for (const cd& mu : rep.eigenvalues)
    if (std::abs(mu) > 1e-8) only_zero = false;
  rep.descriptions_match = only_zero && rep.kernel_dim == rep.constant_dim &&
                           rep.intersection_dim == rep.derivative_kernel_dim &&
                           rep.intersection_dim == rep.safe_constant_dim &&
                           rep.constant_residual <= 1e-9 &&
                           rep.inclusion_residual <= 1e-9;
  return rep;
}

// ---------------------------------------------------------------------------
// spectrum transfer through the first twistor operator

struct EigenpairTransfer {
  cd value;
  double residual;
};

struct SpectrumTransferReport {
  std::string model;
  double coefficient = 0.0;  // (n - 1) / n
  double operator_residual = 0.0;
  int pairs_total = 0;
  int pairs_kept = 0;  // eigenvectors whose image under T_0 is away from zero
  double worst_pair = 0.0;
  std::vector<EigenpairTransfer> pairs;
};

namespace detail {

// fiber blocks of the three operators for one wedge coefficient vector,
// everything restricted to the degree-0/1 fibers
struct TransferFibers {
  Mat T0M;   // E^0 -> degree-1 block
  Mat DirM;  // E^0 -> E^0
  Mat RarM;  // degree-1 block -> itself
};

inline TransferFibers transfer_fibers(const SpinorPtr& S, const BlockProjectors& P0,
                                      const BlockProjectors& P1, const BlockProjectors& P2,
                                      const Mat& fm1, const Mat& fm2, const Vec& c) {
  const int nf = S->fock_dim();
  const int rows1 = S->block_rows(1), rows2 = S->block_rows(2);
  Mat wx = Mat::Zero(rows1, nf);
  {
    const int d1 = S->forms.degree_dim(1);
    for (int a = 0; a < c.size(); ++a) {
      if (c(a) == cd(0.0, 0.0)) continue;
      const RMat wb = S->forms.block(S->forms.wedge_op(a), 1, 0);
      for (int f = 0; f < d1; ++f)
        if (wb(f, 0) != 0.0)
          wx.middleRows(f * nf, nf) += (c(a) * wb(f, 0)) * Mat::Identity(nf, nf);
    }
  }
  Mat w1 = Mat::Zero(rows2, rows1);
  {
    for (int a = 0; a < c.size(); ++a) {
      if (c(a) == cd(0.0, 0.0)) continue;
      const RMat wb = S->forms.block(S->forms.wedge_op(a), 2, 1);
      for (int r = 0; r < wb.rows(); ++r)
        for (int cc = 0; cc < wb.cols(); ++cc)
          if (wb(r, cc) != 0.0)
            w1.block(r * nf, cc * nf, nf, nf) +=
                (c(a) * wb(r, cc)) * Mat::Identity(nf, nf);
    }
  }
  TransferFibers out;
  const Mat P0m = P0.matrix(0);
  const Mat P1m1 = P1.matrix(1);
  out.T0M = P1m1 * (wx * P0m);
  out.DirM = fm1 * (P1.matrix(0) * (wx * P0m));
  out.RarM = fm2 * (P2.matrix(1) * (w1 * P1m1));
  return out;
}

}  // namespace detail

// Polynomial flavor: the operator identity is probed on seeded fields; the
// eigenpair form uses a kernel basis of the (nilpotent) Dirac compression,
// since a defective matrix gives eig nothing trustworthy to keep.
inline SpectrumTransferReport spectrum_transfer_check(const PolyModel& model, int probes,
                                                      std::uint64_t seed) {
  const SpinorPtr& S = model.space;
  if (S->n < 2)
    throw std::invalid_argument("spectrum_transfer_check: defined for n > 1");
  ProjectorCache cache(S);
  const FieldOperator T0 = twistor(cache, 0);
  const FieldOperator Dir = dirac(cache);
  const FieldOperator Rar = rarita_schwinger(cache);

  SpectrumTransferReport rep;
  rep.model = "polynomial";
  rep.coefficient = double(S->n - 1) / double(S->n);

  Prng rng(seed);
  for (int t = 0; t < probes; ++t) {
    PolySpinorForm f = random_form(model, rng, 2, 0);
    PolySpinorForm t0f = T0.poly(model, f);
    const double den = std::max(max_abs(t0f), 1e-30);
    PolySpinorForm diff =
        Rar.poly(model, t0f) -
        cd(rep.coefficient, 0.0) * T0.poly(model, Dir.poly(model, f));
    rep.operator_residual =
        std::max(rep.operator_residual, masked_max(model, diff, 2) / den);
  }

  // windowed compression of the Dirac operator, assembled per monomial
  const auto& mi = *model.monomials;
  const int NM = mi.size(), nf = S->fock_dim();
  const IVec fdeg = S->fock->degrees();
  std::vector<int> safe;
  for (int s = 0; s < nf; ++s)
    if (fdeg(s) <= S->N - 2) safe.push_back(s);
  const int ns = (int)safe.size();

  auto P1 = cache.at(1);
  const Mat fm1 = fm_block(S, 1);
  const Mat P1m0 = P1->matrix(0);
  const int rows1 = S->block_rows(1);
  std::vector<Mat> DW(2 * S->n);
  for (int a = 0; a < 2 * S->n; ++a) {
    Mat W = Mat::Zero(rows1, nf);
    const RMat wb = S->forms.block(S->forms.wedge_op(a), 1, 0);
    for (int f = 0; f < S->forms.degree_dim(1); ++f)
      if (wb(f, 0) != 0.0)
        W.middleRows(f * nf, nf) = wb(f, 0) * Mat::Identity(nf, nf);
    DW[a] = fm1 * (P1m0 * W);
  }
  Mat Dc = Mat::Zero(NM * ns, NM * ns);
  std::vector<int> idx;
  for (int m = 0; m < NM; ++m)
    for (int a = 0; a < 2 * S->n; ++a) {
      idx = mi[m];
      idx[a] += 1;
      const int src = mi.find(idx);
      if (src < 0) continue;
      for (int c = 0; c < ns; ++c)
        for (int r = 0; r < ns; ++r)
          Dc(m * ns + r, src * ns + c) += double(idx[a]) * DW[a](safe[r], safe[c]);
    }

  const RVec sv = singular_values(Dc);
  const double s0 = sv.size() > 0 ? sv(0) : 0.0;
  const Mat K = kernel_basis(Dc, std::max(1e-9 * s0, 1e-300));
  rep.pairs_total = (int)K.cols();
  for (int c = 0; c < K.cols(); ++c) {
    PolySpinorForm phi = zero_form(model);
    for (int m = 0; m < NM; ++m)
      for (int r = 0; r < ns; ++r) phi.coeff[m](0, safe[r]) = K(m * ns + r, c);
    PolySpinorForm t0 = T0.poly(model, phi);
    const double nt = masked_norm(model, t0, 2);
    if (nt < 1e-6) continue;  // kernel columns are unit vectors
    ++rep.pairs_kept;
    const double res = masked_norm(model, Rar.poly(model, t0), 2) / nt;
    rep.pairs.push_back({cd(0.0, 0.0), res});
    rep.worst_pair = std::max(rep.worst_pair, res);
  }
  return rep;
}

// Fourier flavor: per mode the fibers are dense and small, so both the
// operator identity and the eigenpairs of the compression are read off
// directly.
inline SpectrumTransferReport spectrum_transfer_check(
    const SpinorPtr& S, const std::vector<std::vector<int>>& modes) {
  if (S->n < 2)
    throw std::invalid_argument("spectrum_transfer_check: defined for n > 1");
  if (modes.empty())
    throw std::invalid_argument("spectrum_transfer_check: no modes");
  ProjectorCache cache(S);
  auto P0 = cache.at(0), P1 = cache.at(1), P2 = cache.at(2);
  const Mat fm1 = fm_block(S, 1), fm2 = fm_block(S, 2);
  const int nf = S->fock_dim();
  const IVec fdeg = S->fock->degrees();

  SpectrumTransferReport rep;
  rep.model = "fourier";
  rep.coefficient = double(S->n - 1) / double(S->n);

  std::vector<int> eig_cols;
  for (int s = 0; s < nf; ++s)
    if (fdeg(s) <= S->N - 2) eig_cols.push_back(s);
  std::vector<int> mask0;
  for (int s = 0; s < nf; ++s)
    if (fdeg(s) <= 2) mask0.push_back(s);
  std::vector<int> mask1;
  for (int f = 0; f < S->forms.degree_dim(1); ++f)
    for (int s = 0; s < nf; ++s)
      if (fdeg(s) <= 2) mask1.push_back(f * nf + s);

  for (const auto& k : modes) {
    if ((int)k.size() != 2 * S->n)
      throw std::invalid_argument("spectrum_transfer_check: mode has wrong length");
    Vec c = Vec::Zero(2 * S->n);
    for (int a = 0; a < 2 * S->n; ++a) c(a) = cd(0.0, 2.0 * M_PI * k[a]);
    const detail::TransferFibers fib = detail::transfer_fibers(S, *P0, *P1, *P2, fm1, fm2, c);
    const Mat M = fib.RarM * fib.T0M - cd(rep.coefficient, 0.0) * (fib.T0M * fib.DirM);
    double opres = 0.0;
    for (int cc : mask0)
      for (int r : mask1) opres = std::max(opres, std::abs(M(r, cc)));
    opres /= std::max(max_abs(fib.T0M), 1e-300);
    rep.operator_residual = std::max(rep.operator_residual, opres);

    Mat Dcc((int)eig_cols.size(), (int)eig_cols.size());
    for (size_t cc = 0; cc < eig_cols.size(); ++cc)
      for (size_t r = 0; r < eig_cols.size(); ++r)
        Dcc((int)r, (int)cc) = fib.DirM(eig_cols[r], eig_cols[cc]);
    const Eig ev = eig(Dcc);
    for (int cc = 0; cc < ev.values.size(); ++cc) {
      Vec phi = Vec::Zero(nf);
      for (size_t r = 0; r < eig_cols.size(); ++r)
        phi(eig_cols[r]) = ev.vectors((int)r, cc);
      const Vec t0 = fib.T0M * phi;
      double nt = 0.0;
      for (int r : mask1) nt += std::norm(t0(r));
      nt = std::sqrt(nt);
      ++rep.pairs_total;
      if (nt < 1e-6) continue;  // eigenvectors come back unit length
      ++rep.pairs_kept;
      const cd mu = ev.values(cc);
      const Vec rr = fib.RarM * t0 - cd(rep.coefficient, 0.0) * mu * t0;
      double nr = 0.0;
      for (int r : mask1) nr += std::norm(rr(r));
      const double res = std::sqrt(nr) / nt;
      rep.pairs.push_back({mu, res});
      rep.worst_pair = std::max(rep.worst_pair, res);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// principal symbols and ellipticity bookkeeping

struct SymbolRow {
  int index = 0;   // which operator of the walk
  int domain = 0;  // dimension of the projected domain fiber
  int rank = 0;
  int kernel = 0;  // domain - rank
  int defect = 0;  // kernel minus the previous rank
};

struct SymbolReport {
  RVec xi;
  int safe_degree = 2;
  std::vector<SymbolRow> rows;
};

namespace detail {

inline std::vector<SymbolRow> symbol_rows(const SpinorPtr& S, ProjectorCache& cache,
                                          const RVec& xi, int safe_degree) {
  const int nf = S->fock_dim();
  const IVec fdeg = S->fock->degrees();
  auto safe_block = [&](int deg) {
    std::vector<int> out;
    for (int f = 0; f < S->forms.degree_dim(deg); ++f)
      for (int s = 0; s < nf; ++s)
        if (fdeg(s) <= safe_degree) out.push_back(f * nf + s);
    return out;
  };
  std::vector<SymbolRow> rows;
  int prev_rank = 0;
  for (int i = 0; i < 2 * S->n; ++i) {
    auto Pi = cache.at(i);
    auto Pk = cache.at(i + 1);
    const Mat Pim = Pi->matrix(twistor_source(S->n, i));
    const Mat Pkm = Pk->matrix(twistor_target(S->n, i));
    Mat wx = Mat::Zero(S->block_rows(i + 1), S->block_rows(i));
    for (int a = 0; a < 2 * S->n; ++a) {
      if (xi(a) == 0.0) continue;
      const RMat wb = S->forms.block(S->forms.wedge_op(a), i + 1, i);
      for (int r = 0; r < wb.rows(); ++r)
        for (int c = 0; c < wb.cols(); ++c)
          if (wb(r, c) != 0.0)
            wx.block(r * nf, c * nf, nf, nf) +=
                (xi(a) * wb(r, c)) * Mat::Identity(nf, nf);
    }
    const Mat full = Pkm * (wx * Pim);
    const auto ri = safe_block(i + 1), ci = safe_block(i);
    Mat Msig((int)ri.size(), (int)ci.size());
    for (size_t r = 0; r < ri.size(); ++r)
      for (size_t c = 0; c < ci.size(); ++c) Msig((int)r, (int)c) = full(ri[r], ci[c]);
    Mat Pic((int)ci.size(), (int)ci.size());
    for (size_t r = 0; r < ci.size(); ++r)
      for (size_t c = 0; c < ci.size(); ++c) Pic((int)r, (int)c) = Pim(ci[r], ci[c]);
    const RVec s1 = singular_values(std::move(Msig));
    int rk = 0;
    if (s1.size() > 0 && s1(0) > 0.0)
      for (int t = 0; t < s1.size(); ++t)
        if (s1(t) > 1e-8 * s1(0)) ++rk;
    const RVec s2 = singular_values(std::move(Pic));
    int dom = 0;
    for (int t = 0; t < s2.size(); ++t)
      if (s2(t) > 0.5) ++dom;
    rows.push_back({i, dom, rk, dom - rk, (dom - rk) - prev_rank});
    prev_rank = rk;
  }
  return rows;
}

}  // namespace detail

// Ranks of the windowed symbols p^{i+1} (xi wedge) p^i along the walk.  The
// defect column is the exactness bookkeeping of the symbol sequence; clipped
// fibers can leave it negative, which is reported as data, not asserted away.
inline SymbolReport symbol_complex(const SpinorPtr& S, const RVec& xi, int safe_degree = 2) {
  if (xi.size() != 2 * S->n)
    throw std::invalid_argument("symbol_complex: covector has wrong length");
  if (xi.cwiseAbs().maxCoeff() == 0.0)
    throw std::invalid_argument("symbol_complex: zero covector has no symbol");
  ProjectorCache cache(S);
  SymbolReport rep;
  rep.xi = xi;
  rep.safe_degree = safe_degree;
  rep.rows = detail::symbol_rows(S, cache, xi, safe_degree);
  return rep;
}

struct EllipticityReport {
  int draws = 0;
  bool stable = false;  // one table across all directions and their doublings
  std::vector<SymbolRow> rows;
};

// The rank table must not depend on the covector: every seeded direction and
// its doubling has to reproduce it.
inline EllipticityReport ellipticity_check(const SpinorPtr& S, int draws, std::uint64_t seed,
                                           int safe_degree = 2) {
  if (draws < 1) throw std::invalid_argument("ellipticity_check: need at least one draw");
  Prng rng(seed);
  ProjectorCache cache(S);
  EllipticityReport rep;
  rep.draws = draws;
  rep.stable = true;
  auto same = [](const std::vector<SymbolRow>& a, const std::vector<SymbolRow>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
      if (a[i].domain != b[i].domain || a[i].rank != b[i].rank ||
          a[i].kernel != b[i].kernel || a[i].defect != b[i].defect)
        return false;
    return true;
  };
  for (int t = 0; t < draws; ++t) {
    RVec xi(2 * S->n);
    for (int a = 0; a < xi.size(); ++a) xi(a) = rng.gaussian();
    if (xi.cwiseAbs().maxCoeff() == 0.0) xi(0) = 1.0;
    const auto r1 = detail::symbol_rows(S, cache, xi, safe_degree);
    const auto r2 = detail::symbol_rows(S, cache, RVec(2.0 * xi), safe_degree);
    if (t == 0) rep.rows = r1;
    if (!same(rep.rows, r1) || !same(rep.rows, r2)) rep.stable = false;
  }
  return rep;
}

}  // namespace symspin
