#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "symspin/fock.hpp"
#include "symspin/forms.hpp"
#include "symspin/kron.hpp"
#include "symspin/lapack.hpp"
#include "symspin/rng.hpp"
#include "symspin/types.hpp"

namespace symspin {

// Spinor-valued forms E = Lambda V* (x) S_N.  A state is a matrix with form
// basis elements on rows and Hermite basis elements on columns, so Kronecker
// operators apply without materializing the 2^{2n} * dim(S_N) product space.
// Dense matrices are only ever built per form degree, which keeps the larger
// truncations (n = 3) inside a few hundred megabytes.
struct SpinorSpace {
  int n, N;
  FockPtr fock;
  FormSpace forms;

  SpinorSpace(int n_, int N_)
      : n(n_), N(N_), fock(FockSpace::make(n_, N_)), forms(n_) {}

  static std::shared_ptr<const SpinorSpace> make(int n, int N) {
    return std::make_shared<const SpinorSpace>(n, N);
  }

  int form_dim() const { return forms.dim(); }
  int fock_dim() const { return fock->dim(); }
  int block_rows(int deg) const { return forms.degree_dim(deg) * fock->dim(); }
};

using SpinorPtr = std::shared_ptr<const SpinorSpace>;

// operator on E tagged with its form-degree shift and Hermite window
struct SpinorOperator {
  int form_shift = 0;
  int herm_lo = 0, herm_hi = 0;
  KronOpSum op;

  Mat apply(const Mat& V) const { return op.apply(V); }
};

struct OspGenerators {
  SpinorPtr space;
  SpinorOperator Fp, Fm, Ep, Em, H;
};

// The five operators of the superalgebra acting on E:
//   F+ = (i/2) sum_k  eps^k wedge (x) e_k,
//   F- = (1/2) sum_ij omega^{ij} iota_i (x) e_j,
// with E+- and H given by their closed forms (anticommutators of F+-, and the
// shifted form-degree grading).
inline OspGenerators build_osp(int n, const FockPtr& trunc) {
  auto space = SpinorSpace::make(n, trunc->maxdeg());
  const auto& fs = space->forms;
  const int d = 2 * n, fdim = fs.dim(), sdim = trunc->dim();
  SymplecticData sd(n);

  std::vector<Mat> E(d), wedges(d), iotas(d);
  for (int k = 0; k < d; ++k) {
    E[k] = clifford_matrix(trunc, k);
    wedges[k] = fs.wedge_op(k).cast<cd>();
    iotas[k] = fs.iota_op(k).cast<cd>();
  }

  OspGenerators gen;
  gen.space = space;
  gen.Fp = {+1, -1, +1, {}};
  for (int k = 0; k < d; ++k) gen.Fp.op.add(cd(0.0, 0.5) * wedges[k], E[k]);

  gen.Fm = {-1, -1, +1, {}};
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (sd.omega_upper(i, j) != 0.0)
        gen.Fm.op.add(0.5 * sd.omega_upper(i, j) * iotas[i], E[j]);

  const Mat idf = Mat::Identity(sdim, sdim);
  gen.Ep = {+2, 0, 0, {}};
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      if (sd.omega_lower(a, b) != 0.0)
        gen.Ep.op.add(cd(0.0, 0.5) * sd.omega_lower(a, b) * (wedges[a] * wedges[b]), idf);

  gen.Em = {-2, 0, 0, {}};
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k)
      if (sd.omega_upper(i, k) != 0.0)
        gen.Em.op.add(cd(0.0, 0.5) * sd.omega_upper(i, k) * (iotas[i] * iotas[k]), idf);

  Mat hform = Mat::Zero(fdim, fdim);
  const IVec fd = fs.degrees();
  for (int i = 0; i < fdim; ++i) hform(i, i) = 0.5 * (fd(i) - n);
  gen.H = {0, 0, 0, {}};
  gen.H.op.add(std::move(hform), idf);
  return gen;
}

// tensor action of the sp element with canonical blocks (A, B, C): the form
// factor carries the coframe-adapted dual action, the spinor factor the
// metaplectic one; this is the action the osp operators commute with
inline SpinorOperator sp_action_on_E(const RMat& A, const RMat& B, const RMat& C,
                                     const SpinorPtr& space) {
  const RMat Xs = to_symp(sp_canonical(A, B, C), space->n);
  SpinorOperator out{0, -2, +2, {}};
  out.op.add(sp_form_matrix(Xs, space->forms).cast<cd>(),
             Mat::Identity(space->fock_dim(), space->fock_dim()));
  out.op.add(Mat::Identity(space->form_dim(), space->form_dim()),
             lie_action(A, B, C, space->fock).m);
  return out;
}

// random state supported on Hermite degrees <= safe_deg, sup-normalized
inline Mat random_state(const SpinorPtr& space, Prng& rng, int safe_deg) {
  Mat V = Mat::Zero(space->form_dim(), space->fock_dim());
  const IVec deg = space->fock->degrees();
  for (int c = 0; c < V.cols(); ++c) {
    if (deg(c) > safe_deg) continue;
    for (int r = 0; r < V.rows(); ++r) V(r, c) = rng.cgaussian();
  }
  const double m = max_abs(V);
  if (m > 0.0) V /= m;
  return V;
}

// Residuals of the defining relations and construction identities, measured
// by applying both sides to seeded probe states on the safe core.  The first
// six entries are the defining relations; the rest pin the construction.
inline std::vector<std::pair<std::string, double>> osp_relation_residuals(
    const OspGenerators& g, int probes, uint64_t seed) {
  const auto& S = g.space;
  Prng rng(seed);
  const KronOpSum &Fp = g.Fp.op, &Fm = g.Fm.op, &Ep = g.Ep.op, &Em = g.Em.op,
                  &H = g.H.op;
  auto comm = [](const KronOpSum& a, const KronOpSum& b, const Mat& v) {
    return commutator_apply(a, b, v);
  };
  auto acomm = [](const KronOpSum& a, const KronOpSum& b, const Mat& v) {
    return anticommutator_apply(a, b, v);
  };
  // explicit Mat returns: deduced Eigen expression types would outlive their
  // temporaries once stored in std::function
  using Fn = std::function<Mat(const Mat&)>;
  const std::vector<std::pair<std::string, Fn>> relations = {
      {"[H,E+] = E+", [&](const Mat& v) -> Mat { return comm(H, Ep, v) - Ep.apply(v); }},
      {"[H,E-] = -E-", [&](const Mat& v) -> Mat { return comm(H, Em, v) + Em.apply(v); }},
      {"[E+,E-] = 2H", [&](const Mat& v) -> Mat { return comm(Ep, Em, v) - 2.0 * H.apply(v); }},
      {"[H,F+] = F+/2", [&](const Mat& v) -> Mat { return comm(H, Fp, v) - 0.5 * Fp.apply(v); }},
      {"[H,F-] = -F-/2", [&](const Mat& v) -> Mat { return comm(H, Fm, v) + 0.5 * Fm.apply(v); }},
      {"{F+,F-} = H/2", [&](const Mat& v) -> Mat { return acomm(Fp, Fm, v) - 0.5 * H.apply(v); }},
      {"E+ = 4F+^2", [&](const Mat& v) -> Mat { return Ep.apply(v) - 4.0 * Fp.apply(Fp.apply(v)); }},
      {"E- = -4F-^2", [&](const Mat& v) -> Mat { return Em.apply(v) + 4.0 * Fm.apply(Fm.apply(v)); }},
      {"{F+,F+} = E+/2", [&](const Mat& v) -> Mat { return acomm(Fp, Fp, v) - 0.5 * Ep.apply(v); }},
      {"{F-,F-} = -E-/2", [&](const Mat& v) -> Mat { return acomm(Fm, Fm, v) + 0.5 * Em.apply(v); }},
      {"[E+,F-] = -F+", [&](const Mat& v) -> Mat { return comm(Ep, Fm, v) + Fp.apply(v); }},
      {"[E-,F+] = -F-", [&](const Mat& v) -> Mat { return comm(Em, Fp, v) + Fm.apply(v); }},
      {"H = [E+,E-]/2", [&](const Mat& v) -> Mat { return H.apply(v) - 0.5 * comm(Ep, Em, v); }},
  };
  std::vector<std::pair<std::string, double>> out;
  std::vector<Mat> states;
  for (int p = 0; p < probes; ++p)
    states.push_back(random_state(S, rng, S->N - 2));
  for (const auto& [name, fn] : relations) {
    double worst = 0.0;
    for (const auto& v : states) worst = std::max(worst, max_abs(fn(v)));
    out.emplace_back(name, worst);
  }
  return out;
}

// worst commutator of the tensor sp action against all five generators over
// seeded sp elements, probed on the safe core
inline double commutant_check(const OspGenerators& g, int samples, uint64_t seed) {
  const auto& S = g.space;
  Prng rng(seed);
  const int n = S->n;
  double worst = 0.0;
  for (int t = 0; t < samples; ++t) {
    RMat A(n, n), B(n, n), C(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        A(i, j) = rng.gaussian();
        B(i, j) = rng.gaussian();
        C(i, j) = rng.gaussian();
      }
    B = RMat(0.5 * (B + B.transpose()));
    C = RMat(0.5 * (C + C.transpose()));
    const SpinorOperator L = sp_action_on_E(A, B, C, S);
    const Mat v = random_state(S, rng, S->N - 4);
    for (const KronOpSum* G : {&g.Fp.op, &g.Fm.op, &g.Ep.op, &g.Em.op, &g.H.op})
      worst = std::max(worst, max_abs(commutator_apply(L.op, *G, v)));
  }
  return worst;
}

// ---- per-form-degree dense blocks -----------------------------------------

// F+ restricted to form degree a, as a dense map to degree a+1
inline Mat fp_block(const SpinorPtr& S, int a) {
  const int d = 2 * S->n;
  if (a < 0 || a >= d) throw std::invalid_argument("fp_block: bad form degree");
  const auto& fs = S->forms;
  Mat out = Mat::Zero(S->block_rows(a + 1), S->block_rows(a));
  for (int k = 0; k < d; ++k) {
    const RMat wb = fs.block(fs.wedge_op(k), a + 1, a);
    if (wb.cwiseAbs().maxCoeff() == 0.0) continue;
    out += kron_dense(cd(0.0, 0.5) * wb.cast<cd>(), clifford_matrix(S->fock, k));
  }
  return out;
}

// F- restricted to form degree a, as a dense map to degree a-1
inline Mat fm_block(const SpinorPtr& S, int a) {
  const int d = 2 * S->n;
  if (a <= 0 || a > d) throw std::invalid_argument("fm_block: bad form degree");
  const auto& fs = S->forms;
  SymplecticData sd(S->n);
  Mat out = Mat::Zero(S->block_rows(a - 1), S->block_rows(a));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (sd.omega_upper(i, j) == 0.0) continue;
      const RMat ib = fs.block(fs.iota_op(i), a - 1, a);
      if (ib.cwiseAbs().maxCoeff() == 0.0) continue;
      out += kron_dense(0.5 * sd.omega_upper(i, j) * ib.cast<cd>(),
                        clifford_matrix(S->fock, j));
    }
  return out;
}

namespace detail {

// column indices of the degree-j block with Hermite degree <= dmax, optionally
// filtered to one parity of (j + hermite degree)
inline std::vector<int> block_columns(const SpinorPtr& S, int j, int dmax,
                                      int parity /* -1: both, else 0/1 */) {
  const IVec deg = S->fock->degrees();
  std::vector<int> cols;
  for (int f = 0; f < S->forms.degree_dim(j); ++f)
    for (int s = 0; s < S->fock_dim(); ++s) {
      if (deg(s) > dmax) continue;
      if (parity >= 0 && (j + deg(s)) % 2 != parity) continue;
      cols.push_back(f * S->fock_dim() + s);
    }
  return cols;
}

inline Mat select_columns(const Mat& A, const std::vector<int>& cols) {
  Mat out(A.rows(), (int)cols.size());
  for (int c = 0; c < (int)cols.size(); ++c) out.col(c) = A.col(cols[c]);
  return out;
}

}  // namespace detail

// Orthonormal basis of Ker(F- : E^j -> E^{j-1}) on Hermite degrees <= dmax,
// expressed in the coordinates of the degree-j block.  The kernel splits by
// the parity of (form degree + Hermite degree) because F- flips it.
inline Mat primitive_block(const SpinorPtr& S, int j, int dmax, int parity = -1) {
  const auto cols = detail::block_columns(S, j, dmax, parity);
  const int rows = S->block_rows(j);
  if (cols.empty()) return Mat::Zero(rows, 0);
  Mat K;
  if (j == 0) {
    K = Mat::Identity((int)cols.size(), (int)cols.size());
  } else {
    const Mat A = detail::select_columns(fm_block(S, j), cols);
    K = kernel_basis(A, rank_tolerance);
  }
  Mat out = Mat::Zero(rows, K.cols());
  for (int c = 0; c < (int)cols.size(); ++c) out.row(cols[c]) = K.row(c);
  return out;
}

struct PrimitiveSpace {
  int degree;
  Mat plus;   // parity (j + |alpha|) even
  Mat minus;  // parity (j + |alpha|) odd
};

inline PrimitiveSpace primitive_space(const SpinorPtr& S, int i) {
  if (i < 0 || i > 2 * S->n)
    throw std::invalid_argument("primitive_space: degree out of range");
  return {i, primitive_block(S, i, S->N - 1, 0), primitive_block(S, i, S->N - 1, 1)};
}

// membership in the index set of nonzero summands: j <= i <= 2n - j
inline bool summand_exists(int n, int i, int j) {
  return 0 <= j && j <= i && i <= 2 * n - j;
}

namespace detail {

struct SummandBlock {
  int j;
  int parity;
  Mat span;  // independent columns spanning (F+)^{i-j} Prim_j inside E^i
};

// all summand blocks of the degree-i decomposition, pruned to full column rank
inline std::vector<SummandBlock> summand_blocks(const SpinorPtr& S, int i) {
  std::vector<SummandBlock> out;
  for (int j = 0; j <= std::min(i, 2 * S->n - i); ++j) {
    const int dmax = S->N - 1 - (i - j);
    for (int parity : {0, 1}) {
      Mat R = primitive_block(S, j, dmax, parity);
      for (int step = 0; step < i - j; ++step) R = fp_block(S, j + step) * R;
      if (R.cols() == 0) continue;
      // orthonormal basis of the image; raising can only lose rank, and an
      // absolute cutoff keeps exactly-zero images from faking independence
      Svd svd = svd_thin(R);
      int r = 0;
      while (r < svd.s.size() && svd.s(r) > rank_tolerance) ++r;
      if (r == 0) continue;
      out.push_back({j, parity, Mat(svd.u.leftCols(r))});
    }
  }
  return out;
}

}  // namespace detail

// the oblique projector of the degree-i decomposition onto the (i,j) summand,
// restricted to one parity (0 or 1) or joined over both (-1)
inline Mat project(const SpinorPtr& S, int i, int j, int parity = -1) {
  const int rows = S->block_rows(i);
  if (!summand_exists(S->n, i, j)) return Mat::Zero(rows, rows);
  const auto blocks = detail::summand_blocks(S, i);
  int total = 0;
  for (const auto& b : blocks) total += (int)b.span.cols();
  Mat Bf(rows, total);
  int off = 0;
  for (const auto& b : blocks) {
    Bf.middleCols(off, b.span.cols()) = b.span;
    off += (int)b.span.cols();
  }
  const Mat X = pinv_qr(Bf);
  Mat P = Mat::Zero(rows, rows);
  off = 0;
  for (const auto& b : blocks) {
    if (b.j == j && (parity < 0 || b.parity == parity))
      P += Bf.middleCols(off, b.span.cols()) * X.middleRows(off, b.span.cols());
    off += (int)b.span.cols();
  }
  return P;
}

// number of nonzero parity-refined summands of the degree-i block
inline int summand_count(const SpinorPtr& S, int i) {
  return (int)detail::summand_blocks(S, i).size();
}

// Multiplicity of the primitive module at degree i: the count of form degrees
// j for which raising (F+)^{j-i} stays injective on the primitive space,
// decided by exact-threshold rank.
inline int multiplicity_count(const SpinorPtr& S, int i) {
  int count = 0;
  for (int j = i; j <= 2 * S->n; ++j) {
    const int dmax = S->N - 1 - (j - i);
    Mat R = primitive_block(S, i, dmax);
    if (R.cols() == 0) break;
    for (int step = 0; step < j - i; ++step) R = fp_block(S, i + step) * R;
    const RVec s = singular_values(R);
    int r = 0;
    while (r < s.size() && s(r) > rank_tolerance) ++r;
    if (r == R.cols()) ++count;
  }
  return count;
}

// printed closed form for the dual-pair structure coefficients
inline double printed_dual_coefficient(int n, int i, int j) {
  const double even = (((i - j) % 2 + 2) % 2 == 0) ? 2.0 / 16.0 : 0.0;
  const double odd = (((i - j) % 2 + 2) % 2 == 1) ? 2.0 / 16.0 : 0.0;
  return even * (j - i) + odd * (i + j - 2 * n - 1);
}

struct DualChainRow {
  int step;
  cd measured;       // ratio r with F- b_step = r * b_{step-1}
  double printed;    // closed-form coefficient listed for this step
  double deviation;  // |measured - printed|
  double residual;   // how far F- b_step is from a multiple of b_{step-1}
};

struct DualPartnerData {
  int i = 0;
  int dimension = 0;  // 2n - 2i + 1
  std::vector<DualChainRow> rows;
  double recurrence_residual = 0.0;  // r_k + r_{k-1} - (i + k - 1 - n)/4
};

// Walk the raising chain out of the degree-i primitive space and measure the
// lowering ratios.  The measured ratios obey the anticommutator recurrence
// exactly; the printed coefficients are reported beside them with their
// deviations, without being asserted.
inline DualPartnerData dual_coefficients(const SpinorPtr& S, int i) {
  const int n = S->n;
  DualPartnerData out;
  out.i = i;
  out.dimension = 2 * n - 2 * i + 1;
  const int depth = 2 * (n - i);
  const int dmax = S->N - 1 - std::max(depth, 0);
  const Mat P = primitive_block(S, i, dmax);
  if (P.cols() == 0) return out;
  Vec v = P.col(0);
  cd prev_ratio = 0.0;
  for (int k = 1; k <= depth + 1 && i + k <= 2 * n; ++k) {
    const Vec raised = fp_block(S, i + k - 1) * v;
    if (max_abs(raised) < 1e-13) break;  // chain has topped out
    const Vec lowered = fm_block(S, i + k) * raised;
    const cd denom = (v.adjoint() * v)(0, 0);
    const cd r = (v.adjoint() * lowered)(0, 0) / denom;
    DualChainRow row;
    row.step = k;
    row.measured = r;
    row.printed = printed_dual_coefficient(n, i + 1, k - 1);
    row.deviation = std::abs(r - row.printed);
    row.residual = max_abs(Vec(lowered - r * v));
    out.rows.push_back(row);
    out.recurrence_residual =
        std::max(out.recurrence_residual,
                 std::abs(r + prev_ratio - cd(0.25 * (i + k - 1 - n), 0.0)));
    prev_ratio = r;
    v = raised;
  }
  return out;
}

}  // namespace symspin
