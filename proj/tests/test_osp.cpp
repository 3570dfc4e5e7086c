#include <catch2/catch_amalgamated.hpp>

#include "symspin/osp.hpp"

using namespace symspin;

TEST_CASE("defining relations and construction identities hold on probes") {
  for (auto [n, N] : {std::pair{1, 8}, std::pair{2, 10}}) {
    auto gen = build_osp(n, FockSpace::make(n, N));
    for (const auto& [name, residual] : osp_relation_residuals(gen, 4, 101)) {
      INFO("n=" << n << " " << name);
      CHECK(residual < 1e-10);
    }
  }
}

TEST_CASE("raising out of the top form degree gives zero") {
  const int n = 2, N = 6;
  auto gen = build_osp(n, FockSpace::make(n, N));
  const auto& S = gen.space;
  Prng rng(7);
  // state supported on the top form degree only
  Mat V = Mat::Zero(S->form_dim(), S->fock_dim());
  const int off = S->forms.degree_offset(2 * n);
  for (int f = 0; f < S->forms.degree_dim(2 * n); ++f)
    for (int s = 0; s < S->fock_dim(); ++s) V(off + f, s) = rng.cgaussian();
  CHECK(max_abs(gen.Fp.apply(V)) == 0.0);
}

TEST_CASE("generator matrices match their kronecker materializations") {
  const int n = 1, N = 4;
  auto S = FockSpace::make(n, N);
  auto gen = build_osp(n, S);
  // squaring F+/- routes through hermite degree N+1, which the truncation
  // clips, so the square-vs-E identity only holds on columns of degree < N
  auto safe_max = [&](const Mat& D) {
    double worst = 0.0;
    for (int c = 0; c < D.cols(); ++c) {
      if (S->degrees()(c % S->dim()) > N - 1) continue;
      worst = std::max(worst, D.col(c).cwiseAbs().maxCoeff());
    }
    return worst;
  };
  Mat Fp = gen.Fp.op.materialize();
  Mat Ep = gen.Ep.op.materialize();
  CHECK(safe_max(Ep - 4.0 * Fp * Fp) < 1e-13);
  Mat Fm = gen.Fm.op.materialize();
  Mat Em = gen.Em.op.materialize();
  CHECK(safe_max(Em + 4.0 * Fm * Fm) < 1e-13);
}

TEST_CASE("blockwise ladder operators agree with the full kronecker sums") {
  const int n = 2, N = 6;
  auto gen = build_osp(n, FockSpace::make(n, N));
  const auto& S = gen.space;
  Prng rng(13);
  for (int a = 0; a <= 2 * n; ++a) {
    // a random state concentrated on form degree a
    Mat V = Mat::Zero(S->form_dim(), S->fock_dim());
    const int off = S->forms.degree_offset(a), fd = S->forms.degree_dim(a);
    Vec blockv(S->block_rows(a));
    for (int f = 0; f < fd; ++f)
      for (int s = 0; s < S->fock_dim(); ++s) {
        const cd z = rng.cgaussian();
        V(off + f, s) = z;
        blockv(f * S->fock_dim() + s) = z;
      }
    if (a < 2 * n) {
      Mat up = gen.Fp.apply(V);
      Vec upb = fp_block(S, a) * blockv;
      double worst = 0.0;
      for (int f = 0; f < S->forms.degree_dim(a + 1); ++f)
        for (int s = 0; s < S->fock_dim(); ++s)
          worst = std::max(worst,
                           std::abs(up(S->forms.degree_offset(a + 1) + f, s) -
                                    upb(f * S->fock_dim() + s)));
      CHECK(worst < 1e-12);
    }
    if (a > 0) {
      Mat down = gen.Fm.apply(V);
      Vec downb = fm_block(S, a) * blockv;
      double worst = 0.0;
      for (int f = 0; f < S->forms.degree_dim(a - 1); ++f)
        for (int s = 0; s < S->fock_dim(); ++s)
          worst = std::max(worst,
                           std::abs(down(S->forms.degree_offset(a - 1) + f, s) -
                                    downb(f * S->fock_dim() + s)));
      CHECK(worst < 1e-12);
    }
  }
}

TEST_CASE("tensor sp action commutes with all five generators") {
  auto gen = build_osp(2, FockSpace::make(2, 9));
  CHECK(commutant_check(gen, 5, 211) < 1e-12);

  // the zero element commutes trivially and the diagonal one matches H
  const auto& S = gen.space;
  auto L0 = sp_action_on_E(RMat::Zero(2, 2), RMat::Zero(2, 2), RMat::Zero(2, 2), S);
  Prng rng(3);
  Mat v = random_state(S, rng, S->N - 4);
  CHECK(max_abs(commutator_apply(L0.op, gen.H.op, v)) == 0.0);
  auto Ld = sp_action_on_E(RMat::Identity(2, 2), RMat::Zero(2, 2), RMat::Zero(2, 2), S);
  CHECK(max_abs(commutator_apply(Ld.op, gen.H.op, v)) < 1e-12);
}

TEST_CASE("primitive spaces are killed by lowering and split by parity") {
  const int n = 2, N = 7;
  auto S = SpinorSpace::make(n, N);
  for (int j = 0; j <= n; ++j) {
    auto prim = primitive_space(S, j);
    for (const Mat* part : {&prim.plus, &prim.minus}) {
      if (part->cols() == 0) continue;
      // orthonormal columns
      Mat gram = part->adjoint() * (*part);
      CHECK((gram - Mat::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() <
            1e-12);
      if (j > 0) CHECK(max_abs(Mat(fm_block(S, j) * (*part))) < 1e-10);
    }
    CHECK(prim.plus.cols() + prim.minus.cols() > 0);
  }
}

TEST_CASE("summand counts follow the 2(i+1) and 2(2n-i+1) pattern") {
  const int n = 2, N = 7;
  auto S = SpinorSpace::make(n, N);
  const int expected[] = {2, 4, 6, 4, 2};  // i = 0..4
  for (int i = 0; i <= 2 * n; ++i) {
    const int want = (i <= n) ? 2 * (i + 1) : 2 * (2 * n - i + 1);
    REQUIRE(want == expected[i]);
    CHECK(summand_count(S, i) == want);
  }
}

TEST_CASE("projectors are idempotent, orthogonal, complete, equivariant") {
  const int n = 2, N = 7, i = 2;
  auto S = SpinorSpace::make(n, N);
  std::vector<Mat> projs;
  for (int j = 0; j <= i; ++j)
    for (int parity : {0, 1}) projs.push_back(project(S, i, j, parity));

  // idempotence and mutual orthogonality as matrices
  for (size_t a = 0; a < projs.size(); ++a) {
    CHECK((projs[a] * projs[a] - projs[a]).cwiseAbs().maxCoeff() < 1e-9);
    for (size_t b = 0; b < projs.size(); ++b)
      if (a != b) CHECK((projs[a] * projs[b]).cwiseAbs().maxCoeff() < 1e-9);
  }

  // completeness on the safe core of the degree block
  Mat sum = Mat::Zero(S->block_rows(i), S->block_rows(i));
  for (const auto& P : projs) sum += P;
  const IVec deg = S->fock->degrees();
  double worst = 0.0;
  for (int f = 0; f < S->forms.degree_dim(i); ++f)
    for (int s = 0; s < S->fock_dim(); ++s) {
      if (deg(s) > N - 3 - i) continue;
      Vec e = Vec::Zero(S->block_rows(i));
      e(f * S->fock_dim() + s) = 1.0;
      worst = std::max(worst, max_abs(Vec(sum * e - e)));
    }
  CHECK(worst < 1e-9);

  // parity operator on the block commutes with each projector
  Mat par = Mat::Zero(S->block_rows(i), S->block_rows(i));
  for (int f = 0; f < S->forms.degree_dim(i); ++f)
    for (int s = 0; s < S->fock_dim(); ++s) {
      const int idx = f * S->fock_dim() + s;
      par(idx, idx) = ((i + deg(s)) % 2 == 0) ? 1.0 : -1.0;
    }
  for (const auto& P : projs)
    CHECK((par * P - P * par).cwiseAbs().maxCoeff() < 1e-9);

  // equivariance against the degree-i restriction of the tensor sp action
  Prng rng(17);
  RMat A(n, n), B(n, n), C(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      A(r, c) = rng.gaussian();
      B(r, c) = rng.gaussian();
      C(r, c) = rng.gaussian();
    }
  B = RMat(0.5 * (B + B.transpose()));
  C = RMat(0.5 * (C + C.transpose()));
  const RMat Xs = to_symp(sp_canonical(A, B, C), n);
  Mat Lblock =
      kron_dense(Mat(S->forms.block(sp_form_matrix(Xs, S->forms), i, i).cast<cd>()),
                 Mat::Identity(S->fock_dim(), S->fock_dim())) +
      kron_dense(Mat::Identity(S->forms.degree_dim(i), S->forms.degree_dim(i)),
                 lie_action(A, B, C, S->fock).m);
  for (const auto& P : projs) {
    Mat commuted = Lblock * P - P * Lblock;
    double w = 0.0;
    for (int f = 0; f < S->forms.degree_dim(i); ++f)
      for (int s = 0; s < S->fock_dim(); ++s) {
        if (deg(s) > N - 3 - i) continue;
        w = std::max(w, commuted.col(f * S->fock_dim() + s).cwiseAbs().maxCoeff());
      }
    CHECK(w < 1e-8);
  }

  // outside the index set the projector is identically zero
  CHECK(max_abs(project(S, 4, 1)) == 0.0);
  CHECK(max_abs(project(S, 1, 3)) == 0.0);
}

TEST_CASE("multiplicities equal 2n - 2i + 1") {
  auto S2 = SpinorSpace::make(2, 7);
  CHECK(multiplicity_count(S2, 0) == 5);
  CHECK(multiplicity_count(S2, 1) == 3);
  CHECK(multiplicity_count(S2, 2) == 1);
  auto S1 = SpinorSpace::make(1, 7);
  CHECK(multiplicity_count(S1, 0) == 3);
  CHECK(multiplicity_count(S1, 1) == 1);
}

TEST_CASE("dual chain data: arithmetic checks and measured recurrence") {
  // closed-form values evaluate as printed
  for (int n : {1, 2, 3})
    for (int i = 0; i <= n; ++i) CHECK(printed_dual_coefficient(n, i, i) == 0.0);
  CHECK(printed_dual_coefficient(2, 2, 1) == -0.25);

  auto S = SpinorSpace::make(2, 6);
  for (int i : {0, 1}) {
    auto data = dual_coefficients(S, i);
    CHECK(data.dimension == 2 * 2 - 2 * i + 1);
    REQUIRE((int)data.rows.size() == 2 * (2 - i));
    for (const auto& row : data.rows) CHECK(row.residual < 1e-10);
    CHECK(data.recurrence_residual < 1e-10);
  }
  // at the top of the ladder the chain is empty: raising kills the primitive
  auto top = dual_coefficients(S, 2);
  CHECK(top.dimension == 1);
  CHECK(top.rows.empty());
}
