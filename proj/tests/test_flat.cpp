#include <catch2/catch_amalgamated.hpp>

#include "symspin/flat_model.hpp"
#include "symspin/kron.hpp"

using namespace symspin;

TEST_CASE("degree-block coordinates round-trip and wedge application is exact") {
  auto S = SpinorSpace::make(2, 5);
  Prng rng(11);
  const int nf = S->fock_dim();

  for (int deg = 0; deg <= 2 * S->n; ++deg) {
    Mat st = Mat::Zero(S->form_dim(), nf);
    const int off = S->forms.degree_offset(deg);
    for (int f = 0; f < S->forms.degree_dim(deg); ++f)
      for (int s = 0; s < nf; ++s) st(off + f, s) = rng.cgaussian();
    const Vec v = block_coordinates(S, st, deg);
    CHECK(max_abs(Mat(state_from_block(S, v, deg) - st)) == 0.0);
  }

  // wedge application against the dense kronecker product
  for (int deg = 0; deg < 2 * S->n; ++deg) {
    Vec c(2 * S->n);
    for (int a = 0; a < c.size(); ++a) c(a) = rng.cgaussian();
    Vec v(S->block_rows(deg));
    for (int i = 0; i < v.size(); ++i) v(i) = rng.cgaussian();
    Mat W = Mat::Zero(S->block_rows(deg + 1), S->block_rows(deg));
    for (int a = 0; a < c.size(); ++a)
      W += kron_dense(Mat(c(a) * S->forms.block(S->forms.wedge_op(a), deg + 1, deg).cast<cd>()),
                      Mat::Identity(nf, nf));
    CHECK(max_abs(Vec(wedge_block_apply(S, deg, c, v) - W * v)) < 1e-13);
  }

  CHECK_THROWS_AS(block_coordinates(S, Mat::Zero(3, 3), 0), std::invalid_argument);
  CHECK_THROWS_AS(state_from_block(S, Vec::Zero(2), 1), std::invalid_argument);
  CHECK_THROWS_AS(wedge_block_apply(S, 0, Vec::Zero(3), Vec::Zero(S->block_rows(0))),
                  std::invalid_argument);
}

TEST_CASE("factored block decompositions match the dense summand projectors") {
  auto S = SpinorSpace::make(2, 6);
  Prng rng(23);

  for (int i : {1, 2}) {
    const BlockProjectors P = block_projectors(S, i);
    std::vector<Mat> mats;
    for (int j = 0; j <= i; ++j) {
      CHECK(P.has(j) == summand_exists(S->n, i, j));
      const Mat Pj = P.matrix(j);
      mats.push_back(Pj);
      INFO("i=" << i << " j=" << j);
      CHECK(max_abs(Mat(Pj - project(S, i, j))) < 1e-8);
      CHECK(max_abs(Mat(Pj * Pj - Pj)) < 1e-8);

      Vec v(S->block_rows(i));
      for (int t = 0; t < v.size(); ++t) v(t) = rng.cgaussian();
      CHECK(max_abs(Vec(P.apply(j, v) - Pj * v)) < 1e-10);
    }
    for (size_t a = 0; a < mats.size(); ++a)
      for (size_t b = 0; b < mats.size(); ++b)
        if (a != b) CHECK(max_abs(Mat(mats[a] * mats[b])) < 1e-8);
  }

  // a degree-1 block has no degree-3 component, and the projector agrees
  const BlockProjectors P1 = block_projectors(S, 1);
  CHECK_FALSE(P1.has(3));
  Vec v(S->block_rows(1));
  for (int t = 0; t < v.size(); ++t) v(t) = rng.cgaussian();
  CHECK(max_abs(Vec(P1.apply(3, v))) == 0.0);

  CHECK_THROWS_AS(block_projectors(S, -1), std::invalid_argument);
  CHECK_THROWS_AS(block_projectors(S, 2 * S->n + 1), std::invalid_argument);
}

TEST_CASE("the covariant derivative squares to zero on both models") {
  auto S = SpinorSpace::make(2, 5);
  const PolyModel model = poly_model(S, 3);
  const auto& mi = *model.monomials;
  const int NM = mi.size(), fd = S->form_dim();

  // The fock factor is inert, so the operator matrix on (monomial, form row)
  // coordinates carries the whole structure.  Its entries are small integers
  // and every entry of the square cancels in two exactly opposite terms, so
  // the assembled composite is zero in floating point, not merely tiny.
  Mat D = Mat::Zero(NM * fd, NM * fd);
  for (int m = 0; m < NM; ++m)
    for (int r = 0; r < fd; ++r) {
      PolySpinorForm f = zero_form(model);
      f.coeff[m](r, 0) = 1.0;
      const PolySpinorForm g = poly_derivative(model, f);
      for (int mm = 0; mm < NM; ++mm)
        for (int rr = 0; rr < fd; ++rr) D(mm * fd + rr, m * fd + r) = g.coeff[mm](rr, 0);
    }
  CHECK(max_abs(Mat(D * D)) == 0.0);

  // field-level double application only cancels up to roundoff
  Prng rng(31);
  PolySpinorForm f = random_form(model, rng, S->N);
  const PolySpinorForm df = poly_derivative(model, f);
  CHECK(max_abs(poly_derivative(model, df)) / max_abs(df) < 1e-12);

  // a constant field differentiates to zero without any arithmetic
  PolySpinorForm cst = zero_form(model);
  for (int r = 0; r < fd; ++r)
    for (int s = 0; s < S->fock_dim(); ++s) cst.coeff[0](r, s) = rng.cgaussian();
  CHECK(max_abs(poly_derivative(model, cst)) == 0.0);

  // torus picture: same two-term cancellation on the per-mode form factor
  const std::vector<int> k = {1, -2, 0, 3};
  Mat M = Mat::Zero(fd, fd);
  for (int r = 0; r < fd; ++r) {
    Mat e = Mat::Zero(fd, S->fock_dim());
    e(r, 0) = 1.0;
    M.col(r) = mode_derivative(S, k, e).col(0);
  }
  CHECK(max_abs(Mat(M * M)) == 0.0);

  Mat st = random_state(S, rng, S->N);
  const Mat dst = mode_derivative(S, k, st);
  CHECK(max_abs(mode_derivative(S, k, dst)) / max_abs(dst) < 1e-12);
  CHECK(max_abs(mode_derivative(S, {0, 0, 0, 0}, st)) == 0.0);
  CHECK_THROWS_AS(mode_derivative(S, {1, 2}, st), std::invalid_argument);
}

TEST_CASE("derivative blocks two or more summand steps away vanish") {
  auto S = SpinorSpace::make(2, 8);
  ProjectorCache cache(S);
  Prng rng(41);
  const std::vector<int> k = {1, 0, -2, 3};
  const Mat st = random_state(S, rng, 2);
  const double den = max_abs(st);

  for (auto [i, j, tgt] : {std::array{1, 0, 2}, std::array{2, 2, 0}}) {
    const FieldOperator op = block_operator(cache, i, j, tgt);
    INFO("window " << i << " summand " << j << " -> " << tgt);
    CHECK(masked_max(S, op.mode(k, st), 2) / den < 1e-9);
  }

  // a summand absent from the decomposition contributes nothing at all
  const FieldOperator none = block_operator(cache, 1, 3, 0);
  CHECK(max_abs(none.mode(k, st)) == 0.0);

  CHECK_THROWS_AS(block_operator(cache, 2 * S->n, 0, 0), std::invalid_argument);
}

TEST_CASE("both twistor complexes close on the polynomial model") {
  auto S = SpinorSpace::make(2, 8);
  const PolyModel model = poly_model(S, 3);
  const TwistorComplexReport rep = twistor_complex_residuals(model, 2, 2, 53);

  CHECK(rep.model == "polynomial");
  REQUIRE((int)rep.composite.size() == 2 * S->n - 1);
  CHECK(rep.gap_index == S->n - 1);
  INFO("worst=" << rep.worst() << " gap=" << rep.gap);
  CHECK(rep.worst() < 1e-9);
  // the two complexes do not splice into one: the turn is order one
  CHECK(rep.gap > 0.1);

  ProjectorCache cache(S);
  const FieldOperator T0 = twistor(cache, 0);
  CHECK(max_abs(T0.poly(model, zero_form(model))) == 0.0);

  auto S1 = SpinorSpace::make(1, 8);
  CHECK_THROWS_AS(twistor_complex_residuals(poly_model(S1, 2), 1, 2, 1),
                  std::invalid_argument);
  auto Ssmall = SpinorSpace::make(2, 5);
  CHECK_THROWS_AS(twistor_complex_residuals(poly_model(Ssmall, 2), 1, 2, 1),
                  std::invalid_argument);
}

TEST_CASE("both twistor complexes close mode by mode") {
  auto S = SpinorSpace::make(2, 8);
  Prng rng(67);
  const auto modes = random_modes(S->n, 2, rng);
  const TwistorComplexReport rep = twistor_complex_residuals(S, modes, 1, 2, 71);

  CHECK(rep.model == "fourier");
  INFO("worst=" << rep.worst() << " gap=" << rep.gap);
  CHECK(rep.worst() < 1e-9);
  CHECK(rep.gap > 0.1);

  CHECK_THROWS_AS(twistor_complex_residuals(S, {}, 1, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(twistor_complex_residuals(S, {{1, 2}}, 1, 2, 1), std::invalid_argument);
}

TEST_CASE("dirac operators: assembly, twisted companion, and degenerate inputs") {
  auto S = SpinorSpace::make(2, 6);
  ProjectorCache cache(S);
  Prng rng(83);
  const int nf = S->fock_dim();

  const FieldOperator Dir = dirac(cache);
  auto P0 = cache.at(0);
  auto P1 = cache.at(1);
  const Mat fm1 = fm_block(S, 1);

  // per-mode output against the explicit chain of fiber maps
  const std::vector<int> k = {2, -1, 0, 1};
  Vec c(2 * S->n);
  for (int a = 0; a < c.size(); ++a) c(a) = cd(0.0, 2.0 * M_PI * k[a]);
  Vec v0(S->block_rows(0));
  for (int t = 0; t < v0.size(); ++t) v0(t) = rng.cgaussian();
  const Mat st = state_from_block(S, v0, 0);
  const Mat got = Dir.mode(k, st);
  const Mat want = state_from_block(
      S, Vec(fm1 * (P1->matrix(0) * wedge_block_apply(S, 0, c, Vec(P0->matrix(0) * v0)))), 0);
  CHECK(max_abs(Mat(got - want)) < 1e-10);

  // the output never leaves form degree zero
  double off_block = 0.0;
  for (int r = S->forms.degree_dim(0); r < S->form_dim(); ++r)
    for (int s = 0; s < nf; ++s) off_block = std::max(off_block, std::abs(got(r, s)));
  CHECK(off_block == 0.0);

  // lowering annihilates the primitive summand of the degree-1 block
  CHECK(max_abs(Mat(fm1 * P1->matrix(1))) < 1e-9);

  // on spinor fields the projected operator is half the twisted contraction
  const FieldOperator Twisted = second_dirac(S);
  for (const auto& km : {std::vector<int>{1, 0, 0, 0}, std::vector<int>{-1, 2, 1, -3}}) {
    Mat f = Mat::Zero(S->form_dim(), nf);
    const IVec deg = S->fock->degrees();
    for (int s = 0; s < nf; ++s)
      if (deg(s) <= 2) f(0, s) = rng.cgaussian();
    const Mat lhs = 2.0 * Dir.mode(km, f);
    const Mat rhs = Twisted.mode(km, f);
    INFO("mode " << km[0] << "," << km[1] << "," << km[2] << "," << km[3]);
    CHECK(max_abs(Mat(lhs - rhs)) / max_abs(rhs) < 1e-9);
  }

  const FieldOperator Rar = rarita_schwinger(cache);
  const std::vector<int> zero = {0, 0, 0, 0};
  CHECK(max_abs(Rar.mode(zero, random_state(S, rng, 2))) == 0.0);
  CHECK(max_abs(p_operator(S).mode(zero, random_state(S, rng, 2))) == 0.0);

  const FieldOperator unset{};
  CHECK_THROWS_AS(unset.mode(k, st), std::logic_error);
  CHECK_THROWS_AS(unset.poly(poly_model(S, 1), zero_form(poly_model(S, 1))),
                  std::logic_error);
  CHECK_THROWS_AS(frame_dirac(S, RMat::Identity(2, 2)), std::invalid_argument);
}

TEST_CASE("the dirac commutator reproduces the flat laplacian per mode") {
  {
    const WeitzenboeckReport rep = weitzenboeck_check(1, FockSpace::make(1, 8), {{1, 0}});
    INFO("n=1 worst=" << rep.worst);
    CHECK(rep.worst < 1e-9);
  }
  {
    Prng rng(97);
    const WeitzenboeckReport rep =
        weitzenboeck_check(2, FockSpace::make(2, 8), random_modes(2, 3, rng));
    REQUIRE((int)rep.laplacian_residual.size() == 3);
    for (int m = 0; m < 3; ++m) {
      INFO("mode " << m);
      CHECK(rep.laplacian_residual[m] < 1e-9);
      CHECK(rep.self_adjointness[m] < 1e-9);
    }
    CHECK(rep.worst < 1e-9);
  }
  // the zero mode commutes with itself without arithmetic
  const WeitzenboeckReport z = weitzenboeck_check(2, FockSpace::make(2, 6), {{0, 0, 0, 0}});
  CHECK(z.worst == 0.0);

  CHECK_THROWS_AS(weitzenboeck_check(2, FockSpace::make(2, 6), {{1, 0}}),
                  std::invalid_argument);
}

TEST_CASE("the first-order pencil admits only the zero value on flat fields") {
  auto S = SpinorSpace::make(2, 6);
  const KillingReport rep = killing_solve(poly_model(S, 2));

  REQUIRE(!rep.eigenvalues.empty());
  for (const cd& mu : rep.eigenvalues) CHECK(std::abs(mu) < 1e-8);
  CHECK(rep.pencil_bound < 1e-8);

  // the solution space is the constants, counted three independent ways
  CHECK(rep.kernel_dim == S->fock_dim());
  CHECK(rep.kernel_dim == rep.constant_dim);
  CHECK(rep.intersection_dim == rep.safe_constant_dim);
  CHECK(rep.derivative_kernel_dim == rep.safe_constant_dim);
  CHECK(rep.safe_constant_dim == 15);
  CHECK(rep.constant_residual == 0.0);
  CHECK(rep.inclusion_residual < 1e-9);
  CHECK(rep.descriptions_match);

  CHECK_THROWS_AS(killing_solve(poly_model(S, 0)), std::invalid_argument);
}

TEST_CASE("eigenvalues transfer through the first twistor operator") {
  auto S = SpinorSpace::make(2, 8);
  {
    const SpectrumTransferReport rep = spectrum_transfer_check(poly_model(S, 3), 3, 109);
    CHECK(rep.model == "polynomial");
    CHECK(rep.coefficient == 0.5);
    INFO("operator=" << rep.operator_residual << " worst pair=" << rep.worst_pair);
    CHECK(rep.operator_residual < 1e-6);
    CHECK(rep.pairs_total >= 500);
    CHECK(rep.pairs_kept >= 500);
    CHECK(rep.worst_pair < 1e-6);
  }
  {
    Prng rng(113);
    const SpectrumTransferReport rep = spectrum_transfer_check(S, random_modes(2, 3, rng));
    CHECK(rep.model == "fourier");
    INFO("operator=" << rep.operator_residual << " worst pair=" << rep.worst_pair);
    CHECK(rep.operator_residual < 1e-6);
    CHECK(rep.pairs_kept >= 60);
    CHECK(rep.worst_pair < 1e-6);
    CHECK((int)rep.pairs.size() == rep.pairs_kept);
  }

  auto S1 = SpinorSpace::make(1, 6);
  CHECK_THROWS_AS(spectrum_transfer_check(poly_model(S1, 2), 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(spectrum_transfer_check(S, {}), std::invalid_argument);
}

TEST_CASE("symbol rank tables are covector-independent and match the census") {
  auto S = SpinorSpace::make(2, 10);
  RVec xi(4);
  xi << 0.3, -1.2, 0.7, 0.5;
  const SymbolReport rep = symbol_complex(S, xi);

  // domain / rank / kernel / defect per operator of the walk
  const int want[4][4] = {{6, 6, 0, 0}, {19, 15, 4, -2}, {19, 15, 4, -11}, {19, 6, 13, -2}};
  REQUIRE((int)rep.rows.size() == 4);
  for (int i = 0; i < 4; ++i) {
    INFO("operator " << i);
    CHECK(rep.rows[i].index == i);
    CHECK(rep.rows[i].domain == want[i][0]);
    CHECK(rep.rows[i].rank == want[i][1]);
    CHECK(rep.rows[i].kernel == want[i][2]);
    CHECK(rep.rows[i].defect == want[i][3]);
  }

  const EllipticityReport ell = ellipticity_check(S, 3, 127);
  CHECK(ell.stable);
  REQUIRE((int)ell.rows.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(ell.rows[i].rank == want[i][1]);
    CHECK(ell.rows[i].kernel == want[i][2]);
  }

  CHECK_THROWS_AS(symbol_complex(S, RVec::Zero(4)), std::invalid_argument);
  CHECK_THROWS_AS(symbol_complex(S, RVec::Ones(3)), std::invalid_argument);
  CHECK_THROWS_AS(ellipticity_check(S, 0, 1), std::invalid_argument);
}
