#include <catch2/catch_amalgamated.hpp>

#include "symspin/multiindex.hpp"
#include "symspin/rng.hpp"
#include "symspin/weyl.hpp"

using namespace symspin;

namespace {

WeylElement random_element(Prng& rng, int n, int nterms = 3, int maxexp = 2) {
  WeylElement w(n);
  for (int t = 0; t < nterms; ++t) {
    WeylMono m{std::vector<int>(n), std::vector<int>(n)};
    for (int i = 0; i < n; ++i) {
      m.a[i] = rng.int_range(0, maxexp);
      m.b[i] = rng.int_range(0, maxexp);
    }
    w.add_term(m, GaussRat(cpp_rational(rng.int_range(-3, 3)),
                           cpp_rational(rng.int_range(-3, 3))));
  }
  return w;
}

QPolynomial random_poly(Prng& rng, int n) {
  QPolynomial p(n);
  for (int t = 0; t < 3; ++t) {
    std::vector<int> e(n);
    for (int i = 0; i < n; ++i) e[i] = rng.int_range(0, 3);
    p.add_term(e, GaussRat(cpp_rational(rng.int_range(-3, 3)),
                           cpp_rational(rng.int_range(-3, 3))));
  }
  return p;
}

// symplectic pairing on generator indices, 1-based anti-diagonal convention
GaussRat omega(int n, int i, int j) {
  if (i + j != 2 * n + 1) return GaussRat(0);
  return i <= n ? GaussRat(1) : GaussRat(-1);
}

}  // namespace

TEST_CASE("reordering rule: b1 a1 = a1 b1 + 1") {
  const int n = 2;
  auto prod = normal_product(WeylElement::gen_b(n, 1), WeylElement::gen_a(n, 1));
  WeylElement expect = WeylElement::unit(n);
  expect.add_term({{1, 0}, {1, 0}}, GaussRat(1));
  CHECK(prod == expect);

  // same-index generators in the written order need no reordering
  auto already = normal_product(WeylElement::gen_a(n, 1), WeylElement::gen_b(n, 1));
  WeylElement ab(n);
  ab.add_term({{1, 0}, {1, 0}}, GaussRat(1));
  CHECK(already == ab);
}

TEST_CASE("unit is neutral and zero coefficients are pruned") {
  Prng rng(5);
  const int n = 3;
  auto w = random_element(rng, n);
  CHECK(normal_product(WeylElement::unit(n), w) == w);
  CHECK(normal_product(w, WeylElement::unit(n)) == w);
  CHECK((w - w).is_zero());

  WeylElement z(n);
  z.add_term({{1, 0, 0}, {0, 0, 0}}, GaussRat(2));
  z.add_term({{1, 0, 0}, {0, 0, 0}}, GaussRat(-2));
  CHECK(z.is_zero());
  CHECK(z.terms().empty());  // stored form stays pruned, not just equal to zero
}

TEST_CASE("normal product is associative on seeded triples") {
  Prng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 3;
    auto u = random_element(rng, n), v = random_element(rng, n),
         w = random_element(rng, n);
    CHECK(normal_product(normal_product(u, v), w) ==
          normal_product(u, normal_product(v, w)));
  }
}

TEST_CASE("commutator is a Lie bracket") {
  Prng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 2;
    auto u = random_element(rng, n, 2), v = random_element(rng, n, 2),
         w = random_element(rng, n, 2);
    CHECK((commutator(u, v) + commutator(v, u)).is_zero());
    auto jac = commutator(commutator(u, v), w) + commutator(commutator(v, w), u) +
               commutator(commutator(w, u), v);
    CHECK(jac.is_zero());
  }
}

TEST_CASE("polynomial action realizes a_i as q^i and b_i as d/dq^i") {
  const int n = 2;
  auto q1 = QPolynomial::monomial(n, {1, 0});
  auto acted = polynomial_action(WeylElement::gen_b(n, 1), q1);
  CHECK(acted == QPolynomial::monomial(n, {0, 0}));

  Prng rng(31);
  auto p = random_poly(rng, n);
  CHECK(polynomial_action(WeylElement::unit(n), p) == p);

  // representation property: product acts as composition
  for (int trial = 0; trial < 50; ++trial) {
    auto u = random_element(rng, n, 2), v = random_element(rng, n, 2);
    auto f = random_poly(rng, n);
    CHECK(polynomial_action(normal_product(u, v), f) ==
          polynomial_action(u, polynomial_action(v, f)));
  }
}

TEST_CASE("clifford words map onto the symplectic commutator relations") {
  for (int n : {1, 2, 3}) {
    CHECK(scliff_to_weyl(CliffordWord::unit(n)) == WeylElement::unit(n));
    for (int i = 1; i <= 2 * n; ++i)
      for (int j = 1; j <= 2 * n; ++j) {
        auto ei = CliffordWord::generator(n, i);
        auto ej = CliffordWord::generator(n, j);
        auto image = scliff_to_weyl(ei * ej - ej * ei);
        auto expect = (-GaussRat::imaginary_unit() * omega(n, i, j)) *
                      WeylElement::unit(n);
        CHECK(image == expect);
      }
  }
}

TEST_CASE("images of short words span the full filtered dimension") {
  for (int n : {1, 2, 3}) {
    // collect all words of length <= 3 and express their images in the
    // normal-form monomial basis
    std::vector<WeylElement> images;
    std::vector<std::vector<int>> words = {{}};
    for (int len = 1; len <= 3; ++len) {
      std::vector<std::vector<int>> next;
      for (const auto& w : words)
        if ((int)w.size() == len - 1)
          for (int g = 1; g <= 2 * n; ++g) {
            auto w2 = w;
            w2.push_back(g);
            next.push_back(w2);
          }
      words.insert(words.end(), next.begin(), next.end());
    }
    std::map<WeylMono, int> columns;
    for (const auto& w : words) {
      CliffordWord cw(n);
      cw.add_word(w, GaussRat(1));
      images.push_back(scliff_to_weyl(cw));
      for (const auto& [mono, coef] : images.back().terms())
        columns.emplace(mono, 0);
    }
    int next_col = 0;
    for (auto& [mono, idx] : columns) idx = next_col++;
    std::vector<std::vector<GaussRat>> rows(
        images.size(), std::vector<GaussRat>(columns.size()));
    for (size_t r = 0; r < images.size(); ++r)
      for (const auto& [mono, coef] : images[r].terms())
        rows[r][columns.at(mono)] = coef;
    // the filtered algebra in degree <= 3 has the polynomial dimension
    const int expect = (int)truncation_dim(2 * n, 3);
    CHECK(rational_rank(std::move(rows)) == expect);
  }
}

TEST_CASE("heisenberg embedding reproduces the central bracket") {
  const int n = 3;
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) {
      auto dq = heisenberg_embed(n, HeisenbergSymbol::d_q, i);
      auto dp = heisenberg_embed(n, HeisenbergSymbol::d_p, j);
      auto br = commutator(dq, dp);
      auto expect = (i == j) ? (GaussRat(-1) * WeylElement::unit(n))
                             : WeylElement::zero(n);
      CHECK(br == expect);
      CHECK(commutator(heisenberg_embed(n, HeisenbergSymbol::d_t), dq).is_zero());
      CHECK(commutator(heisenberg_embed(n, HeisenbergSymbol::d_t), dp).is_zero());
    }

  // Jacobi across the whole embedded basis
  std::vector<WeylElement> basis;
  basis.push_back(heisenberg_embed(n, HeisenbergSymbol::d_t));
  for (int i = 1; i <= n; ++i) {
    basis.push_back(heisenberg_embed(n, HeisenbergSymbol::d_q, i));
    basis.push_back(heisenberg_embed(n, HeisenbergSymbol::d_p, i));
  }
  for (const auto& u : basis)
    for (const auto& v : basis)
      for (const auto& w : basis) {
        auto jac = commutator(commutator(u, v), w) +
                   commutator(commutator(v, w), u) +
                   commutator(commutator(w, u), v);
        CHECK(jac.is_zero());
      }
}

TEST_CASE("exact sector and floating sector agree through the bridge") {
  const int n = 2, N = 8;
  auto f = FockSpace::make(n, N);
  auto safe_max = [&](const Mat& m) {
    double worst = 0.0;
    for (int c = 0; c < m.cols(); ++c)
      if (f->degrees()(c) <= N - 2)
        worst = std::max(worst, m.col(c).cwiseAbs().maxCoeff());
    return worst;
  };
  // every word of length <= 2 exercises all weyl images of a-b degree <= 2
  std::vector<std::vector<int>> words;
  for (int g = 1; g <= 2 * n; ++g) words.push_back({g});
  for (int g = 1; g <= 2 * n; ++g)
    for (int h = 1; h <= 2 * n; ++h) words.push_back({g, h});
  for (const auto& w : words) {
    Mat lhs = Mat::Identity(f->dim(), f->dim());
    for (int g : w) lhs = lhs * clifford_matrix(f, g - 1);
    CliffordWord cw(n);
    cw.add_word(w, GaussRat(1));
    Mat rhs = weyl_to_fock(scliff_to_weyl(cw), f);
    CHECK(safe_max(lhs - rhs) < 1e-9);
  }
}
