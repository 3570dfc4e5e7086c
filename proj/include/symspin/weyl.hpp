#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <map>
#include <stdexcept>
#include <vector>

#include "symspin/fock.hpp"
#include "symspin/types.hpp"

namespace symspin {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

// Complex number with exact rational real and imaginary parts.  All algebra
// in this module runs over these, so every identity check below is exact.
struct GaussRat {
  cpp_rational re = 0;
  cpp_rational im = 0;

  GaussRat() = default;
  GaussRat(long r) : re(r) {}
  GaussRat(cpp_rational r, cpp_rational i = 0) : re(std::move(r)), im(std::move(i)) {}

  static GaussRat imaginary_unit() { return GaussRat(0, 1); }

  bool is_zero() const { return re == 0 && im == 0; }
  cd to_cd() const { return {re.convert_to<double>(), im.convert_to<double>()}; }

  friend GaussRat operator+(const GaussRat& a, const GaussRat& b) {
    return {a.re + b.re, a.im + b.im};
  }
  friend GaussRat operator-(const GaussRat& a, const GaussRat& b) {
    return {a.re - b.re, a.im - b.im};
  }
  friend GaussRat operator-(const GaussRat& a) { return {-a.re, -a.im}; }
  friend GaussRat operator*(const GaussRat& a, const GaussRat& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
  }
  friend GaussRat operator/(const GaussRat& a, const GaussRat& b) {
    cpp_rational norm = b.re * b.re + b.im * b.im;
    if (norm == 0) throw std::domain_error("GaussRat: division by zero");
    return {(a.re * b.re + a.im * b.im) / norm, (a.im * b.re - a.re * b.im) / norm};
  }
  friend bool operator==(const GaussRat& a, const GaussRat& b) {
    return a.re == b.re && a.im == b.im;
  }
};

// normal-ordered monomial a_1^{p_1}..a_n^{p_n} b_1^{q_1}..b_n^{q_n}
struct WeylMono {
  std::vector<int> a, b;
  friend bool operator<(const WeylMono& u, const WeylMono& v) {
    return u.a != v.a ? u.a < v.a : u.b < v.b;
  }
  friend bool operator==(const WeylMono& u, const WeylMono& v) {
    return u.a == v.a && u.b == v.b;
  }
};

// Element of the Weyl algebra with generators a_1..a_n, b_1..b_n subject to
// a_i b_j - b_j a_i = -delta_ij.  Stored in the unique normal form with all
// a's to the left of all b's; zero coefficients are pruned on insertion.
class WeylElement {
 public:
  explicit WeylElement(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("WeylElement: n must be positive");
  }

  int vars() const { return n_; }
  const std::map<WeylMono, GaussRat>& terms() const { return terms_; }

  void add_term(const WeylMono& mono, const GaussRat& coef) {
    if ((int)mono.a.size() != n_ || (int)mono.b.size() != n_)
      throw std::invalid_argument("WeylElement: monomial arity mismatch");
    auto it = terms_.find(mono);
    if (it == terms_.end()) {
      if (!coef.is_zero()) terms_.emplace(mono, coef);
    } else {
      it->second = it->second + coef;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

  bool is_zero() const { return terms_.empty(); }

  // total a-b degree of the highest monomial
  int degree() const {
    int d = -1;
    for (const auto& [mono, coef] : terms_) {
      int t = 0;
      for (int e : mono.a) t += e;
      for (int e : mono.b) t += e;
      d = std::max(d, t);
    }
    return d;
  }

  static WeylElement zero(int n) { return WeylElement(n); }
  static WeylElement unit(int n) {
    WeylElement w(n);
    w.add_term({std::vector<int>(n, 0), std::vector<int>(n, 0)}, GaussRat(1));
    return w;
  }
  // generators, 1-based to match the classical labeling a_1..a_n
  static WeylElement gen_a(int n, int i) {
    WeylElement w(n);
    WeylMono m{std::vector<int>(n, 0), std::vector<int>(n, 0)};
    m.a.at(i - 1) = 1;
    w.add_term(m, GaussRat(1));
    return w;
  }
  static WeylElement gen_b(int n, int i) {
    WeylElement w(n);
    WeylMono m{std::vector<int>(n, 0), std::vector<int>(n, 0)};
    m.b.at(i - 1) = 1;
    w.add_term(m, GaussRat(1));
    return w;
  }

  friend WeylElement operator+(const WeylElement& u, const WeylElement& v) {
    WeylElement out = u;
    for (const auto& [mono, coef] : v.terms_) out.add_term(mono, coef);
    return out;
  }
  friend WeylElement operator-(const WeylElement& u, const WeylElement& v) {
    WeylElement out = u;
    for (const auto& [mono, coef] : v.terms_) out.add_term(mono, -coef);
    return out;
  }
  friend WeylElement operator-(const WeylElement& u) {
    return GaussRat(-1) * u;
  }
  friend WeylElement operator*(const GaussRat& c, const WeylElement& u) {
    WeylElement out(u.n_);
    for (const auto& [mono, coef] : u.terms_) out.add_term(mono, c * coef);
    return out;
  }
  friend bool operator==(const WeylElement& u, const WeylElement& v) {
    return u.n_ == v.n_ && u.terms_ == v.terms_;
  }

 private:
  int n_;
  std::map<WeylMono, GaussRat> terms_;
};

namespace detail {

inline cpp_rational falling_product(int top, int count) {
  cpp_int out = 1;
  for (int k = 0; k < count; ++k) out *= (top - k);
  return cpp_rational(out);
}

// k! C(q,k) C(r,k) as an exact rational
inline cpp_rational reorder_coefficient(int q, int r, int k) {
  cpp_int fact = 1, cq = 1, cr = 1;
  for (int j = 1; j <= k; ++j) {
    fact *= j;
    cq = cq * (q - j + 1) / j;
    cr = cr * (r - j + 1) / j;
  }
  return cpp_rational(fact * cq * cr);
}

}  // namespace detail

// Product in normal form.  Reordering b_i^q a_i^r uses
//   b^q a^r = sum_k k! C(q,k) C(r,k) a^{r-k} b^{q-k}
// independently in each index, since distinct indices commute.
inline WeylElement normal_product(const WeylElement& u, const WeylElement& v) {
  if (u.vars() != v.vars())
    throw std::invalid_argument("normal_product: arity mismatch");
  const int n = u.vars();
  WeylElement out(n);
  for (const auto& [mu, cu] : u.terms())
    for (const auto& [mv, cv] : v.terms()) {
      // cross terms b^{mu.b} a^{mv.a}, expanded index by index
      std::vector<std::pair<std::vector<int>, cpp_rational>> partial = {
          {std::vector<int>{}, cpp_rational(1)}};
      for (int i = 0; i < n; ++i) {
        const int q = mu.b[i], r = mv.a[i];
        std::vector<std::pair<std::vector<int>, cpp_rational>> next;
        for (const auto& [ks, coef] : partial)
          for (int k = 0; k <= std::min(q, r); ++k) {
            auto ks2 = ks;
            ks2.push_back(k);
            next.emplace_back(std::move(ks2),
                              coef * detail::reorder_coefficient(q, r, k));
          }
        partial = std::move(next);
      }
      for (const auto& [ks, coef] : partial) {
        WeylMono mono{std::vector<int>(n), std::vector<int>(n)};
        for (int i = 0; i < n; ++i) {
          mono.a[i] = mu.a[i] + mv.a[i] - ks[i];
          mono.b[i] = mu.b[i] + mv.b[i] - ks[i];
        }
        out.add_term(mono, cu * cv * GaussRat(coef));
      }
    }
  return out;
}

inline WeylElement commutator(const WeylElement& u, const WeylElement& v) {
  return normal_product(u, v) - normal_product(v, u);
}

// polynomial in q^1..q^n with exact coefficients, keyed by exponent vector
class QPolynomial {
 public:
  explicit QPolynomial(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("QPolynomial: n must be positive");
  }

  int vars() const { return n_; }
  const std::map<std::vector<int>, GaussRat>& terms() const { return terms_; }

  void add_term(const std::vector<int>& exps, const GaussRat& coef) {
    if ((int)exps.size() != n_)
      throw std::invalid_argument("QPolynomial: exponent arity mismatch");
    auto it = terms_.find(exps);
    if (it == terms_.end()) {
      if (!coef.is_zero()) terms_.emplace(exps, coef);
    } else {
      it->second = it->second + coef;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

  static QPolynomial monomial(int n, const std::vector<int>& exps,
                              const GaussRat& coef = GaussRat(1)) {
    QPolynomial p(n);
    p.add_term(exps, coef);
    return p;
  }

  friend QPolynomial operator-(const QPolynomial& p, const QPolynomial& q) {
    QPolynomial out = p;
    for (const auto& [e, c] : q.terms_) out.add_term(e, -c);
    return out;
  }
  friend bool operator==(const QPolynomial& p, const QPolynomial& q) {
    return p.n_ == q.n_ && p.terms_ == q.terms_;
  }
  bool is_zero() const { return terms_.empty(); }

 private:
  int n_;
  std::map<std::vector<int>, GaussRat> terms_;
};

// faithful representation on polynomials: a_i multiplies by q^i, b_i is d/dq^i
inline QPolynomial polynomial_action(const WeylElement& w, const QPolynomial& p) {
  if (w.vars() != p.vars())
    throw std::invalid_argument("polynomial_action: arity mismatch");
  const int n = w.vars();
  QPolynomial out(n);
  for (const auto& [mono, coef] : w.terms())
    for (const auto& [exps, pc] : p.terms()) {
      cpp_rational factor = 1;
      std::vector<int> e = exps;
      bool killed = false;
      for (int i = 0; i < n && !killed; ++i) {
        if (mono.b[i] > e[i]) {
          killed = true;
          break;
        }
        factor *= detail::falling_product(e[i], mono.b[i]);
        e[i] -= mono.b[i];
      }
      if (killed) continue;
      for (int i = 0; i < n; ++i) e[i] += mono.a[i];
      out.add_term(e, coef * pc * GaussRat(factor));
    }
  return out;
}

// formal linear combination of words in the generators e_1..e_{2n}
class CliffordWord {
 public:
  explicit CliffordWord(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("CliffordWord: n must be positive");
  }

  int vars() const { return n_; }
  const std::map<std::vector<int>, GaussRat>& words() const { return words_; }

  void add_word(const std::vector<int>& word, const GaussRat& coef) {
    for (int g : word)
      if (g < 1 || g > 2 * n_)
        throw std::invalid_argument("CliffordWord: generator index out of range");
    auto it = words_.find(word);
    if (it == words_.end()) {
      if (!coef.is_zero()) words_.emplace(word, coef);
    } else {
      it->second = it->second + coef;
      if (it->second.is_zero()) words_.erase(it);
    }
  }

  static CliffordWord unit(int n) {
    CliffordWord w(n);
    w.add_word({}, GaussRat(1));
    return w;
  }
  static CliffordWord generator(int n, int g) {
    CliffordWord w(n);
    w.add_word({g}, GaussRat(1));
    return w;
  }

  // free-algebra product: concatenation of words
  friend CliffordWord operator*(const CliffordWord& u, const CliffordWord& v) {
    if (u.n_ != v.n_) throw std::invalid_argument("CliffordWord: arity mismatch");
    CliffordWord out(u.n_);
    for (const auto& [wu, cu] : u.words_)
      for (const auto& [wv, cv] : v.words_) {
        std::vector<int> cat = wu;
        cat.insert(cat.end(), wv.begin(), wv.end());
        out.add_word(cat, cu * cv);
      }
    return out;
  }
  friend CliffordWord operator-(const CliffordWord& u, const CliffordWord& v) {
    CliffordWord out = u;
    for (const auto& [w, c] : v.words_) out.add_word(w, -c);
    return out;
  }

 private:
  int n_;
  std::map<std::vector<int>, GaussRat> words_;
};

// The algebra map sending e_{n+i} to -a_i and e_{n+1-i} to i*b_i (1-based).
// Words multiply out left to right through the normal-form product, so the
// symplectic Clifford relations land in the Weyl relations.
inline WeylElement scliff_to_weyl(const CliffordWord& word) {
  const int n = word.vars();
  auto image_of = [n](int g) {
    if (g > n) return -WeylElement::gen_a(n, g - n);
    return GaussRat::imaginary_unit() * WeylElement::gen_b(n, n + 1 - g);
  };
  WeylElement out = WeylElement::zero(n);
  for (const auto& [w, coef] : word.words()) {
    WeylElement acc = WeylElement::unit(n);
    for (int g : w) acc = normal_product(acc, image_of(g));
    out = out + coef * acc;
  }
  return out;
}

// images of the Heisenberg Lie algebra basis inside the Weyl algebra
enum class HeisenbergSymbol { d_t, d_q, d_p };

inline WeylElement heisenberg_embed(int n, HeisenbergSymbol s, int index = 0) {
  switch (s) {
    case HeisenbergSymbol::d_t:
      return WeylElement::unit(n);
    case HeisenbergSymbol::d_q:
      return WeylElement::gen_a(n, index);
    case HeisenbergSymbol::d_p:
      return WeylElement::gen_b(n, index);
  }
  throw std::logic_error("heisenberg_embed: unknown symbol");
}

// Bridge into the floating-point sector: a_i realizes as -d_{n-i} and b_i as
// multiplication by x_{n-i} (fock variables 0-based), the composite being
// consistent with clifford_matrix under scliff_to_weyl.
inline Mat weyl_to_fock(const WeylElement& w, const FockPtr& trunc) {
  if (w.vars() != trunc->vars())
    throw std::invalid_argument("weyl_to_fock: arity mismatch");
  const int n = trunc->vars(), dim = trunc->dim();
  Mat out = Mat::Zero(dim, dim);
  for (const auto& [mono, coef] : w.terms()) {
    Mat acc = Mat::Identity(dim, dim);
    for (int i = 0; i < n; ++i)  // a-part first: normal order is a's left
      for (int k = 0; k < mono.a[i]; ++k)
        acc = acc * (-derivative_matrix(trunc, n - 1 - i));
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < mono.b[i]; ++k)
        acc = acc * position_matrix(trunc, n - 1 - i);
    out += coef.to_cd() * acc;
  }
  return out;
}

// exact rank of a Gaussian-rational matrix by row reduction with division
inline int rational_rank(std::vector<std::vector<GaussRat>> rows) {
  if (rows.empty()) return 0;
  const int cols = (int)rows[0].size();
  int rank = 0;
  for (int c = 0; c < cols && rank < (int)rows.size(); ++c) {
    int pivot = -1;
    for (int r = rank; r < (int)rows.size(); ++r)
      if (!rows[r][c].is_zero()) {
        pivot = r;
        break;
      }
    if (pivot < 0) continue;
    std::swap(rows[rank], rows[pivot]);
    const GaussRat lead = rows[rank][c];
    for (int r = rank + 1; r < (int)rows.size(); ++r) {
      if (rows[r][c].is_zero()) continue;
      const GaussRat f = rows[r][c] / lead;
      for (int k = c; k < cols; ++k)
        rows[r][k] = rows[r][k] - f * rows[rank][k];
    }
    ++rank;
  }
  return rank;
}

}  // namespace symspin
