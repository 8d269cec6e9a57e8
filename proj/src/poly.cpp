#include "chern/poly.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace chern {

namespace {

Exponent zero_exponent() { return Exponent{}; }

int total(const Exponent& e) {
  int s = 0;
  for (int v : e) s += v;
  return s;
}

// Powers z_a^k for k <= max_power, per axis.
struct PowerTable {
  std::array<std::vector<Complex>, kMaxDim> p;
  PowerTable(const Point& z, int max_power, bool conjugate) {
    for (int a = 0; a < z.size(); ++a) {
      auto& v = p[static_cast<std::size_t>(a)];
      v.assign(static_cast<std::size_t>(max_power) + 1, Complex(1));
      const Complex x = conjugate ? std::conj(z(a)) : z(a);
      for (int k = 1; k <= max_power; ++k) v[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k) - 1] * x;
    }
  }
  Complex monomial(const Exponent& e, int n) const {
    Complex m = 1;
    for (int a = 0; a < n; ++a)
      if (e[static_cast<std::size_t>(a)] != 0)
        m *= p[static_cast<std::size_t>(a)][static_cast<std::size_t>(e[static_cast<std::size_t>(a)])];
    return m;
  }
};

int max_exponent(const Exponent& e) {
  int m = 0;
  for (int v : e) m = std::max(m, v);
  return m;
}

Real binomial(int n, int k) {
  Real b = 1;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

Real factorial(int k) {
  Real f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace

// ---------------------------------------------------------------------------

HoloPoly HoloPoly::constant(int n, Complex c) {
  HoloPoly p(n);
  p.add_term(zero_exponent(), c);
  return p;
}

HoloPoly HoloPoly::coordinate(int n, int a) {
  if (a < 0 || a >= n) throw std::out_of_range("coordinate index out of range");
  HoloPoly p(n);
  Exponent e{};
  e[static_cast<std::size_t>(a)] = 1;
  p.add_term(e, 1.0);
  return p;
}

void HoloPoly::add_term(const Exponent& e, Complex c) {
  if (c == Complex(0)) return;
  auto [it, inserted] = terms_.emplace(e, c);
  if (!inserted) {
    it->second += c;
    if (it->second == Complex(0)) terms_.erase(it);
  }
}

int HoloPoly::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_) d = std::max(d, total(e));
  return d;
}

Complex HoloPoly::operator()(const Point& z) const {
  int maxp = 0;
  for (const auto& [e, c] : terms_) maxp = std::max(maxp, max_exponent(e));
  const PowerTable pw(z, maxp, false);
  Complex s = 0;
  for (const auto& [e, c] : terms_) s += c * pw.monomial(e, n_);
  return s;
}

HoloPoly HoloPoly::derivative(int a) const {
  HoloPoly out(n_);
  for (const auto& [e, c] : terms_) {
    const int k = e[static_cast<std::size_t>(a)];
    if (k == 0) continue;
    Exponent f = e;
    --f[static_cast<std::size_t>(a)];
    out.add_term(f, c * static_cast<Real>(k));
  }
  return out;
}

HoloPoly& HoloPoly::operator+=(const HoloPoly& o) {
  if (n_ == 0) n_ = o.n_;
  for (const auto& [e, c] : o.terms_) add_term(e, c);
  return *this;
}

HoloPoly operator*(const HoloPoly& a, const HoloPoly& b) {
  HoloPoly out(std::max(a.n_, b.n_));
  for (const auto& [ea, ca] : a.terms_)
    for (const auto& [eb, cb] : b.terms_) {
      Exponent e{};
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
      out.add_term(e, ca * cb);
    }
  return out;
}

HoloPoly operator*(Complex s, HoloPoly a) {
  HoloPoly out(a.n_);
  for (const auto& [e, c] : a.terms_) out.add_term(e, s * c);
  return out;
}

HoloPoly HoloPoly::parse(int n, const std::string& text) {
  HoloPoly out(n);
  std::size_t pos = 0;
  auto skip = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("cannot parse polynomial '" + text + "': " + why);
  };
  skip();
  if (pos == text.size()) fail("empty");
  bool first = true;
  while (pos < text.size()) {
    Real sign = 1;
    skip();
    if (text[pos] == '+' || text[pos] == '-') {
      sign = text[pos] == '-' ? -1 : 1;
      ++pos;
    } else if (!first) {
      fail("expected + or -");
    }
    first = false;
    Complex coeff = sign;
    Exponent e{};
    bool need_factor = true;
    while (true) {
      skip();
      if (pos >= text.size()) {
        if (need_factor) fail("dangling operator");
        break;
      }
      const char ch = text[pos];
      if (ch == 'z') {
        ++pos;
        std::size_t used = 0;
        int a = 0;
        try {
          a = std::stoi(text.substr(pos), &used);
        } catch (const std::exception&) {
          fail("coordinate index missing");
        }
        pos += used;
        if (a < 1 || a > n) fail("coordinate z" + std::to_string(a) + " out of range");
        int power = 1;
        skip();
        if (pos < text.size() && text[pos] == '^') {
          ++pos;
          try {
            power = std::stoi(text.substr(pos), &used);
          } catch (const std::exception&) {
            fail("exponent missing");
          }
          if (power < 0) fail("negative exponent");
          pos += used;
        }
        e[static_cast<std::size_t>(a - 1)] += power;
      } else if (ch == 'i') {
        ++pos;
        coeff *= Complex(0, 1);
      } else if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
        std::size_t used = 0;
        const Real v = std::stod(text.substr(pos), &used);
        pos += used;
        coeff *= v;
        if (pos < text.size() && text[pos] == 'i') {
          ++pos;
          coeff *= Complex(0, 1);
        }
      } else {
        fail(std::string("unexpected character '") + ch + "'");
      }
      need_factor = false;
      skip();
      if (pos < text.size() && text[pos] == '*') {
        ++pos;
        need_factor = true;
        continue;
      }
      break;
    }
    out.add_term(e, coeff);
  }
  return out;
}

// ---------------------------------------------------------------------------

BiPoly BiPoly::constant(int n, Complex c) {
  BiPoly p(n);
  p.add_term(zero_exponent(), zero_exponent(), c);
  return p;
}

BiPoly BiPoly::conj_product(const HoloPoly& f, const HoloPoly& g) {
  BiPoly out(std::max(f.dimension(), g.dimension()));
  for (const auto& [ef, cf] : f.terms())
    for (const auto& [eg, cg] : g.terms()) out.add_term(eg, ef, std::conj(cf) * cg);
  return out;
}

void BiPoly::add_term(const Exponent& alpha, const Exponent& beta, Complex c) {
  if (c == Complex(0)) return;
  auto [it, inserted] = terms_.emplace(Key{alpha, beta}, c);
  if (!inserted) {
    it->second += c;
    if (it->second == Complex(0)) terms_.erase(it);
  }
}

int BiPoly::degree() const {
  int d = 0;
  for (const auto& [k, c] : terms_) d = std::max(d, total(k.first) + total(k.second));
  return d;
}

Complex BiPoly::operator()(const Point& z) const {
  int maxp = 0;
  for (const auto& [k, c] : terms_) maxp = std::max({maxp, max_exponent(k.first), max_exponent(k.second)});
  const PowerTable pz(z, maxp, false), pzb(z, maxp, true);
  Complex s = 0;
  for (const auto& [k, c] : terms_) s += c * pz.monomial(k.first, n_) * pzb.monomial(k.second, n_);
  return s;
}

BiPoly BiPoly::d(int a) const {
  BiPoly out(n_);
  for (const auto& [k, c] : terms_) {
    const int p = k.first[static_cast<std::size_t>(a)];
    if (p == 0) continue;
    Exponent e = k.first;
    --e[static_cast<std::size_t>(a)];
    out.add_term(e, k.second, c * static_cast<Real>(p));
  }
  return out;
}

BiPoly BiPoly::dbar(int b) const {
  BiPoly out(n_);
  for (const auto& [k, c] : terms_) {
    const int p = k.second[static_cast<std::size_t>(b)];
    if (p == 0) continue;
    Exponent e = k.second;
    --e[static_cast<std::size_t>(b)];
    out.add_term(k.first, e, c * static_cast<Real>(p));
  }
  return out;
}

BiPoly BiPoly::convolve_radial(const std::vector<Real>& radial_moments) const {
  BiPoly out(n_);
  for (const auto& [k, c] : terms_) {
    const Exponent& alpha = k.first;
    const Exponent& beta = k.second;
    // Enumerate gamma <= min(alpha, beta) componentwise.
    Exponent bound{};
    for (int a = 0; a < n_; ++a)
      bound[static_cast<std::size_t>(a)] = std::min(alpha[static_cast<std::size_t>(a)], beta[static_cast<std::size_t>(a)]);
    Exponent gamma{};
    while (true) {
      const int g = total(gamma);
      if (static_cast<std::size_t>(g) >= radial_moments.size())
        throw std::invalid_argument("convolve_radial: not enough moments for the polynomial degree");
      // E|y^gamma|^2 for a radial law = E|y|^{2g} (n-1)! prod gamma_a! / (n-1+g)!
      Real angular = factorial(n_ - 1) / factorial(n_ - 1 + g);
      Real weight = 1;
      for (int a = 0; a < n_; ++a) {
        const int ga = gamma[static_cast<std::size_t>(a)];
        angular *= factorial(ga);
        weight *= binomial(alpha[static_cast<std::size_t>(a)], ga) * binomial(beta[static_cast<std::size_t>(a)], ga);
      }
      Exponent ea = alpha, eb = beta;
      for (std::size_t a = 0; a < ea.size(); ++a) {
        ea[a] -= gamma[a];
        eb[a] -= gamma[a];
      }
      out.add_term(ea, eb, c * weight * angular * radial_moments[static_cast<std::size_t>(g)]);
      int a = 0;
      while (a < n_ && gamma[static_cast<std::size_t>(a)] == bound[static_cast<std::size_t>(a)]) {
        gamma[static_cast<std::size_t>(a)] = 0;
        ++a;
      }
      if (a == n_) break;
      ++gamma[static_cast<std::size_t>(a)];
    }
  }
  return out;
}

BiPoly& BiPoly::operator+=(const BiPoly& o) {
  if (n_ == 0) n_ = o.n_;
  for (const auto& [k, c] : o.terms_) add_term(k.first, k.second, c);
  return *this;
}

BiPoly operator*(Complex s, BiPoly a) {
  BiPoly out(a.n_);
  for (const auto& [k, c] : a.terms_) out.add_term(k.first, k.second, s * c);
  return out;
}

// ---------------------------------------------------------------------------

SectionMatrix::SectionMatrix(int n, std::vector<std::vector<HoloPoly>> rows) : n_(n), entries_(std::move(rows)) {
  if (entries_.empty()) throw std::invalid_argument("section matrix needs at least one row");
  const std::size_t r = entries_[0].size();
  if (r == 0) throw std::invalid_argument("section matrix needs at least one column");
  for (const auto& row : entries_)
    if (row.size() != r) throw std::invalid_argument("section matrix rows have different lengths");
}

SectionMatrix SectionMatrix::parse(int n, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::vector<HoloPoly>> out;
  for (const auto& row : rows) {
    std::vector<HoloPoly> r;
    for (const auto& s : row) r.push_back(HoloPoly::parse(n, s));
    out.push_back(std::move(r));
  }
  return SectionMatrix(n, std::move(out));
}

Eigen::MatrixXcd SectionMatrix::evaluate(const Point& z) const {
  Eigen::MatrixXcd S(rows(), cols());
  for (int i = 0; i < rows(); ++i)
    for (int j = 0; j < cols(); ++j) S(i, j) = (*this)(i, j)(z);
  return S;
}

std::vector<std::vector<BiPoly>> SectionMatrix::gram() const {
  const auto r = static_cast<std::size_t>(cols());
  std::vector<std::vector<BiPoly>> g(r, std::vector<BiPoly>(r, BiPoly(n_)));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j)
      for (const auto& row : entries_) g[i][j] += BiPoly::conj_product(row[i], row[j]);
  return g;
}

}  // namespace chern
