// Polynomials in chart coordinates: holomorphic ones in z, and
// real-analytic ones in (z, zbar) used for metric entries.
#pragma once

#include "chern/grid.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace chern {

using Exponent = std::array<int, kMaxDim>;

/// Polynomial sum c_alpha z^alpha.
class HoloPoly {
 public:
  HoloPoly() = default;
  explicit HoloPoly(int n) : n_(n) {}
  static HoloPoly constant(int n, Complex c);
  /// z_a (0-based).
  static HoloPoly coordinate(int n, int a);
  /// Parses sums of terms such as "z1", "2*z1*z2^2", "-0.5i*z2", "1 + z1".
  /// Coordinates are 1-based in the text.
  static HoloPoly parse(int n, const std::string& text);

  int dimension() const { return n_; }
  const std::map<Exponent, Complex>& terms() const { return terms_; }
  void add_term(const Exponent& e, Complex c);
  int degree() const;
  bool is_zero() const { return terms_.empty(); }

  Complex operator()(const Point& z) const;
  HoloPoly derivative(int a) const;

  HoloPoly& operator+=(const HoloPoly& o);
  friend HoloPoly operator+(HoloPoly a, const HoloPoly& b) { return a += b; }
  friend HoloPoly operator*(const HoloPoly& a, const HoloPoly& b);
  friend HoloPoly operator*(Complex s, HoloPoly a);

 private:
  int n_ = 0;
  std::map<Exponent, Complex> terms_;
};

/// Polynomial sum c_{alpha beta} z^alpha zbar^beta.
class BiPoly {
 public:
  using Key = std::pair<Exponent, Exponent>;

  BiPoly() = default;
  explicit BiPoly(int n) : n_(n) {}
  static BiPoly constant(int n, Complex c);
  /// conj(f) * g.
  static BiPoly conj_product(const HoloPoly& f, const HoloPoly& g);

  int dimension() const { return n_; }
  const std::map<Key, Complex>& terms() const { return terms_; }
  void add_term(const Exponent& alpha, const Exponent& beta, Complex c);
  int degree() const;

  Complex operator()(const Point& z) const;
  /// d/dz_a and d/dzbar_b.
  BiPoly d(int a) const;
  BiPoly dbar(int b) const;

  /// Convolution with a radial probability density on C^n, given its
  /// moments E|y|^{2j} for j = 0..degree. Only the moments enter because
  /// y^gamma ybar^delta averages to zero unless gamma = delta.
  BiPoly convolve_radial(const std::vector<Real>& radial_moments) const;

  BiPoly& operator+=(const BiPoly& o);
  friend BiPoly operator+(BiPoly a, const BiPoly& b) { return a += b; }
  friend BiPoly operator*(Complex s, BiPoly a);

 private:
  int n_ = 0;
  std::map<Key, Complex> terms_;
};

/// m x r matrix of holomorphic polynomials: the sections inducing a metric.
class SectionMatrix {
 public:
  SectionMatrix(int n, std::vector<std::vector<HoloPoly>> rows);
  /// Rows of strings, each parsed with HoloPoly::parse.
  static SectionMatrix parse(int n, const std::vector<std::vector<std::string>>& rows);

  int dimension() const { return n_; }
  int rows() const { return static_cast<int>(entries_.size()); }
  int cols() const { return entries_.empty() ? 0 : static_cast<int>(entries_[0].size()); }
  const HoloPoly& operator()(int i, int j) const {
    return entries_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  Eigen::MatrixXcd evaluate(const Point& z) const;
  /// Entries of S^H S as polynomials in (z, zbar).
  std::vector<std::vector<BiPoly>> gram() const;

 private:
  int n_;
  std::vector<std::vector<HoloPoly>> entries_;
};

}  // namespace chern
