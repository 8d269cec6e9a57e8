// Exact graded polynomial algebra for characteristic classes.
//
// A CharClassPoly is a polynomial with rational coefficients in formal
// variables c_i, s_i, ch_i, one family of variables per bundle slot. The
// weighted grade of a monomial is the sum of the variable indices, so c_1^2
// and c_2 both have grade 2.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace chern {

using Rational = boost::multiprecision::cpp_rational;

class DegreeOverflow : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Non-increasing list of positive parts.
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::vector<int> parts);

  const std::vector<int>& parts() const { return parts_; }
  int weight() const { return weight_; }
  std::size_t length() const { return parts_.size(); }

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<int> parts_;
  int weight_ = 0;
};

/// All partitions of k, largest first part first: 3 -> (3), (2,1), (1,1,1).
std::vector<Partition> partitions(int k);

enum class Family : std::uint8_t { Chern = 0, Segre = 1, Character = 2 };

struct BundleSlot {
  std::string identifier;
  int rank = 1;

  BundleSlot(std::string id, int r);
};

struct Variable {
  int slot = 0;
  Family family = Family::Chern;
  int index = 1;

  friend auto operator<=>(const Variable&, const Variable&) = default;
};

/// Sorted (variable, exponent) list; exponents are positive.
using Monomial = std::vector<std::pair<Variable, int>>;

int monomial_grade(const Monomial& m);
int monomial_degree(const Monomial& m);

/// Graded reverse-lexicographic order, largest monomial first.
struct MonomialOrder {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

class CharClassPoly {
 public:
  using Terms = std::map<Monomial, Rational, MonomialOrder>;

  CharClassPoly() = default;
  /* implicit */ CharClassPoly(Rational constant);
  CharClassPoly(long long constant) : CharClassPoly(Rational(constant)) {}

  static CharClassPoly variable(Family family, int index, int slot = 0);
  static CharClassPoly c(int index, int slot = 0) { return variable(Family::Chern, index, slot); }
  static CharClassPoly s(int index, int slot = 0) { return variable(Family::Segre, index, slot); }
  static CharClassPoly ch(int index, int slot = 0) { return variable(Family::Character, index, slot); }

  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  Rational coefficient(const Monomial& m) const;

  /// Weighted grade; -1 for the zero polynomial. Throws if not homogeneous.
  int grade() const;
  bool is_homogeneous() const;
  int max_grade() const;

  /// Terms of weighted grade exactly g.
  CharClassPoly homogeneous_part(int g) const;
  /// Drops every term of weighted grade greater than g.
  CharClassPoly truncate(int g) const;

  /// Replaces every variable of (family, slot) by image(index).
  template <class Fn>
  CharClassPoly substitute(Family family, int slot, Fn&& image) const;

  CharClassPoly pow(int e) const;

  CharClassPoly& operator+=(const CharClassPoly& o);
  CharClassPoly& operator-=(const CharClassPoly& o);
  CharClassPoly& operator*=(const Rational& r);

  friend CharClassPoly operator+(CharClassPoly a, const CharClassPoly& b) { return a += b; }
  friend CharClassPoly operator-(CharClassPoly a, const CharClassPoly& b) { return a -= b; }
  friend CharClassPoly operator-(CharClassPoly a) { return a *= Rational(-1); }
  friend CharClassPoly operator*(const CharClassPoly& a, const CharClassPoly& b);
  friend CharClassPoly operator*(CharClassPoly a, const Rational& r) { return a *= r; }
  friend CharClassPoly operator*(const Rational& r, CharClassPoly a) { return a *= r; }
  friend bool operator==(const CharClassPoly& a, const CharClassPoly& b) { return a.terms_ == b.terms_; }

  /// Canonical ASCII: "c1^2 - c2", "1/2*c1^2 - c2", "c1(E) + c1(F)".
  /// Slot labels are printed only when given.
  std::string to_string(const std::vector<std::string>& slot_labels = {}) const;

  /// Evaluates with rational values for every variable.
  template <class Fn>
  Rational evaluate(Fn&& value) const;

 private:
  void add_term(const Monomial& m, const Rational& coeff);
  Terms terms_;
};

/// Characteristic-class identities up to a fixed maximum degree.
///
/// Conversion tables are filled once at construction; every member
/// function is const and the object may be shared across threads.
class CharClassAlgebra {
 public:
  explicit CharClassAlgebra(int max_degree = 10);

  int max_degree() const { return max_degree_; }

  /// s_k in terms of c_1..c_k, from s_k + s_{k-1}c_1 + ... + c_k = 0.
  CharClassPoly segre_to_chern(int k, int slot = 0) const;
  /// c_k in terms of s_1..s_k (same recursion with roles exchanged).
  CharClassPoly chern_to_segre(int k, int slot = 0) const;
  /// ch_k in terms of c_1..c_k via Newton's identities; ch_0 = rank.
  CharClassPoly chern_character(int k, int rank, int slot = 0) const;
  /// sum_j c_j(first) c_{k-j}(second), c_0 = 1.
  CharClassPoly whitney_sum(int k, int first_slot = 0, int second_slot = 1) const;
  /// (-1)^k c_k.
  CharClassPoly dual_class(int k, int slot = 0) const;
  /// sum_j ch_j(first) ch_{k-j}(second) expanded in Chern variables.
  CharClassPoly ch_tensor(int k, const BundleSlot& first, const BundleSlot& second,
                          int first_slot = 0, int second_slot = 1) const;

  /// Total classes 1 + x_1 + ... + x_N.
  CharClassPoly total_chern(int slot = 0) const;
  CharClassPoly total_segre(int slot = 0) const;

 private:
  void check_degree(int k) const;
  static CharClassPoly relabel_slot(const CharClassPoly& p, int slot);

  int max_degree_;
  std::vector<CharClassPoly> segre_in_chern_;
  std::vector<CharClassPoly> chern_in_segre_;
  std::vector<CharClassPoly> power_sums_;  // p_k in Chern variables, p_0 = 0 placeholder
};

// ---------------------------------------------------------------------------

template <class Fn>
CharClassPoly CharClassPoly::substitute(Family family, int slot, Fn&& image) const {
  CharClassPoly out;
  for (const auto& [mono, coeff] : terms_) {
    CharClassPoly term(coeff);
    for (const auto& [var, exp] : mono) {
      CharClassPoly factor = (var.family == family && var.slot == slot)
                                 ? CharClassPoly(image(var.index))
                                 : variable(var.family, var.index, var.slot);
      term = term * factor.pow(exp);
    }
    out += term;
  }
  return out;
}

template <class Fn>
Rational CharClassPoly::evaluate(Fn&& value) const {
  Rational total = 0;
  for (const auto& [mono, coeff] : terms_) {
    Rational t = coeff;
    for (const auto& [var, exp] : mono) {
      const Rational v = value(var);
      for (int e = 0; e < exp; ++e) t *= v;
    }
    total += t;
  }
  return total;
}

}  // namespace chern
