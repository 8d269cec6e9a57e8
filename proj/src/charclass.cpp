#include "chern/charclass.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace chern {

Partition::Partition(std::vector<int> parts) : parts_(std::move(parts)) {
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    if (parts_[i] <= 0) throw std::invalid_argument("partition parts must be positive");
    if (i > 0 && parts_[i] > parts_[i - 1])
      throw std::invalid_argument("partition parts must be non-increasing");
    weight_ += parts_[i];
  }
}

std::vector<Partition> partitions(int k) {
  if (k < 0) throw std::invalid_argument("partitions: k must be non-negative");
  std::vector<Partition> out;
  std::vector<int> current;
  std::function<void(int, int)> rec = [&](int remaining, int max_part) {
    if (remaining == 0) {
      out.emplace_back(current);
      return;
    }
    for (int p = std::min(remaining, max_part); p >= 1; --p) {
      current.push_back(p);
      rec(remaining - p, p);
      current.pop_back();
    }
  };
  rec(k, k);
  return out;
}

BundleSlot::BundleSlot(std::string id, int r) : identifier(std::move(id)), rank(r) {
  if (r < 1) throw std::invalid_argument("bundle rank must be at least 1");
}

int monomial_grade(const Monomial& m) {
  int g = 0;
  for (const auto& [v, e] : m) g += v.index * e;
  return g;
}

int monomial_degree(const Monomial& m) {
  int d = 0;
  for (const auto& [v, e] : m) d += e;
  return d;
}

bool MonomialOrder::operator()(const Monomial& a, const Monomial& b) const {
  const int ga = monomial_grade(a), gb = monomial_grade(b);
  if (ga != gb) return ga < gb;
  const int da = monomial_degree(a), db = monomial_degree(b);
  if (da != db) return da > db;
  // Reverse-lexicographic tie break: at the largest variable where the
  // exponents differ, the smaller exponent ranks first.
  auto ia = a.rbegin(), ib = b.rbegin();
  while (ia != a.rend() || ib != b.rend()) {
    if (ib == b.rend() || (ia != a.rend() && ib->first < ia->first)) return false;  // a has extra var
    if (ia == a.rend() || ia->first < ib->first) return true;                      // b has extra var
    if (ia->second != ib->second) return ia->second < ib->second;
    ++ia;
    ++ib;
  }
  return false;
}

CharClassPoly::CharClassPoly(Rational constant) {
  if (constant != 0) terms_.emplace(Monomial{}, constant);
}

CharClassPoly CharClassPoly::variable(Family family, int index, int slot) {
  if (index < 1) throw std::invalid_argument("variable index must be positive");
  CharClassPoly p;
  p.terms_.emplace(Monomial{{Variable{slot, family, index}, 1}}, Rational(1));
  return p;
}

Rational CharClassPoly::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? Rational(0) : it->second;
}

bool CharClassPoly::is_homogeneous() const {
  if (terms_.empty()) return true;
  const int g = monomial_grade(terms_.begin()->first);
  return std::all_of(terms_.begin(), terms_.end(),
                     [g](const auto& t) { return monomial_grade(t.first) == g; });
}

int CharClassPoly::grade() const {
  if (terms_.empty()) return -1;
  if (!is_homogeneous()) throw std::logic_error("grade of a non-homogeneous polynomial");
  return monomial_grade(terms_.begin()->first);
}

int CharClassPoly::max_grade() const {
  int g = -1;
  for (const auto& t : terms_) g = std::max(g, monomial_grade(t.first));
  return g;
}

CharClassPoly CharClassPoly::homogeneous_part(int g) const {
  CharClassPoly out;
  for (const auto& [m, c] : terms_)
    if (monomial_grade(m) == g) out.terms_.emplace(m, c);
  return out;
}

CharClassPoly CharClassPoly::truncate(int g) const {
  CharClassPoly out;
  for (const auto& [m, c] : terms_)
    if (monomial_grade(m) <= g) out.terms_.emplace(m, c);
  return out;
}

void CharClassPoly::add_term(const Monomial& m, const Rational& coeff) {
  if (coeff == 0) return;
  auto [it, inserted] = terms_.emplace(m, coeff);
  if (!inserted) {
    it->second += coeff;
    if (it->second == 0) terms_.erase(it);
  }
}

CharClassPoly& CharClassPoly::operator+=(const CharClassPoly& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

CharClassPoly& CharClassPoly::operator-=(const CharClassPoly& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

CharClassPoly& CharClassPoly::operator*=(const Rational& r) {
  if (r == 0) {
    terms_.clear();
    return *this;
  }
  for (auto& t : terms_) t.second *= r;
  return *this;
}

namespace {

Monomial multiply_monomials(const Monomial& a, const Monomial& b) {
  Monomial out;
  out.reserve(a.size() + b.size());
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      out.push_back(*ia++);
    } else if (ia == a.end() || ib->first < ia->first) {
      out.push_back(*ib++);
    } else {
      out.emplace_back(ia->first, ia->second + ib->second);
      ++ia;
      ++ib;
    }
  }
  return out;
}

std::string variable_name(const Variable& v, const std::vector<std::string>& labels) {
  std::string name;
  switch (v.family) {
    case Family::Chern: name = "c"; break;
    case Family::Segre: name = "s"; break;
    case Family::Character: name = "ch"; break;
  }
  name += std::to_string(v.index);
  if (!labels.empty()) {
    if (v.slot < 0 || static_cast<std::size_t>(v.slot) >= labels.size())
      throw std::out_of_range("no label for bundle slot " + std::to_string(v.slot));
    name += "(" + labels[static_cast<std::size_t>(v.slot)] + ")";
  } else if (v.slot != 0) {
    name += "(E" + std::to_string(v.slot) + ")";
  }
  return name;
}

std::string rational_string(const Rational& r) {
  std::ostringstream os;
  os << boost::multiprecision::numerator(r);
  if (boost::multiprecision::denominator(r) != 1) os << "/" << boost::multiprecision::denominator(r);
  return os.str();
}

}  // namespace

CharClassPoly operator*(const CharClassPoly& a, const CharClassPoly& b) {
  CharClassPoly out;
  for (const auto& [ma, ca] : a.terms_)
    for (const auto& [mb, cb] : b.terms_) out.add_term(multiply_monomials(ma, mb), ca * cb);
  return out;
}

CharClassPoly CharClassPoly::pow(int e) const {
  if (e < 0) throw std::invalid_argument("negative exponent");
  CharClassPoly out(1);
  for (int i = 0; i < e; ++i) out = out * *this;
  return out;
}

std::string CharClassPoly::to_string(const std::vector<std::string>& slot_labels) const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [mono, coeff] : terms_) {
    const bool negative = coeff < 0;
    const Rational mag = negative ? Rational(-coeff) : coeff;
    if (first) {
      if (negative) out += "-";
    } else {
      out += negative ? " - " : " + ";
    }
    first = false;
    std::string body;
    for (const auto& [var, exp] : mono) {
      if (!body.empty()) body += "*";
      body += variable_name(var, slot_labels);
      if (exp > 1) body += "^" + std::to_string(exp);
    }
    if (body.empty()) {
      out += rational_string(mag);
    } else if (mag == 1) {
      out += body;
    } else {
      out += rational_string(mag) + "*" + body;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

CharClassAlgebra::CharClassAlgebra(int max_degree) : max_degree_(max_degree) {
  if (max_degree < 1) throw std::invalid_argument("maximum degree must be at least 1");
  const auto n = static_cast<std::size_t>(max_degree);
  segre_in_chern_.assign(n + 1, CharClassPoly{});
  chern_in_segre_.assign(n + 1, CharClassPoly{});
  power_sums_.assign(n + 1, CharClassPoly{});
  segre_in_chern_[0] = CharClassPoly(1);
  chern_in_segre_[0] = CharClassPoly(1);
  for (int k = 1; k <= max_degree; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    CharClassPoly s = -CharClassPoly::c(k);
    CharClassPoly c = -CharClassPoly::s(k);
    for (int j = 1; j < k; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      s -= CharClassPoly::c(j) * segre_in_chern_[uk - uj];
      c -= CharClassPoly::s(j) * chern_in_segre_[uk - uj];
    }
    segre_in_chern_[uk] = s;
    chern_in_segre_[uk] = c;

    // Newton: p_k = sum_{i=1}^{k-1} (-1)^{i-1} e_i p_{k-i} + (-1)^{k-1} k e_k
    CharClassPoly p = CharClassPoly::c(k) * Rational((k % 2 == 1) ? k : -k);
    for (int i = 1; i < k; ++i) {
      const Rational sign = (i % 2 == 1) ? 1 : -1;
      p += sign * (CharClassPoly::c(i) * power_sums_[uk - static_cast<std::size_t>(i)]);
    }
    power_sums_[uk] = p;
  }
}

void CharClassAlgebra::check_degree(int k) const {
  if (k > max_degree_)
    throw DegreeOverflow("degree " + std::to_string(k) + " exceeds configured maximum " +
                         std::to_string(max_degree_));
}

CharClassPoly CharClassAlgebra::relabel_slot(const CharClassPoly& p, int slot) {
  if (slot == 0) return p;
  CharClassPoly out;
  for (const auto& [mono, coeff] : p.terms()) {
    CharClassPoly term(coeff);
    for (const auto& [var, exp] : mono)
      term = term * CharClassPoly::variable(var.family, var.index, slot).pow(exp);
    out += term;
  }
  return out;
}

CharClassPoly CharClassAlgebra::segre_to_chern(int k, int slot) const {
  if (k < 1) throw std::invalid_argument("segre_to_chern: k must be positive");
  check_degree(k);
  return relabel_slot(segre_in_chern_[static_cast<std::size_t>(k)], slot);
}

CharClassPoly CharClassAlgebra::chern_to_segre(int k, int slot) const {
  if (k < 1) throw std::invalid_argument("chern_to_segre: k must be positive");
  check_degree(k);
  return relabel_slot(chern_in_segre_[static_cast<std::size_t>(k)], slot);
}

CharClassPoly CharClassAlgebra::chern_character(int k, int rank, int slot) const {
  if (k < 0) throw std::invalid_argument("chern_character: k must be non-negative");
  if (k == 0) return CharClassPoly(Rational(rank));
  check_degree(k);
  Rational factorial = 1;
  for (int i = 2; i <= k; ++i) factorial *= i;
  return relabel_slot(power_sums_[static_cast<std::size_t>(k)] * Rational(1 / factorial), slot);
}

CharClassPoly CharClassAlgebra::whitney_sum(int k, int first_slot, int second_slot) const {
  if (k < 0) throw std::invalid_argument("whitney_sum: k must be non-negative");
  check_degree(k);
  auto chern = [](int j, int slot) { return j == 0 ? CharClassPoly(1) : CharClassPoly::c(j, slot); };
  CharClassPoly out;
  for (int j = 0; j <= k; ++j) out += chern(j, first_slot) * chern(k - j, second_slot);
  return out;
}

CharClassPoly CharClassAlgebra::dual_class(int k, int slot) const {
  if (k < 0) throw std::invalid_argument("dual_class: k must be non-negative");
  if (k == 0) return CharClassPoly(1);
  check_degree(k);
  return CharClassPoly::c(k, slot) * Rational(k % 2 == 0 ? 1 : -1);
}

CharClassPoly CharClassAlgebra::ch_tensor(int k, const BundleSlot& first, const BundleSlot& second,
                                          int first_slot, int second_slot) const {
  if (k < 0) throw std::invalid_argument("ch_tensor: k must be non-negative");
  check_degree(k);
  CharClassPoly out;
  for (int j = 0; j <= k; ++j)
    out += chern_character(j, first.rank, first_slot) * chern_character(k - j, second.rank, second_slot);
  return out;
}

CharClassPoly CharClassAlgebra::total_chern(int slot) const {
  CharClassPoly out(1);
  for (int k = 1; k <= max_degree_; ++k) out += CharClassPoly::c(k, slot);
  return out;
}

CharClassPoly CharClassAlgebra::total_segre(int slot) const {
  CharClassPoly out(1);
  for (int k = 1; k <= max_degree_; ++k) out += CharClassPoly::s(k, slot);
  return out;
}

}  // namespace chern
