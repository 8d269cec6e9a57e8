// Complex (p,q)-forms sampled on chart grids.
//
// A (p,q)-form is stored in the basis dz_I ^ dzbar_J with I, J strictly
// increasing index sets and all holomorphic differentials first. Point-level
// exterior algebra (used by the metric and total-space code) works on the
// same basis through FormAlgebra tables.
#pragma once

#include "chern/grid.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace chern {

inline constexpr Complex kI{0.0, 1.0};
inline constexpr Real kPi = 3.14159265358979323846;

class DegreeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SingularStencil : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using IndexMask = std::uint32_t;

/// Index sets of {0..n-1} by size, and component numbering for (p,q).
class FormAlgebra {
 public:
  explicit FormAlgebra(int n);

  int dimension() const { return n_; }
  /// Masks of all k-subsets, in lexicographic order of their sorted elements.
  const std::vector<IndexMask>& subsets(int k) const { return subsets_[static_cast<std::size_t>(k)]; }
  int subset_index(IndexMask mask) const { return index_of_[mask]; }
  int components(int p, int q) const {
    return static_cast<int>(subsets(p).size() * subsets(q).size());
  }
  int component(int p, int q, IndexMask I, IndexMask J) const {
    (void)p;
    return subset_index(I) * static_cast<int>(subsets(q).size()) + subset_index(J);
  }

 private:
  int n_;
  std::vector<std::vector<IndexMask>> subsets_;
  std::vector<int> index_of_;
};

/// Shared algebra for dimension n (n <= kMaxDim).
const FormAlgebra& form_algebra(int n);

/// Sign of merging sorted index sets: dz_A ^ dz_B = sign * dz_{A u B}.
int merge_sign(IndexMask a, IndexMask b);

struct WedgeEntry {
  int left;
  int right;
  int out;
  int sign;
};

/// Nonzero products (p1,q1) ^ (p2,q2) in dimension n.
const std::vector<WedgeEntry>& wedge_table(int n, int p1, int q1, int p2, int q2);

/// A form at a single point; coefficients in FormAlgebra order.
struct PointForm {
  int n = 0, p = 0, q = 0;
  Eigen::Matrix<Complex, Eigen::Dynamic, 1, Eigen::ColMajor, 100, 1> c;

  PointForm() = default;
  PointForm(int dim, int pp, int qq);
  static PointForm scalar(int dim, Complex value);

  Complex& at(IndexMask I, IndexMask J) { return c(form_algebra(n).component(p, q, I, J)); }
  Complex at(IndexMask I, IndexMask J) const { return c(form_algebra(n).component(p, q, I, J)); }
};

PointForm wedge(const PointForm& a, const PointForm& b);

/// (1,1)-form sum_{ab} m(a,b) dz_a ^ dzbar_b.
PointForm one_one_form(const Eigen::Ref<const Eigen::MatrixXcd>& m);

/// Integral factor for top forms: dz_1..dz_n ^ dzbar_1..dzbar_n = factor * dV.
Complex top_form_volume_factor(int n);

// ---------------------------------------------------------------------------

class FormField {
 public:
  using Coefficients = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;

  FormField(Chart chart, int p, int q);
  static FormField constant(const Chart& chart, Complex value);

  const Chart& chart() const { return chart_; }
  int p() const { return p_; }
  int q() const { return q_; }
  int degree() const { return p_ + q_; }
  int dimension() const { return chart_.dimension(); }

  /// Components x nodes; column `node` holds the point coefficients.
  Coefficients& coeffs() { return coeffs_; }
  const Coefficients& coeffs() const { return coeffs_; }

  Complex& at(IndexMask I, IndexMask J, std::size_t node);
  Complex at(IndexMask I, IndexMask J, std::size_t node) const;

  PointForm point_form(std::size_t node) const;
  void set_point_form(std::size_t node, const PointForm& f);

  FormField& operator+=(const FormField& o);
  FormField& operator-=(const FormField& o);
  FormField& operator*=(Complex s);

  friend FormField operator+(FormField a, const FormField& b) { return a += b; }
  friend FormField operator-(FormField a, const FormField& b) { return a -= b; }
  friend FormField operator*(FormField a, Complex s) { return a *= s; }
  friend FormField operator*(Complex s, FormField a) { return a *= s; }

  /// Largest coefficient modulus over the nodes of a region.
  Real max_abs(const Region& region = Region::whole()) const;

  /// One CSV row per node: node, coordinates, then re/im per multi-index.
  void write_csv(const std::string& path) const;

 private:
  void check_compatible(const FormField& o) const;
  Chart chart_;
  int p_, q_;
  Coefficients coeffs_;
};

FormField wedge(const FormField& a, const FormField& b);

/// Holomorphic and antiholomorphic exterior derivatives by fourth-order
/// finite differences (one-sided on the two outermost layers).
FormField del(const FormField& a);
FormField dbar(const FormField& a);

/// Integral of a top-degree form over a region.
Complex integrate(const FormField& a, const Region& region = Region::whole(),
                  QuadratureRule rule = QuadratureRule::Trapezoid);

// ---------------------------------------------------------------------------

/// Value, first derivatives and complex Hessian d_a dbar_b of a function.
struct ScalarJet {
  Complex value{};
  std::array<Complex, kMaxDim> d{};
  std::array<Complex, kMaxDim> dbar{};
  std::array<Complex, kMaxDim * kMaxDim> ddbar{};  // [a * kMaxDim + b] = d_a dbar_b

  Complex& hess(int a, int b) { return ddbar[static_cast<std::size_t>(a * kMaxDim + b)]; }
  Complex hess(int a, int b) const { return ddbar[static_cast<std::size_t>(a * kMaxDim + b)]; }
};

using JetFunction = std::function<ScalarJet(const Point&)>;

/// Samples of a scalar function on a chart, real or complex.
template <class Scalar>
class BasicScalarField {
 public:
  using Values = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicScalarField(Chart chart, Values values);
  /// Samples `f` at every node; keeps `jet` for analytic derivatives.
  static BasicScalarField sample(const Chart& chart, const std::function<Scalar(const Point&)>& f,
                                 JetFunction jet = {});
  /// Samples jet.value (real part for real fields) and keeps the jet.
  static BasicScalarField from_jet(const Chart& chart, JetFunction jet);

  const Chart& chart() const { return chart_; }
  const Values& values() const { return values_; }
  Values& values() { return values_; }
  Scalar operator[](std::size_t node) const { return values_(static_cast<Eigen::Index>(node)); }

  const JetFunction& jet() const { return jet_; }
  void set_jet(JetFunction j) { jet_ = std::move(j); }

  /// Nodes where the function is not to be differenced (e.g. on a pole).
  const std::vector<std::uint8_t>& singular() const { return singular_; }
  void flag_singular(std::size_t node);
  bool is_singular(std::size_t node) const {
    return !singular_.empty() && singular_[node] != 0;
  }

 private:
  Chart chart_;
  Values values_;
  JetFunction jet_;
  std::vector<std::uint8_t> singular_;
};

using ScalarField = BasicScalarField<Complex>;
using RealField = BasicScalarField<Real>;

/// dd^c u = (i/2pi) sum u_{a bbar} dz_a ^ dzbar_b. Uses the analytic jet when
/// present, otherwise fourth-order differences. Throws SingularStencil if a
/// stencil touches a flagged node and no jet is available.
template <class Scalar>
FormField ddc(const BasicScalarField<Scalar>& u);

/// The (0,0)-form with the field's values.
template <class Scalar>
FormField as_form(const BasicScalarField<Scalar>& u);

/// Pulls back g, defined on the factor chart spanned by `axes`, along the
/// coordinate projection chart -> factor. g's chart must equal
/// chart.sub_chart(axes).
ScalarField coordinate_projection_pullback(const ScalarField& g, const std::vector<int>& axes,
                                           const Chart& chart);
/// Same for a function given pointwise on the factor coordinates.
ScalarField coordinate_projection_pullback(const std::function<Complex(const Point&)>& g,
                                           const std::vector<int>& axes, const Chart& chart);

namespace fd {

/// Fourth-order first derivative along a real axis at a node.
template <class Get>
Complex first(const Chart& chart, std::size_t node, int real_axis, Get&& f);
/// Fourth-order second derivative along one real axis.
template <class Get>
Complex second(const Chart& chart, std::size_t node, int real_axis, Get&& f);
/// Mixed derivative along two distinct real axes (tensor of first stencils).
template <class Get>
Complex mixed(const Chart& chart, std::size_t node, int ax1, int ax2, Get&& f);

/// Jet by finite differences of sampled values, with the same stencils.
template <class Get>
ScalarJet jet(const Chart& chart, std::size_t node, Get&& f);

struct Stencil {
  std::array<int, 6> offset{};
  std::array<Real, 6> weight{};
  int size = 0;
};
Stencil first_stencil(int i, int points);
Stencil second_stencil(int i, int points);

}  // namespace fd

// ---------------------------------------------------------------------------

namespace fd {

template <class Get>
Complex first(const Chart& chart, std::size_t node, int ax, Get&& f) {
  const Stencil s = first_stencil(chart.index_along(node, ax), chart.axis_points(ax));
  const auto stride = static_cast<std::ptrdiff_t>(chart.stride(ax));
  Complex acc = 0;
  for (int k = 0; k < s.size; ++k)
    acc += s.weight[static_cast<std::size_t>(k)] *
           Complex(f(static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) +
                                              s.offset[static_cast<std::size_t>(k)] * stride)));
  return acc / chart.spacing(ax / 2);
}

template <class Get>
Complex second(const Chart& chart, std::size_t node, int ax, Get&& f) {
  const Stencil s = second_stencil(chart.index_along(node, ax), chart.axis_points(ax));
  const auto stride = static_cast<std::ptrdiff_t>(chart.stride(ax));
  Complex acc = 0;
  for (int k = 0; k < s.size; ++k)
    acc += s.weight[static_cast<std::size_t>(k)] *
           Complex(f(static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) +
                                              s.offset[static_cast<std::size_t>(k)] * stride)));
  const Real h = chart.spacing(ax / 2);
  return acc / (h * h);
}

template <class Get>
Complex mixed(const Chart& chart, std::size_t node, int ax1, int ax2, Get&& f) {
  const Stencil s = first_stencil(chart.index_along(node, ax1), chart.axis_points(ax1));
  const auto stride = static_cast<std::ptrdiff_t>(chart.stride(ax1));
  Complex acc = 0;
  for (int k = 0; k < s.size; ++k) {
    const auto shifted = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) +
                                                  s.offset[static_cast<std::size_t>(k)] * stride);
    acc += s.weight[static_cast<std::size_t>(k)] * first(chart, shifted, ax2, f);
  }
  return acc / chart.spacing(ax1 / 2);
}

template <class Get>
ScalarJet jet(const Chart& chart, std::size_t node, Get&& f) {
  const int n = chart.dimension();
  ScalarJet j;
  j.value = Complex(f(node));
  std::array<Complex, kMaxDim> dx{}, dy{};
  for (int a = 0; a < n; ++a) {
    dx[static_cast<std::size_t>(a)] = first(chart, node, 2 * a, f);
    dy[static_cast<std::size_t>(a)] = first(chart, node, 2 * a + 1, f);
    j.d[static_cast<std::size_t>(a)] = 0.5 * (dx[static_cast<std::size_t>(a)] - kI * dy[static_cast<std::size_t>(a)]);
    j.dbar[static_cast<std::size_t>(a)] = 0.5 * (dx[static_cast<std::size_t>(a)] + kI * dy[static_cast<std::size_t>(a)]);
  }
  for (int a = 0; a < n; ++a) {
    const Complex xx = second(chart, node, 2 * a, f);
    const Complex yy = second(chart, node, 2 * a + 1, f);
    j.hess(a, a) = 0.25 * (xx + yy);
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      const Complex xaxb = mixed(chart, node, 2 * a, 2 * b, f);
      const Complex yayb = mixed(chart, node, 2 * a + 1, 2 * b + 1, f);
      const Complex xayb = mixed(chart, node, 2 * a, 2 * b + 1, f);
      const Complex yaxb = mixed(chart, node, 2 * a + 1, 2 * b, f);
      // (dx_a - i dy_a)(dx_b + i dy_b) / 4
      j.hess(a, b) = 0.25 * (xaxb + yayb + kI * (xayb - yaxb));
    }
  }
  return j;
}

}  // namespace fd

}  // namespace chern
