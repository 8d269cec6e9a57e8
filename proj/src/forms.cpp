#include "chern/forms.hpp"

#include <bit>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <type_traits>

namespace chern {

FormAlgebra::FormAlgebra(int n) : n_(n) {
  if (n < 0 || n > kMaxDim) throw std::invalid_argument("form algebra dimension out of range");
  subsets_.resize(static_cast<std::size_t>(n) + 1);
  index_of_.assign(std::size_t{1} << n, -1);
  // Lexicographic order of sorted elements: enumerate combinations directly.
  for (int k = 0; k <= n; ++k) {
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
      IndexMask m = 0;
      for (int i : idx) m |= IndexMask{1} << i;
      index_of_[m] = static_cast<int>(subsets_[static_cast<std::size_t>(k)].size());
      subsets_[static_cast<std::size_t>(k)].push_back(m);
      int pos = k - 1;
      while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
      if (pos < 0) break;
      ++idx[static_cast<std::size_t>(pos)];
      for (int j = pos + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j) - 1] + 1;
    }
  }
}

const FormAlgebra& form_algebra(int n) {
  static const auto algebras = [] {
    std::vector<std::unique_ptr<FormAlgebra>> v;
    for (int k = 0; k <= kMaxDim; ++k) v.push_back(std::make_unique<FormAlgebra>(k));
    return v;
  }();
  if (n < 0 || n > kMaxDim) throw std::invalid_argument("form algebra dimension out of range");
  return *algebras[static_cast<std::size_t>(n)];
}

int merge_sign(IndexMask a, IndexMask b) {
  // Count pairs (i in a, j in b) with i > j.
  int inversions = 0;
  for (IndexMask rest = b; rest != 0; rest &= rest - 1) {
    const int j = std::countr_zero(rest);
    inversions += std::popcount(a >> (j + 1));
  }
  return (inversions % 2 == 0) ? 1 : -1;
}

const std::vector<WedgeEntry>& wedge_table(int n, int p1, int q1, int p2, int q2) {
  using Key = std::tuple<int, int, int, int, int>;
  static std::mutex mutex;
  static std::map<Key, std::unique_ptr<std::vector<WedgeEntry>>> cache;
  const Key key{n, p1, q1, p2, q2};
  std::lock_guard lock(mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return *it->second;

  const FormAlgebra& alg = form_algebra(n);
  auto table = std::make_unique<std::vector<WedgeEntry>>();
  if (p1 + p2 <= n && q1 + q2 <= n) {
    // (dz_I dzb_J) ^ (dz_K dzb_L) = (-1)^{|J||K|} s(I,K) s(J,L) dz_{IK} dzb_{JL}
    const int swap = ((q1 * p2) % 2 == 0) ? 1 : -1;
    for (IndexMask I : alg.subsets(p1))
      for (IndexMask J : alg.subsets(q1))
        for (IndexMask K : alg.subsets(p2)) {
          if (I & K) continue;
          for (IndexMask L : alg.subsets(q2)) {
            if (J & L) continue;
            table->push_back({alg.component(p1, q1, I, J), alg.component(p2, q2, K, L),
                              alg.component(p1 + p2, q1 + q2, I | K, J | L),
                              swap * merge_sign(I, K) * merge_sign(J, L)});
          }
        }
  }
  auto& ref = *table;
  cache.emplace(key, std::move(table));
  return ref;
}

PointForm::PointForm(int dim, int pp, int qq) : n(dim), p(pp), q(qq) {
  if (pp < 0 || qq < 0 || pp > dim || qq > dim) throw DegreeError("bidegree out of range");
  c.setZero(form_algebra(dim).components(pp, qq));
}

PointForm PointForm::scalar(int dim, Complex value) {
  PointForm f(dim, 0, 0);
  f.c(0) = value;
  return f;
}

PointForm wedge(const PointForm& a, const PointForm& b) {
  if (a.n != b.n) throw ChartMismatch("wedge of point forms of different dimension");
  if (a.p + b.p > a.n || a.q + b.q > a.n) throw DegreeError("wedge degree overflow");
  PointForm out(a.n, a.p + b.p, a.q + b.q);
  for (const WedgeEntry& e : wedge_table(a.n, a.p, a.q, b.p, b.q))
    out.c(e.out) += static_cast<Real>(e.sign) * a.c(e.left) * b.c(e.right);
  return out;
}

PointForm one_one_form(const Eigen::Ref<const Eigen::MatrixXcd>& m) {
  const int n = static_cast<int>(m.rows());
  PointForm f(n, 1, 1);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) f.c(a * n + b) = m(a, b);
  return f;
}

Complex top_form_volume_factor(int n) {
  // dz ^ dzbar = -2i dx ^ dy per axis, and regrouping all dz first costs
  // (-1)^{n(n-1)/2}.
  Complex f = 1;
  for (int a = 0; a < n; ++a) f *= Complex(0, -2);
  if ((n * (n - 1) / 2) % 2 == 1) f = -f;
  return f;
}

// ---------------------------------------------------------------------------

FormField::FormField(Chart chart, int p, int q) : chart_(std::move(chart)), p_(p), q_(q) {
  const int n = chart_.dimension();
  if (p < 0 || q < 0 || p > n || q > n) throw DegreeError("bidegree out of range for chart");
  coeffs_.setZero(form_algebra(n).components(p, q), static_cast<Eigen::Index>(chart_.node_count()));
}

FormField FormField::constant(const Chart& chart, Complex value) {
  FormField f(chart, 0, 0);
  f.coeffs_.setConstant(value);
  return f;
}

Complex& FormField::at(IndexMask I, IndexMask J, std::size_t node) {
  return coeffs_(form_algebra(dimension()).component(p_, q_, I, J), static_cast<Eigen::Index>(node));
}

Complex FormField::at(IndexMask I, IndexMask J, std::size_t node) const {
  return coeffs_(form_algebra(dimension()).component(p_, q_, I, J), static_cast<Eigen::Index>(node));
}

PointForm FormField::point_form(std::size_t node) const {
  PointForm f(dimension(), p_, q_);
  f.c = coeffs_.col(static_cast<Eigen::Index>(node));
  return f;
}

void FormField::set_point_form(std::size_t node, const PointForm& f) {
  if (f.p != p_ || f.q != q_ || f.n != dimension()) throw DegreeError("point form bidegree mismatch");
  coeffs_.col(static_cast<Eigen::Index>(node)) = f.c;
}

void FormField::check_compatible(const FormField& o) const {
  if (!(chart_ == o.chart_)) throw ChartMismatch("forms live on different charts");
  if (p_ != o.p_ || q_ != o.q_) throw DegreeError("forms have different bidegrees");
}

FormField& FormField::operator+=(const FormField& o) {
  check_compatible(o);
  coeffs_ += o.coeffs_;
  return *this;
}

FormField& FormField::operator-=(const FormField& o) {
  check_compatible(o);
  coeffs_ -= o.coeffs_;
  return *this;
}

FormField& FormField::operator*=(Complex s) {
  coeffs_ *= s;
  return *this;
}

Real FormField::max_abs(const Region& region) const {
  Real m = 0;
  for (std::size_t node = 0; node < chart_.node_count(); ++node) {
    if (!region.contains(chart_, node)) continue;
    m = std::max(m, coeffs_.col(static_cast<Eigen::Index>(node)).cwiseAbs().maxCoeff());
  }
  return m;
}

void FormField::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  const FormAlgebra& alg = form_algebra(dimension());
  auto label = [](IndexMask m) {
    std::string s;
    for (IndexMask r = m; r != 0; r &= r - 1) s += std::to_string(std::countr_zero(r) + 1);
    return s.empty() ? std::string("-") : s;
  };
  out << "node";
  for (int a = 0; a < dimension(); ++a) out << ",re_z" << a + 1 << ",im_z" << a + 1;
  for (IndexMask I : alg.subsets(p_))
    for (IndexMask J : alg.subsets(q_)) out << ",re[" << label(I) << ";" << label(J) << "],im[" << label(I) << ";" << label(J) << "]";
  out << "\n";
  out.precision(17);
  for (std::size_t node = 0; node < chart_.node_count(); ++node) {
    out << node;
    const Point z = chart_.point(node);
    for (int a = 0; a < dimension(); ++a) out << "," << z(a).real() << "," << z(a).imag();
    for (Eigen::Index c = 0; c < coeffs_.rows(); ++c)
      out << "," << coeffs_(c, static_cast<Eigen::Index>(node)).real() << ","
          << coeffs_(c, static_cast<Eigen::Index>(node)).imag();
    out << "\n";
  }
}

FormField wedge(const FormField& a, const FormField& b) {
  if (!(a.chart() == b.chart())) throw ChartMismatch("wedge of forms on different charts");
  const int n = a.dimension();
  if (a.p() + b.p() > n || a.q() + b.q() > n) throw DegreeError("wedge degree overflow");
  FormField out(a.chart(), a.p() + b.p(), a.q() + b.q());
  const auto& table = wedge_table(n, a.p(), a.q(), b.p(), b.q());
  const auto& A = a.coeffs();
  const auto& B = b.coeffs();
  auto& C = out.coeffs();
  for (Eigen::Index node = 0; node < C.cols(); ++node)
    for (const WedgeEntry& e : table)
      C(e.out, node) += static_cast<Real>(e.sign) * A(e.left, node) * B(e.right, node);
  return out;
}

namespace {

enum class Direction { Holomorphic, Antiholomorphic };

FormField exterior_derivative(const FormField& a, Direction dir) {
  const Chart& chart = a.chart();
  const int n = chart.dimension();
  const int p = a.p(), q = a.q();
  const bool holo = dir == Direction::Holomorphic;
  if ((holo && p + 1 > n) || (!holo && q + 1 > n)) throw DegreeError("exterior derivative degree overflow");
  FormField out(chart, holo ? p + 1 : p, holo ? q : q + 1);
  const FormAlgebra& alg = form_algebra(n);
  const auto& src = a.coeffs();
  for (IndexMask I : alg.subsets(p)) {
    for (IndexMask J : alg.subsets(q)) {
      const int c = alg.component(p, q, I, J);
      auto get = [&](std::size_t node) { return src(c, static_cast<Eigen::Index>(node)); };
      for (int k = 0; k < n; ++k) {
        const IndexMask bit = IndexMask{1} << k;
        if (holo ? (I & bit) : (J & bit)) continue;
        // dz_k ^ dz_I dzb_J  or  dzb_k ^ dz_I dzb_J = (-1)^{|I|} dz_I dzb_k dzb_J
        const int sign = holo ? merge_sign(bit, I) : (((p % 2) == 0) ? 1 : -1) * merge_sign(bit, J);
        const int target = holo ? alg.component(p + 1, q, I | bit, J) : alg.component(p, q + 1, I, J | bit);
        for (std::size_t node = 0; node < chart.node_count(); ++node) {
          const Complex dx = fd::first(chart, node, 2 * k, get);
          const Complex dy = fd::first(chart, node, 2 * k + 1, get);
          const Complex deriv = holo ? 0.5 * (dx - kI * dy) : 0.5 * (dx + kI * dy);
          out.coeffs()(target, static_cast<Eigen::Index>(node)) += static_cast<Real>(sign) * deriv;
        }
      }
    }
  }
  return out;
}

}  // namespace

FormField del(const FormField& a) { return exterior_derivative(a, Direction::Holomorphic); }
FormField dbar(const FormField& a) { return exterior_derivative(a, Direction::Antiholomorphic); }

Complex integrate(const FormField& a, const Region& region, QuadratureRule rule) {
  const int n = a.dimension();
  if (a.p() != n || a.q() != n) throw DegreeError("integrate needs a top-degree (n,n) form");
  const std::vector<Real> w = region.weights(a.chart(), rule);
  const auto& coeffs = a.coeffs();
  const Complex sum = pairwise_sum_indexed<Complex>(
      w.size(), [&](std::size_t node) { return w[node] * coeffs(0, static_cast<Eigen::Index>(node)); });
  return top_form_volume_factor(n) * sum;
}

// ---------------------------------------------------------------------------

namespace fd {

Stencil first_stencil(int i, int points) {
  Stencil s;
  s.size = 5;
  auto set = [&s](std::array<int, 5> off, std::array<Real, 5> w) {
    for (std::size_t k = 0; k < 5; ++k) {
      s.offset[k] = off[k];
      s.weight[k] = w[k] / 12.0;
    }
  };
  if (i >= 2 && i <= points - 3) {
    set({-2, -1, 0, 1, 2}, {1, -8, 0, 8, -1});
  } else if (i == 0) {
    set({0, 1, 2, 3, 4}, {-25, 48, -36, 16, -3});
  } else if (i == 1) {
    set({-1, 0, 1, 2, 3}, {-3, -10, 18, -6, 1});
  } else if (i == points - 1) {
    set({0, -1, -2, -3, -4}, {25, -48, 36, -16, 3});
  } else {
    set({1, 0, -1, -2, -3}, {3, 10, -18, 6, -1});
  }
  return s;
}

Stencil second_stencil(int i, int points) {
  Stencil s;
  if (i >= 2 && i <= points - 3) {
    s.size = 5;
    const std::array<int, 5> off{-2, -1, 0, 1, 2};
    const std::array<Real, 5> w{-1, 16, -30, 16, -1};
    for (std::size_t k = 0; k < 5; ++k) {
      s.offset[k] = off[k];
      s.weight[k] = w[k] / 12.0;
    }
    return s;
  }
  s.size = 6;
  const bool at_end = i >= points - 2;
  const int base = at_end ? points - 1 - i : i;  // 0 or 1 layers in
  const std::array<Real, 6> w0{45, -154, 214, -156, 61, -10};
  const std::array<Real, 6> w1{10, -15, -4, 14, -6, 1};
  const auto& w = base == 0 ? w0 : w1;
  for (std::size_t k = 0; k < 6; ++k) {
    const int off = static_cast<int>(k) - base;
    s.offset[k] = at_end ? -off : off;
    s.weight[k] = w[k] / 12.0;
  }
  return s;
}

}  // namespace fd

// ---------------------------------------------------------------------------

template <class Scalar>
BasicScalarField<Scalar>::BasicScalarField(Chart chart, Values values)
    : chart_(std::move(chart)), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.size()) != chart_.node_count())
    throw ChartMismatch("scalar field size does not match chart");
}

template <class Scalar>
BasicScalarField<Scalar> BasicScalarField<Scalar>::sample(const Chart& chart,
                                                          const std::function<Scalar(const Point&)>& f,
                                                          JetFunction jet) {
  Values v(static_cast<Eigen::Index>(chart.node_count()));
  for (std::size_t node = 0; node < chart.node_count(); ++node)
    v(static_cast<Eigen::Index>(node)) = f(chart.point(node));
  BasicScalarField out(chart, std::move(v));
  out.jet_ = std::move(jet);
  return out;
}

template <class Scalar>
BasicScalarField<Scalar> BasicScalarField<Scalar>::from_jet(const Chart& chart, JetFunction jet) {
  auto f = [&jet](const Point& z) -> Scalar {
    if constexpr (std::is_same_v<Scalar, Real>) {
      return jet(z).value.real();
    } else {
      return jet(z).value;
    }
  };
  return sample(chart, f, jet);
}

template <class Scalar>
void BasicScalarField<Scalar>::flag_singular(std::size_t node) {
  if (singular_.empty()) singular_.assign(chart_.node_count(), 0);
  singular_.at(node) = 1;
}

template class BasicScalarField<Real>;
template class BasicScalarField<Complex>;

namespace {

template <class Scalar>
void check_stencil_clear(const BasicScalarField<Scalar>& u, std::size_t node) {
  if (u.singular().empty()) return;
  const Chart& chart = u.chart();
  // The stencils reach at most 5 cells along each axis and mix two axes.
  for (int ax = 0; ax < chart.real_axes(); ++ax) {
    const int i = chart.index_along(node, ax);
    for (int d = -5; d <= 5; ++d) {
      const int j = i + d;
      if (j < 0 || j >= chart.axis_points(ax)) continue;
      const auto other = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) +
                                                  d * static_cast<std::ptrdiff_t>(chart.stride(ax)));
      if (u.is_singular(other))
        throw SingularStencil("finite-difference stencil touches a singular node; supply an analytic jet");
    }
  }
  if (u.is_singular(node)) throw SingularStencil("finite difference at a singular node");
}

}  // namespace

template <class Scalar>
FormField ddc(const BasicScalarField<Scalar>& u) {
  const Chart& chart = u.chart();
  const int n = chart.dimension();
  FormField out(chart, 1, 1);
  const Complex factor = kI / (2.0 * kPi);
  auto get = [&u](std::size_t node) { return Complex(u[node]); };
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    ScalarJet j;
    if (u.jet()) {
      j = u.jet()(chart.point(node));
    } else {
      check_stencil_clear(u, node);
      j = fd::jet(chart, node, get);
    }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        Complex h = j.hess(a, b);
        // Real potentials: symmetrise so the coefficient matrix is exactly hermitian.
        if constexpr (std::is_same_v<Scalar, Real>) h = 0.5 * (h + std::conj(j.hess(b, a)));
        out.coeffs()(a * n + b, static_cast<Eigen::Index>(node)) = factor * h;
      }
  }
  return out;
}

template FormField ddc(const BasicScalarField<Real>&);
template FormField ddc(const BasicScalarField<Complex>&);

template <class Scalar>
FormField as_form(const BasicScalarField<Scalar>& u) {
  FormField f(u.chart(), 0, 0);
  for (std::size_t node = 0; node < u.chart().node_count(); ++node)
    f.coeffs()(0, static_cast<Eigen::Index>(node)) = Complex(u[node]);
  return f;
}

template FormField as_form(const BasicScalarField<Real>&);
template FormField as_form(const BasicScalarField<Complex>&);

ScalarField coordinate_projection_pullback(const ScalarField& g, const std::vector<int>& axes,
                                           const Chart& chart) {
  for (int a : axes)
    if (a < 0 || a >= chart.dimension()) throw std::out_of_range("pullback axis out of range");
  const Chart factor = chart.sub_chart(axes);
  if (!(g.chart() == factor)) throw ChartMismatch("pullback source chart is not the factor chart");
  ScalarField::Values v(static_cast<Eigen::Index>(chart.node_count()));
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    std::size_t fnode = 0;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      const int a = axes[k];
      fnode += static_cast<std::size_t>(chart.index_along(node, 2 * a)) * factor.stride(static_cast<int>(2 * k));
      fnode += static_cast<std::size_t>(chart.index_along(node, 2 * a + 1)) * factor.stride(static_cast<int>(2 * k + 1));
    }
    v(static_cast<Eigen::Index>(node)) = g[fnode];
  }
  return ScalarField(chart, std::move(v));
}

ScalarField coordinate_projection_pullback(const std::function<Complex(const Point&)>& g,
                                           const std::vector<int>& axes, const Chart& chart) {
  for (int a : axes)
    if (a < 0 || a >= chart.dimension()) throw std::out_of_range("pullback axis out of range");
  return ScalarField::sample(chart, [&](const Point& z) {
    Point w(static_cast<Eigen::Index>(axes.size()));
    for (std::size_t k = 0; k < axes.size(); ++k) w(static_cast<Eigen::Index>(k)) = z(axes[k]);
    return g(w);
  });
}

}  // namespace chern
