#include "doctest.h"

#include "chern/forms.hpp"

#include <cmath>
#include <random>

using namespace chern;

namespace {

IndexMask bit(int a) { return IndexMask{1} << a; }

// Smooth complex test function on C^2.
Complex smooth(const Point& z) {
  return std::exp(0.3 * z(0) - 0.2 * std::conj(z(1))) * std::cos(z(1) + 0.5 * std::conj(z(0)));
}

FormField sampled_scalar(const Chart& chart, const std::function<Complex(const Point&)>& f) {
  return as_form(ScalarField::sample(chart, f));
}

// (1,0)-form f0 dz_0 + f1 dz_1 and similar, from two functions.
FormField one_form(const Chart& chart, bool holomorphic, const std::function<Complex(const Point&)>& f0,
                   const std::function<Complex(const Point&)>& f1) {
  FormField out(chart, holomorphic ? 1 : 0, holomorphic ? 0 : 1);
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    const Point z = chart.point(node);
    if (holomorphic) {
      out.at(bit(0), 0, node) = f0(z);
      out.at(bit(1), 0, node) = f1(z);
    } else {
      out.at(0, bit(0), node) = f0(z);
      out.at(0, bit(1), node) = f1(z);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("stencils are exact on low-degree polynomials") {
  for (int points : {8, 9, 12}) {
    for (int i = 0; i < points; ++i) {
      const auto s1 = fd::first_stencil(i, points);
      const auto s2 = fd::second_stencil(i, points);
      for (int deg = 0; deg <= 4; ++deg) {
        // d/dx x^deg and d2/dx2 x^deg at x = i with unit spacing
        Real d1 = 0, d2 = 0;
        for (int k = 0; k < s1.size; ++k) {
          const int j = i + s1.offset[static_cast<std::size_t>(k)];
          REQUIRE(j >= 0);
          REQUIRE(j < points);
          d1 += s1.weight[static_cast<std::size_t>(k)] * std::pow(Real(j), deg);
        }
        for (int k = 0; k < s2.size; ++k) {
          const int j = i + s2.offset[static_cast<std::size_t>(k)];
          REQUIRE(j >= 0);
          REQUIRE(j < points);
          d2 += s2.weight[static_cast<std::size_t>(k)] * std::pow(Real(j), deg);
        }
        const Real e1 = deg == 0 ? 0 : deg * std::pow(Real(i), deg - 1);
        const Real e2 = deg < 2 ? 0 : deg * (deg - 1) * std::pow(Real(i), deg - 2);
        CHECK(d1 == doctest::Approx(e1).epsilon(1e-11));
        CHECK(d2 == doctest::Approx(e2).epsilon(1e-11));
      }
    }
  }
}

TEST_CASE("point-level wedge products") {
  const int n = 3;
  PointForm dz0(n, 1, 0), dz1(n, 1, 0), dzb0(n, 0, 1);
  dz0.at(bit(0), 0) = 1;
  dz1.at(bit(1), 0) = 1;
  dzb0.at(0, bit(0)) = 1;
  CHECK(wedge(dz0, dz0).c.norm() == 0.0);
  CHECK(wedge(dz0, dz1).at(bit(0) | bit(1), 0) == Complex(1));
  CHECK(wedge(dz1, dz0).at(bit(0) | bit(1), 0) == Complex(-1));
  // dzb_0 ^ dz_0 = -dz_0 ^ dzb_0
  CHECK(wedge(dz0, dzb0).at(bit(0), bit(0)) == Complex(1));
  CHECK(wedge(dzb0, dz0).at(bit(0), bit(0)) == Complex(-1));
  CHECK_THROWS_AS(wedge(wedge(dz0, dz1), wedge(dz0, dz1)).c.size(), DegreeError);

  // Graded commutativity on random forms of several bidegrees.
  std::mt19937 rng(3);
  std::normal_distribution<Real> g;
  auto random_form = [&](int p, int q) {
    PointForm f(n, p, q);
    for (Eigen::Index i = 0; i < f.c.size(); ++i) f.c(i) = Complex(g(rng), g(rng));
    return f;
  };
  for (auto [p1, q1, p2, q2] : {std::array{1, 0, 0, 1}, {1, 1, 1, 1}, {2, 1, 1, 0}, {1, 2, 0, 1}, {0, 2, 1, 1}}) {
    const PointForm a = random_form(p1, q1), b = random_form(p2, q2);
    const int sign = ((p1 + q1) * (p2 + q2)) % 2 == 0 ? 1 : -1;
    CHECK((wedge(a, b).c - static_cast<Real>(sign) * wedge(b, a).c).norm() < 1e-12);
  }
  // Associativity.
  const PointForm a = random_form(1, 0), b = random_form(0, 1), c = random_form(1, 1);
  CHECK((wedge(wedge(a, b), c).c - wedge(a, wedge(b, c)).c).norm() < 1e-12);

  // (i/2) dz ^ dzbar is the volume form in each axis.
  CHECK(std::abs(top_form_volume_factor(1) - Complex(0, -2)) < 1e-15);
  CHECK(std::abs(top_form_volume_factor(2) - Complex(4, 0)) < 1e-15);
}

TEST_CASE("ddc of polynomial potentials") {
  const Chart chart = Chart::cube(2, 1.0, 12);
  const RealField norm2 = RealField::sample(chart, [](const Point& z) { return z.squaredNorm(); });
  const FormField w = ddc(norm2);
  const Complex expected = kI / (2 * kPi);
  Real err = 0;
  for (std::size_t node = 0; node < chart.node_count(); ++node)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        err = std::max(err, std::abs(w.at(bit(a), bit(b), node) - (a == b ? expected : Complex(0))));
  CHECK(err < 1e-10);

  const Chart disc = Chart::cube(1, 1.0, 64);
  const RealField pluriharmonic = RealField::sample(disc, [](const Point& z) { return std::pow(z(0), 3).real(); });
  CHECK(ddc(pluriharmonic).max_abs() < 1e-8);
}

TEST_CASE("ddc is hermitian for real potentials") {
  const Chart chart = Chart::cube(2, 0.8, 10);
  const RealField u = RealField::sample(chart, [](const Point& z) {
    return std::log(1.0 + z.squaredNorm()) + (z(0) * std::conj(z(1))).real() + std::pow(std::abs(z(1)), 4);
  });
  const FormField w = ddc(u);
  Real asym = 0;
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    // (i/2pi) h: h hermitian means c(b,a) = -conj(c(a,b)) for c = (i/2pi) h.
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        asym = std::max(asym, std::abs(w.at(bit(b), bit(a), node) + std::conj(w.at(bit(a), bit(b), node))));
  }
  CHECK(asym < 1e-14);
}

TEST_CASE("disc integrals of ddc") {
  const Chart chart = Chart::cube(1, 1.5, 256);
  Point origin(1);
  origin(0) = 0;

  const RealField norm2 = RealField::sample(chart, [](const Point& z) { return z.squaredNorm(); });
  const Complex unit = integrate(ddc(norm2), Region::ball(origin, 1.0));
  CHECK(std::abs(unit - Complex(1)) < 1e-3);
  CHECK(std::abs(unit.imag()) < 1e-14);

  // Fubini-Study: mass rho^2/(1+rho^2) on the disc of radius rho.
  const RealField fs = RealField::sample(chart, [](const Point& z) { return std::log(1.0 + z.squaredNorm()); });
  const Real rho = 1.2;
  CHECK(std::abs(integrate(ddc(fs), Region::ball(origin, rho)) - rho * rho / (1 + rho * rho)) < 1e-4);

  // Regularised log|z|^2: rho^2/(rho^2+eps^2).
  for (Real eps : {0.2, 0.1}) {
    const RealField u =
        RealField::sample(chart, [eps](const Point& z) { return std::log(z.squaredNorm() + eps * eps); });
    const Real r = 0.8;
    CHECK(std::abs(integrate(ddc(u), Region::ball(origin, r)) - r * r / (r * r + eps * eps)) < 1e-4);
  }

  CHECK_THROWS_AS(integrate(FormField(chart, 1, 0)), DegreeError);
}

TEST_CASE("Simpson and trapezoid on a box") {
  const Chart chart = Chart::cube(1, 1.0, 33);
  // Integrand of x^2 + y^2 as a top form: coefficient f/(-2i).
  FormField top(chart, 1, 1);
  for (std::size_t node = 0; node < chart.node_count(); ++node)
    top.at(bit(0), bit(0), node) = chart.point(node).squaredNorm() / Complex(0, -2);
  const Complex simpson = integrate(top, Region::whole(), QuadratureRule::Simpson);
  CHECK(std::abs(simpson - Complex(8.0 / 3.0)) < 1e-12);
  const Complex trap = integrate(top);
  CHECK(std::abs(trap - Complex(8.0 / 3.0)) < 1e-2);
}

TEST_CASE("exterior derivative identities") {
  const Chart chart = Chart::cube(2, 0.6, 10);
  const FormField f = sampled_scalar(chart, smooth);
  CHECK(del(del(f)).max_abs() < 1e-10);
  CHECK(dbar(dbar(f)).max_abs() < 1e-10);
  CHECK((del(dbar(f)) + dbar(del(f))).max_abs() < 1e-10);

  const FormField alpha = one_form(chart, true, smooth, [](const Point& z) { return std::sin(z(0) * std::conj(z(1))); });
  CHECK(dbar(dbar(alpha)).max_abs() < 1e-9);
  CHECK_THROWS_AS(del(del(alpha)), DegreeError);
  CHECK((del(dbar(alpha)) + dbar(del(alpha))).max_abs() < 1e-9);

  // Leibniz on polynomials of degree <= 4 per real axis, where the stencils are exact.
  const auto g = [](const Point& z) { return z(0) * std::conj(z(1)); };
  const auto h = [](const Point& z) { return z(1) * z(1) + std::conj(z(0)); };
  const FormField G = sampled_scalar(chart, g), H = sampled_scalar(chart, h);
  const FormField GH = sampled_scalar(chart, [&](const Point& z) { return g(z) * h(z); });
  CHECK((del(GH) - (wedge(del(G), H) + wedge(G, del(H)))).max_abs() < 1e-10);
  CHECK((dbar(GH) - (wedge(dbar(G), H) + wedge(G, dbar(H)))).max_abs() < 1e-10);
  // d(beta ^ gamma) = dbeta ^ gamma + (-1)^{deg beta} beta ^ dgamma
  const FormField beta = one_form(chart, false, g, h);
  CHECK((dbar(wedge(beta, H)) - (wedge(dbar(beta), H) - wedge(beta, dbar(H)))).max_abs() < 1e-10);
  // ddc u agrees with (i/2pi) del dbar u.
  const Chart fine = Chart::cube(2, 0.6, 20);
  const RealField u = RealField::sample(fine, [](const Point& z) { return std::log(1.0 + z.squaredNorm()); });
  CHECK((ddc(u) - (kI / (2 * kPi)) * del(dbar(as_form(u)))).max_abs() < 5e-4);

  const FormField top = wedge(del(wedge(del(f), f)), FormField(chart, 0, 0));
  CHECK(top.p() == 2);
  CHECK_THROWS_AS(del(top), DegreeError);
}

TEST_CASE("analytic jets and singular nodes") {
  const Chart chart = Chart::cube(1, 1.0, 9);
  RealField u = RealField::sample(chart, [](const Point& z) {
    const Real r2 = z.squaredNorm();
    return r2 > 0 ? std::log(r2) : 0.0;
  });
  const std::size_t centre = chart.node_count() / 2;
  REQUIRE(std::abs(chart.point(centre)(0)) < 1e-15);
  u.flag_singular(centre);
  CHECK_THROWS_AS(ddc(u), SingularStencil);

  // With an analytic jet the (smooth) potential |z|^2 needs no differences.
  RealField v = RealField::from_jet(chart, [](const Point& z) {
    ScalarJet j;
    j.value = z.squaredNorm();
    j.d[0] = std::conj(z(0));
    j.dbar[0] = z(0);
    j.hess(0, 0) = 1;
    return j;
  });
  v.flag_singular(centre);
  CHECK(std::abs(ddc(v).at(bit(0), bit(0), centre) - kI / (2 * kPi)) < 1e-15);
}

TEST_CASE("coordinate projection pullback") {
  const Chart chart = Chart::cube(2, 1.0, 10);
  const Chart factor = chart.sub_chart({1});
  const ScalarField g = ScalarField::sample(factor, [](const Point& w) { return Complex(std::norm(w(0))); });
  const ScalarField pulled = coordinate_projection_pullback(g, {1}, chart);
  const ScalarField direct = coordinate_projection_pullback([](const Point& w) { return Complex(std::norm(w(0))); },
                                                            {1}, chart);
  Real diff = 0;
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    diff = std::max(diff, std::abs(pulled[node] - direct[node]));
    diff = std::max(diff, std::abs(pulled[node] - std::norm(chart.point(node)(1))));
  }
  CHECK(diff < 1e-15);

  const FormField w = ddc(pulled);
  Real off = 0;
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    off = std::max({off, std::abs(w.at(bit(0), bit(0), node)), std::abs(w.at(bit(0), bit(1), node))});
    off = std::max(off, std::abs(w.at(bit(1), bit(1), node) - kI / (2 * kPi)));
  }
  CHECK(off < 1e-10);
  CHECK_THROWS_AS(coordinate_projection_pullback(g, {0}, Chart::cube(2, 2.0, 10)), ChartMismatch);
}
