#include "doctest.h"

#include "chern/poly.hpp"

#include <cmath>
#include <random>

using namespace chern;

namespace {

Point pt(Complex a, Complex b) {
  Point z(2);
  z << a, b;
  return z;
}

}  // namespace

TEST_CASE("holomorphic polynomial parsing and evaluation") {
  const Point z = pt({0.3, -0.2}, {-0.7, 0.4});
  const HoloPoly p = HoloPoly::parse(2, "2*z1*z2^2 - 0.5i*z2 + 3");
  CHECK(std::abs(p(z) - (2.0 * z(0) * z(1) * z(1) - Complex(0, 0.5) * z(1) + 3.0)) < 1e-14);
  CHECK(p.degree() == 3);
  const HoloPoly dp = p.derivative(1);
  CHECK(std::abs(dp(z) - (4.0 * z(0) * z(1) - Complex(0, 0.5))) < 1e-14);
  CHECK(HoloPoly::parse(2, "z1 - z1").is_zero());
  CHECK_THROWS_AS(HoloPoly::parse(2, "z3"), std::invalid_argument);
  CHECK_THROWS_AS(HoloPoly::parse(2, "2**z1"), std::invalid_argument);
  CHECK_THROWS_AS(HoloPoly::parse(2, ""), std::invalid_argument);
}

TEST_CASE("bi-polynomial derivatives") {
  // f = z1^2 zbar1 zbar2
  BiPoly f(2);
  f.add_term({2, 0}, {1, 1}, 1.0);
  const Point z = pt({0.4, 0.1}, {-0.3, 0.6});
  CHECK(std::abs(f.d(0)(z) - 2.0 * z(0) * std::conj(z(0)) * std::conj(z(1))) < 1e-14);
  CHECK(std::abs(f.dbar(1)(z) - z(0) * z(0) * std::conj(z(0))) < 1e-14);
  CHECK(f.d(1).terms().empty());
  CHECK(f.degree() == 4);
}

TEST_CASE("gram matrix of a section matrix") {
  const SectionMatrix s = SectionMatrix::parse(2, {{"z1", "0"}, {"z2", "1"}, {"0", "z1"}});
  const auto g = s.gram();
  std::mt19937_64 rng(3);
  std::normal_distribution<Real> nd;
  for (int t = 0; t < 5; ++t) {
    const Point z = pt({nd(rng), nd(rng)}, {nd(rng), nd(rng)});
    const Eigen::MatrixXcd S = s.evaluate(z);
    const Eigen::MatrixXcd G = S.adjoint() * S;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(std::abs(g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](z) - G(i, j)) < 1e-13);
  }
}

TEST_CASE("radial convolution of monomials") {
  // On C: E|z+y|^2 = |z|^2 + m1 and E|z+y|^4 = |z|^4 + 4 m1 |z|^2 + m2.
  const std::vector<Real> m{1.0, 0.3, 0.25};
  BiPoly q(1), q2(1);
  q.add_term({1}, {1}, 1.0);
  q2.add_term({2}, {2}, 1.0);
  Point z(1);
  z << Complex(0.6, -0.8);
  const Real r2 = std::norm(z(0));
  CHECK(std::abs(q.convolve_radial(m)(z) - (r2 + 0.3)) < 1e-14);
  CHECK(std::abs(q2.convolve_radial(m)(z) - (r2 * r2 + 4 * 0.3 * r2 + 0.25)) < 1e-14);

  // On C^2 the second moment splits evenly: |z1|^2 -> |z1|^2 + m1/2,
  // z1 zbar2 is unchanged.
  BiPoly a(2), b(2);
  a.add_term({1, 0}, {1, 0}, 1.0);
  b.add_term({1, 0}, {0, 1}, 1.0);
  const Point w = pt({0.2, 0.5}, {-0.1, 0.3});
  CHECK(std::abs(a.convolve_radial(m)(w) - (std::norm(w(0)) + 0.15)) < 1e-14);
  CHECK(std::abs(b.convolve_radial(m)(w) - w(0) * std::conj(w(1))) < 1e-14);
  CHECK_THROWS_AS(q2.convolve_radial({1.0, 0.3}), std::invalid_argument);
}

TEST_CASE("radial convolution against Monte Carlo") {
  // Uniform law on the unit ball of C^2: E|y|^{2j} = 2/(j+2).
  BiPoly f(2);
  f.add_term({2, 1}, {1, 1}, Complex(0.5, 0.2));
  f.add_term({0, 2}, {0, 2}, 1.0);
  const std::vector<Real> m{1.0, 2.0 / 3, 2.0 / 4, 2.0 / 5, 2.0 / 6};
  const Point z = pt({0.3, 0.1}, {-0.4, 0.2});
  std::mt19937_64 rng(11);
  std::normal_distribution<Real> nd;
  std::uniform_real_distribution<Real> ud;
  const int samples = 400000;
  Complex acc = 0;
  for (int s = 0; s < samples; ++s) {
    Eigen::Vector4d g(nd(rng), nd(rng), nd(rng), nd(rng));
    g *= std::pow(ud(rng), 0.25) / g.norm();
    acc += f(pt(z(0) + Complex(g(0), g(1)), z(1) + Complex(g(2), g(3))));
  }
  acc /= samples;
  CHECK(std::abs(f.convolve_radial(m)(z) - acc) < 5e-3);
}
