#include "doctest.h"

#include "chern/projbundle.hpp"

#include <cmath>
#include <random>

using namespace chern;

namespace {

IndexMask bit(int a) { return IndexMask{1} << a; }

Real max_diff(const FormField& a, const FormField& b, const Region& region = Region::whole()) {
  return (a - b).max_abs(region);
}

PointForm random_form(int n, int p, int q, std::mt19937_64& rng) {
  std::normal_distribution<Real> nd;
  PointForm f(n, p, q);
  for (Eigen::Index i = 0; i < f.c.size(); ++i) f.c(i) = Complex(nd(rng), nd(rng));
  return f;
}

// Segre forms predicted from Chern forms through the class algebra.
std::vector<FormField> segre_from_chern(const MetricField& h, int up_to) {
  const CharClassAlgebra alg(4);
  const int cmax = std::min(h.rank(), h.dimension());
  const auto c = chern_forms(h, cmax);
  std::vector<FormField> out;
  out.push_back(FormField::constant(h.chart(), 1.0));
  for (int k = 1; k <= up_to; ++k)
    out.push_back(evaluate_class(alg.segre_to_chern(k), h.chart(), [&](const Variable& v) {
      if (v.index > cmax) return FormField(h.chart(), v.index, v.index);
      return c[static_cast<std::size_t>(v.index)];
    }));
  return out;
}

Real relative_error(const FormField& a, const FormField& b, const Region& region) {
  return (a - b).max_abs(region) / std::max<Real>(1e-12, b.max_abs(region));
}

}  // namespace

TEST_CASE("Gauss-Legendre rule") {
  for (int n : {1, 4, 7, 12}) {
    const auto [x, w] = gauss_legendre(n);
    REQUIRE(x.size() == static_cast<std::size_t>(n));
    for (int deg = 0; deg <= 2 * n - 1; ++deg) {
      Real s = 0;
      for (int i = 0; i < n; ++i) s += w[static_cast<std::size_t>(i)] * std::pow(x[static_cast<std::size_t>(i)], deg);
      const Real exact = deg % 2 == 1 ? 0.0 : 2.0 / (deg + 1);
      CHECK(std::abs(s - exact) < 1e-13);
    }
  }
}

TEST_CASE("fiber atlas calibration") {
  for (int r = 1; r <= 4; ++r) {
    const FiberAtlas a = FiberAtlas::build(r);
    const auto& c = a.calibration();
    CHECK(c.pass);
    CHECK(c.mass_error <= c.tolerance);
    if (r <= 2) {
      CHECK(c.mass_error < 1e-12);
      CHECK(c.moment_error < 1e-12);
      CHECK(c.worst_chart_error < 1e-12);
    }
    if (r == 3) {
      CHECK(c.mass_error < 1e-9);
      CHECK(c.moment_error < 1e-9);
    }
    for (const auto& p : a.nodes()) CHECK(std::abs(p.homogeneous(p.chart) - 1.0) == 0.0);
  }
  CHECK(FiberAtlas::build(4).calibration().rule == "monte-carlo");
  FiberQuadratureOptions mc;
  mc.rule = FiberRule::MonteCarlo;
  mc.samples = 50000;
  const auto c2 = FiberAtlas::build(2, mc).calibration();
  CHECK(c2.pass);
  CHECK(c2.moment_error < 1e-2);
  // An under-resolved product rule fails its calibration and is refused.
  FiberQuadratureOptions coarse;
  coarse.radial = 1;
  coarse.angular = 1;
  const FiberAtlas bad = FiberAtlas::build(2, coarse);
  CHECK_FALSE(bad.calibration().pass);
  const Chart chart = Chart::cube(1, 0.5, 8);
  CHECK_THROWS_AS(fiber_pushforward(TotalSpaceForm::fiber_volume(chart, bad)), std::runtime_error);
}

TEST_CASE("induced potential") {
  const Chart chart = Chart::cube(2, 0.9, 9);
  const FiberAtlas a2 = FiberAtlas::build(2);
  {
    const InducedPhi phi = induced_phi(flat_metric(chart, 2), a2);
    for (std::size_t j = 0; j < a2.size(); j += 7)
      CHECK(std::abs(phi.value(3, j) - std::log(1 + std::norm(a2.nodes()[j].homogeneous(1)))) < 1e-14);
  }
  {
    const MetricField d = diag_exp_metric(chart, {{1.0, 0.5}});
    const InducedPhi phi = induced_phi(d, FiberAtlas::build(1));
    for (std::size_t k = 0; k < chart.node_count(); k += 11)
      CHECK(std::abs(phi.value(k, 0) - std::log(d.matrix(k)(0, 0).real())) < 1e-14);
  }
  {
    Degeneracy v{{HoloPoly::parse(2, "z1"), HoloPoly::parse(2, "z2")}, 2};
    const auto pair = from_sections(chart, SectionMatrix::parse(2, {{"z1", "0"}, {"z2", "0"}, {"0", "z1"}, {"0", "z2"}}), v);
    const InducedPhi phi = induced_phi(pair.hstar, a2);
    for (std::size_t k = 0; k < chart.node_count(); k += 13)
      for (std::size_t j = 0; j < a2.size(); j += 17) {
        const Real n2 = chart.point(k).squaredNorm();
        if (n2 == 0) {
          CHECK(phi.is_flagged(k, j));
          continue;
        }
        CHECK(std::abs(phi.value(k, j) - (std::log(n2) + std::log(1 + std::norm(a2.nodes()[j].homogeneous(1))))) < 1e-13);
      }
  }
  CHECK_THROWS_AS(induced_phi_at(Mat::Identity(2, 2), FiberVector::Zero(2)), std::invalid_argument);
}

TEST_CASE("analytic and finite-difference Hessians of phi agree") {
  const Chart chart = Chart::cube(2, 0.6, 21);
  const auto pair = from_sections(chart, SectionMatrix::parse(2, {{"1", "0"}, {"0", "1"}, {"z1", "z2"}}));
  const FiberAtlas atlas = FiberAtlas::build(2, {FiberRule::Product, 3, 4});
  const InducedPhi phi = induced_phi(pair.hstar, atlas);
  for (std::size_t k = 0; k < chart.node_count(); k += 1231) {
    if (chart.boundary_layer(k) < 2) continue;
    for (std::size_t j = 0; j < atlas.size(); ++j) {
      const TotalMatrix a = phi.hessian(k, j, DerivativeMode::Analytic);
      const TotalMatrix f = phi.hessian(k, j, DerivativeMode::FiniteDifference);
      CHECK((a - f).norm() < 1e-4);
      CHECK((a - a.adjoint()).norm() < 1e-14);
    }
  }
}

TEST_CASE("fiber push-forward") {
  std::mt19937_64 rng(17);
  for (int r : {2, 3}) {
    const Chart chart = Chart::cube(1, 0.5, 8);
    const FiberAtlas atlas = FiberAtlas::build(r, {FiberRule::Product, 4, 6, 0, 1, 1e-3});
    const int f = r - 1;
    // pi^* gamma ^ (normalized fiber volume) pushes forward to gamma.
    FormField gamma(chart, 1, 1);
    for (std::size_t k = 0; k < chart.node_count(); ++k) gamma.at(bit(0), bit(0), k) = Complex(std::sin(k * 0.1), 0.3);
    const FormField back = fiber_pushforward(wedge(TotalSpaceForm::pullback(gamma, atlas),
                                                   TotalSpaceForm::fiber_volume(chart, atlas)));
    CHECK(max_diff(back, gamma) <= atlas.calibration().mass_error * gamma.max_abs() + 1e-13);
    // Too little fiber degree: nothing to integrate.
    if (f == 1) {
      const FormField zero = fiber_pushforward(TotalSpaceForm::pullback(gamma, atlas));
      CHECK(zero.p() == 0);
      CHECK(zero.max_abs() == 0.0);
    }
    CHECK_THROWS_AS(fiber_pushforward(TotalSpaceForm::pullback(FormField::constant(chart, 1.0), atlas)), DegreeError);
  }
  // Projection formula with random forms, n = 2, r = 2.
  const Chart chart = Chart::cube(2, 0.5, 8);
  const FiberAtlas atlas = FiberAtlas::build(2, {FiberRule::Product, 3, 4});
  for (auto [gp, gq] : {std::pair{1, 0}, {0, 1}, {1, 1}}) {
    FormField gamma(chart, gp, gq);
    for (std::size_t k = 0; k < chart.node_count(); ++k) gamma.set_point_form(k, random_form(2, gp, gq, rng));
    const TotalSpaceForm eta = TotalSpaceForm::sample(
        chart, atlas, 2, 2, [&](std::size_t, const FiberNode&) { return random_form(3, 2, 2, rng); });
    const FormField lhs = wedge(gamma, fiber_pushforward(eta));
    const FormField rhs = fiber_pushforward(wedge(TotalSpaceForm::pullback(gamma, atlas), eta));
    CHECK(max_diff(lhs, rhs) < 1e-6 * std::max<Real>(1.0, lhs.max_abs()));
  }
}

TEST_CASE("Segre forms") {
  const Chart chart = Chart::cube(2, 0.6, 9);
  const Region inner = Region::interior(chart, 2);
  const FiberAtlas a1 = FiberAtlas::build(1), a2 = FiberAtlas::build(2), a3 = FiberAtlas::build(3);

  // s_0 = 1 for a non-trivial metric.
  const MetricField sec = from_sections(chart, SectionMatrix::parse(2, {{"1", "0"}, {"0", "1"}, {"z1", "z2"}})).h;
  CHECK(max_diff(segre_form(sec, 0, a2), FormField::constant(chart, 1.0)) < 1e-4);

  // Line bundle: s_k = (-1)^k (dd^c phi)^k.
  const MetricField line = diag_exp_metric(chart, {{1.0, 0.5}});
  const auto s1 = segre_forms(line, 2, a1);
  const FormField c1 = chern_forms(line, 1)[1];
  CHECK(max_diff(s1[1], Complex(-1.0) * c1) < 1e-14);
  CHECK(max_diff(s1[2], wedge(c1, c1)) < 1e-14);

  // diag(e^{-|z1|^2}, e^{-|z1|^2}) on C^2: s_1 = -c_1.
  const MetricField d = diag_exp_metric(chart, {{1.0, 0.0}, {1.0, 0.0}});
  CHECK(max_diff(segre_form(d, 1, a2), Complex(-1.0) * chern_forms(d, 1)[1]) < 1e-3);

  // Cross-check against the class algebra for smooth catalog metrics.
  const std::vector<MetricField> metrics{
      sec,
      diag_exp_metric(chart, {{1.0, 0.5}, {0.3, 2.0}}),
      direct_sum(fubini_study_metric(chart), diag_exp_metric(chart, {{0.7, 0.2}})),
      direct_sum(sec, fubini_study_metric(chart)),
      diag_exp_metric(chart, {{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}}),
  };
  for (const auto& h : metrics) {
    const FiberAtlas& atlas = h.rank() == 2 ? a2 : a3;
    const auto s = segre_forms(h, 2, atlas);
    const auto expect = segre_from_chern(h, 2);
    for (int k = 0; k <= 2; ++k) {
      CHECK(relative_error(s[static_cast<std::size_t>(k)], expect[static_cast<std::size_t>(k)], inner) < 1e-3);
    }
  }
  CHECK_THROWS_AS(segre_forms(sec, 3, a2), DegreeError);
}

TEST_CASE("push-pull and fiber positivity") {
  const Chart chart = Chart::cube(1, 0.6, 8);
  const MetricField h = from_sections(chart, SectionMatrix::parse(1, {{"1", "z1"}, {"z1^2", "2"}})).h;
  const FiberAtlas atlas = FiberAtlas::build(2);
  // pi_*(pi^* c_1 ^ Phi^{r-1}) = c_1 times the fiber mass.
  const FormField c1 = chern_forms(h, 1)[1];
  const TotalSpaceForm phi = TotalSpaceForm::induced_curvature(h, atlas);
  const FormField pp = fiber_pushforward(wedge(TotalSpaceForm::pullback(c1, atlas), phi));
  CHECK(max_diff(pp, c1) < 1e-6);
  // Same Segre form through the total-space route: s_1 = -pi_*(Phi^2).
  const FormField s1 = Complex(-1.0) * fiber_pushforward(wedge(phi, phi));
  CHECK(max_diff(s1, segre_form(h, 1, atlas)) < 1e-6);

  CHECK(fiber_positivity_margin(h, atlas) > 0);
  CHECK(fiber_positivity_margin(diag_exp_metric(Chart::cube(2, 0.6, 8), {{1.0, 0.5}, {0.3, 2.0}, {0.1, 0.1}}),
                                FiberAtlas::build(3, {FiberRule::Product, 3, 4})) > 0);
}
