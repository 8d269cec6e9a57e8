#include "doctest.h"

#include "chern/currents.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>

using namespace chern;

namespace {

Degeneracy origin(int n) {
  Degeneracy v;
  for (int a = 0; a < n; ++a) v.equations.push_back(HoloPoly::coordinate(n, a));
  v.codim = n;
  return v;
}

Degeneracy axis(int n, int a) {
  Degeneracy v;
  v.equations.push_back(HoloPoly::coordinate(n, a));
  v.codim = 1;
  return v;
}

SectionMatrix l_plus_l() { return SectionMatrix::parse(2, {{"z1", "0"}, {"z2", "0"}, {"0", "z1"}, {"0", "z2"}}); }
SectionMatrix o_plus_l() { return SectionMatrix::parse(2, {{"1", "0"}, {"0", "z1"}, {"0", "z2"}}); }
SectionMatrix radial_line() { return SectionMatrix::parse(2, {{"z1"}, {"z2"}}); }

// int_0^R -chi'(t) prod_i t^2/(t^2 + e_i^2) dt for the radial cut-off chi(t/R).
Real radial_oracle(Real radius, Real inner, std::vector<Real> eps) {
  const CutOff chi{inner};
  auto f = [&](Real t) {
    Real v = -chi.derivative(t / radius) / radius;
    for (Real e : eps) v *= t * t / (t * t + e * e);
    return v;
  };
  return boost::math::quadrature::gauss_kronrod<Real, 61>::integrate(f, inner * radius, radius, 15, 1e-14);
}

}  // namespace

TEST_CASE("cut-off") {
  const CutOff chi{0.5};
  CHECK(chi(0.2) == 1.0);
  CHECK(chi(1.2) == 0.0);
  CHECK(chi(0.75) == doctest::Approx(0.5));
  for (Real s : {0.55, 0.7, 0.9}) {
    const Real h = 1e-6;
    CHECK(chi.derivative(s) == doctest::Approx((chi(s + h) - chi(s - h)) / (2 * h)).epsilon(1e-6));
    CHECK(chi.derivative(s) < 0);
  }
}

TEST_CASE("bump forms") {
  const Chart c1 = Chart::cube(1, 1.0, 16);
  const BumpForm b1 = bump_form(c1, Point::Zero(1), 1, 0.8);
  CHECK(b1.degree() == 0);
  for (std::size_t k = 0; k < c1.node_count(); ++k) CHECK(b1.form().coeffs()(0, static_cast<Eigen::Index>(k)).real() >= 0);
  CHECK(b1.evaluate(Point::Zero(1)).c(0) == Complex(1.0));

  const Chart c2 = Chart::cube(2, 1.0, 10);
  const BumpForm b2 = bump_form(c2, Point::Zero(2), 2, 0.8);
  CHECK(b2.degree() == 0);
  CHECK(b2.evaluate(Point::Zero(2)).c(0).real() > 0);

  const BumpForm b = bump_form(c2, Point::Zero(2), 1, 0.8);
  CHECK(b.degree() == 1);
  CHECK(b.domination() == 1.0);
  CHECK_FALSE(b.rotated());
  const PointForm at0 = b.evaluate(Point::Zero(2));
  CHECK(strong_positivity_margin(at0, 1000) > 0.1);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<Real> u(-0.6, 0.6);
  for (int s = 0; s < 20; ++s) {
    Point z(2);
    z << Complex(u(rng), u(rng)), Complex(u(rng), u(rng));
    CHECK(strong_positivity_margin(b.evaluate(z), 1000) >= -1e-14);
  }
  // C omega <= beta at the center with C = 1.
  PointForm omega = one_one_form(kI * Eigen::MatrixXcd::Identity(2, 2));
  PointForm diff = at0;
  diff.c -= b.domination() * omega.c;
  CHECK(strong_positivity_margin(diff, 1000) >= -1e-12);

  CHECK_THROWS_AS(bump_form(c2, Point::Zero(2), 1, 1.2), std::invalid_argument);
  CHECK_THROWS_AS(bump_form(c2, Point::Zero(2), 3, 0.5), DegreeError);

  // V = {z1 = 0} crosses the region where |z1| <= r' and |z2| ~ R.
  const BumpForm br = bump_form(c2, Point::Zero(2), 1, 0.6, axis(2, 0));
  CHECK(br.rotated());
  CHECK((br.rotation() * br.rotation().adjoint() - Eigen::MatrixXcd::Identity(2, 2)).norm() < 1e-12);
  CHECK(strong_positivity_margin(br.evaluate(Point::Zero(2)), 1000) > 0);
}

TEST_CASE("pairing basics") {
  const Chart c1 = Chart::cube(1, 1.0, 16);
  const BumpForm b = bump_form(c1, Point::Zero(1), 1, 0.8);
  CHECK(pair(FormField(c1, 1, 1), b) == Complex(0.0));
  CHECK_THROWS_AS(pair(FormField(c1, 0, 0), b), DegreeError);
}

TEST_CASE("Poincare-Lelong pairings") {
  const Chart c1 = Chart::cube(1, 1.0, 64);
  const Real radius = 0.9;
  const BumpForm b = bump_form(c1, Point::Zero(1), 1, radius);
  const auto fam = RegularizationFamily::analytic(c1, SectionMatrix::parse(1, {{"z1"}}), origin(1),
                                                  geometric_schedule(0.3, 0.7, 5));
  for (Real e : fam.schedule()) {
    const RealField u = RealField::from_jet(c1, [e](const Point& z) {
      ScalarJet j;
      const Real r2 = std::norm(z(0));
      j.value = std::log(r2 + e * e);
      j.d[0] = std::conj(z(0)) / (r2 + e * e);
      j.dbar[0] = z(0) / (r2 + e * e);
      j.hess(0, 0) = e * e / std::pow(r2 + e * e, 2);
      return j;
    });
    CHECK(std::abs(pair(ddc(u), b) - radial_oracle(radius, 0.5, {e})) < 1e-4);
  }
  const auto rep = chern_current(1, fam, b);
  CHECK(rep.converged());
  CHECK(std::abs(rep.limit - 1.0) < 1e-3);
  for (std::size_t j = 0; j < rep.eps.size(); ++j)
    CHECK(std::abs(rep.pairings[j] - radial_oracle(radius, 0.5, {rep.eps[j]})) < 1e-4);

  const auto s1 = iterated_segre_limit({1}, fam, b);
  CHECK(std::abs(s1.limit + 1.0) < 1e-3);
  CHECK(s1.converged());
}

TEST_CASE("smooth metrics give constant sequences") {
  const Chart c1 = Chart::cube(1, 1.0, 32);
  const MetricField fs = fubini_study_metric(c1);
  const auto fam = RegularizationFamily::custom(fs, [fs](Real) { return fs; }, {0.3, 0.2, 0.1},
                                                ConvergenceClaim::Both, "constant");
  const BumpForm b = bump_form(c1, Point::Zero(1), 1, 0.9);
  const Complex direct = pair(chern_forms(fs, 1)[1], b);
  CurrentProductSpec spec{{{0, 1}}};
  const auto rep = simultaneous_limit(spec, {fam}, b);
  CHECK(rep.converged());
  for (Complex p : rep.pairings) CHECK(std::abs(p - direct) < 1e-13);
  const auto it = iterated_segre_limit({1}, fam, b);
  CHECK(std::abs(it.limit + direct) < 1e-10);
  CHECK(it.converged());
}

TEST_CASE("c2 of L+L: simultaneous, iterated and across kernels") {
  const Chart c2 = Chart::cube(2, 1.0, 24);
  const Real radius = 0.9;
  const BumpForm b = bump_form(c2, Point::Zero(2), 2, radius);
  const auto sched = geometric_schedule(0.5, 0.75, 5);
  const Real oracle = radial_oracle(radius, 0.5, {});
  const auto fam = RegularizationFamily::analytic(c2, l_plus_l(), origin(2), sched);
  const CurrentProductSpec spec{{{0, 2}}};
  const auto sim = simultaneous_limit(spec, {fam}, b);
  for (std::size_t j = 0; j < sched.size(); ++j)
    CHECK(std::abs(sim.pairings[j] - radial_oracle(radius, 0.5, {sched[j], sched[j]})) < 2e-3);
  CHECK(std::abs(sim.limit - oracle) < 2e-2);

  const auto it = chern_current(2, fam, b);
  CHECK(std::abs(it.limit - oracle) < 2e-2);
  CHECK(std::abs(it.limit - sim.limit) < 1e-2);
  CHECK_FALSE(it.levels.empty());

  const MetricField h = from_sections(c2, l_plus_l(), origin(2)).h;
  const auto bump_fam = RegularizationFamily::mollified(h, Mollifier::bump(), matched_schedule(Mollifier::bump(), 2, sched));
  const auto gauss_fam = RegularizationFamily::mollified(
      h, Mollifier::truncated_gaussian(), matched_schedule(Mollifier::truncated_gaussian(), 2, sched));
  const auto a = simultaneous_limit(spec, {bump_fam}, b);
  const auto g = simultaneous_limit(spec, {gauss_fam}, b);
  CHECK(std::abs(a.limit - oracle) < 2e-2);
  CHECK(std::abs(g.limit - oracle) < 2e-2);
  CHECK(std::abs(a.limit - g.limit) < 1e-3);
  CHECK(std::abs(a.limit - sim.limit) < 1e-3);
}

TEST_CASE("Monge-Ampere of log(|z|^2 + eps^2) as an iterated limit") {
  const Chart c2 = Chart::cube(2, 1.0, 24);
  const Real radius = 0.9;
  const BumpForm b = bump_form(c2, Point::Zero(2), 2, radius);
  const auto fam = RegularizationFamily::analytic(c2, radial_line(), origin(2), geometric_schedule(0.5, 0.75, 5));
  const auto rep = iterated_segre_limit({1, 1}, fam, b);
  CHECK(std::abs(rep.limit - radial_oracle(radius, 0.5, {})) < 2e-2);
  // level 0 runs once per outer point
  int inner = 0;
  for (const auto& l : rep.levels) inner += l.level == 0;
  CHECK(inner == static_cast<int>(rep.eps.size()));
  CHECK(rep.to_json()["levels"].size() == rep.levels.size());
}

TEST_CASE("c2 of O+L vanishes") {
  const Chart c2 = Chart::cube(2, 1.0, 24);
  const BumpForm b = bump_form(c2, Point::Zero(2), 2, 0.9);
  const auto fam = RegularizationFamily::analytic(c2, o_plus_l(), origin(2), geometric_schedule(0.5, 0.75, 5));
  const auto rep = chern_current(2, fam, b);
  CHECK(std::abs(rep.limit) < 2e-2);
  const auto sim = simultaneous_limit({{{0, 2}}}, {fam}, b);
  CHECK(std::abs(sim.limit) < 2e-2);
}

TEST_CASE("Chern character currents") {
  const Chart c2 = Chart::cube(2, 1.0, 24);
  const BumpForm b2 = bump_form(c2, Point::Zero(2), 2, 0.9);
  const auto fam = RegularizationFamily::analytic(c2, l_plus_l(), origin(2), geometric_schedule(0.5, 0.75, 5));
  const auto ch0 = chern_character_current(0, fam, bump_form(c2, Point::Zero(2), 0, 0.9));
  CHECK(std::abs(ch0.limit - 2.0 * pair(FormField::constant(c2, 1.0), bump_form(c2, Point::Zero(2), 0, 0.9))) <
        1e-12);

  const BumpForm b1 = bump_form(c2, Point::Zero(2), 1, 0.9);
  const auto ch1 = chern_character_current(1, fam, b1);
  const auto c1 = chern_current(1, fam, b1);
  CHECK(std::abs(ch1.limit - c1.limit) < 1e-12);

  // ch_2 against the direct trace form of the regularized metrics.
  const auto ch2 = chern_character_current(2, fam, b2);
  std::vector<Complex> direct;
  for (Real e : fam.schedule())
    direct.push_back(pair(chern_character_forms(fam.at(e), 2)[2], b2));
  const auto ex = richardson(fam.schedule(), direct);
  CHECK(std::abs(ch2.limit - ex.limit) < 2e-2);
  // c1^2 - 2 c2 over 2 with c1 = 2 [mass], c2 = [mass]
  CHECK(std::abs(ch2.limit - radial_oracle(0.9, 0.5, {})) < 2e-2);
}

TEST_CASE("closedness against exact test forms") {
  const Chart c2 = Chart::cube(2, 1.0, 24);
  const auto fam = RegularizationFamily::analytic(c2, l_plus_l(), origin(2), geometric_schedule(0.5, 0.75, 4));
  const FormField t1 = exact_test_form(c2, Point::Zero(2), 1, 0.9);
  CHECK(t1.p() == 1);
  const MetricField smooth = diag_exp_metric(c2, {{1.0, 0.5}, {-0.3, 1.0}});
  CHECK(std::abs(pair(chern_forms(smooth, 1)[1], t1)) < 1e-6);
  const auto rep = chern_current(1, fam, t1);
  CHECK(std::abs(rep.limit) < 1e-3);
  const Chart c1 = Chart::cube(1, 1.0, 32);
  CHECK_THROWS_AS(exact_test_form(c1, Point::Zero(1), 1, 0.9), DegreeError);
}

TEST_CASE("precondition and schedule checks") {
  const Chart c2 = Chart::cube(2, 1.0, 12);
  const auto fam = RegularizationFamily::analytic(c2, SectionMatrix::parse(2, {{"z1", "0"}, {"0", "z1"}}), axis(2, 0),
                                                  geometric_schedule(0.5, 0.75, 3));
  const BumpForm b = bump_form(c2, Point::Zero(2), 2, 0.9);
  try {
    chern_current(2, fam, b);
    FAIL("expected a precondition error");
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("can not be relaxed in general") != std::string::npos);
  }
  CHECK_THROWS_AS(simultaneous_limit({{{0, 2}}}, {fam}, b), PreconditionError);
  const BumpForm b1 = bump_form(c2, Point::Zero(2), 1, 0.9);
  CHECK_THROWS_AS(chern_current(2, fam, b1), DegreeError);
  const auto line = RegularizationFamily::analytic(c2, radial_line(), origin(2), geometric_schedule(0.5, 0.75, 3));
  CHECK_THROWS_AS(simultaneous_limit({{{0, 2}}}, {line}, b), DegreeError);

  const MetricField h = from_sections(c2, l_plus_l(), origin(2)).h;
  const auto increasing_only =
      RegularizationFamily::mollified(h, Mollifier::bump(), {0.6, 0.5, 0.4}, ConvergenceClaim::IncreasingPointwise);
  CHECK_THROWS_AS(simultaneous_limit({{{0, 2}}}, {increasing_only}, b), PreconditionError);
}

TEST_CASE("richardson") {
  std::vector<Real> eps{0.4, 0.2, 0.1, 0.05};
  std::vector<Complex> v;
  for (Real e : eps) v.push_back(2.0 + 3 * e * e - e * e * e * e);
  const auto r = richardson(eps, v);
  CHECK(std::abs(r.limit - 2.0) < 1e-12);
  CHECK(r.converged);
  std::vector<Complex> osc;
  for (std::size_t i = 0; i < eps.size(); ++i) osc.push_back(i % 2 ? 1.0 : -1.0);
  CHECK_FALSE(richardson(eps, osc).converged);
  CHECK_FALSE(richardson({0.2, 0.1}, {1.0, 1.0}).converged);
}

TEST_CASE("mass tables") {
  const Chart c1 = Chart::cube(1, 1.0, 64);
  const auto fam = RegularizationFamily::analytic(c1, SectionMatrix::parse(1, {{"z1"}}), origin(1),
                                                  geometric_schedule(0.3, 0.7, 5));
  std::vector<std::pair<Real, PairingReport>> point, smooth;
  const MetricField fs = fubini_study_metric(c1);
  const auto fs_fam = RegularizationFamily::custom(fs, [fs](Real) { return fs; }, {0.3, 0.2, 0.1},
                                                   ConvergenceClaim::Both, "constant");
  for (Real r : {0.9, 0.8, 0.7}) {
    const BumpForm b = bump_form(c1, Point::Zero(1), 1, r);
    point.emplace_back(r, chern_current(1, fam, b));
    smooth.emplace_back(r, chern_current(1, fs_fam, b));
  }
  const MassTable t = mass_estimate(point);
  CHECK(t.locally_finite);
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].radius == 0.9);
  for (const auto& row : t.rows) CHECK(std::abs(row.mass - 1.0) < 1e-3);
  const MassTable s = mass_estimate(smooth);
  CHECK(s.locally_finite);
  CHECK(s.rows[2].mass.real() < s.rows[0].mass.real());

  // growing masses are not locally finite
  auto grow = point;
  grow[2].second.limit = 5.0;
  CHECK_FALSE(mass_estimate(grow).locally_finite);
}

TEST_CASE("report serialization") {
  PairingReport r;
  r.label = "x";
  r.eps = {0.2, 0.1};
  r.pairings = {Complex(1, 2), Complex(3, 0)};
  r.limit = 3.0;
  r.verdict = Verdict::Converged;
  const auto j = r.to_json();
  CHECK(j["pairings"][0][1] == 2.0);
  CHECK(j["verdict"] == "converged");
  CHECK(j["extrapolation"]["limit"][0] == 3.0);
  CHECK(r.to_csv() == "eps,re,im\n0.20000000000000001,1,2\n0.10000000000000001,3,0\n");
}
