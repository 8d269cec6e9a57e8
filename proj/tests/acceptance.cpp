// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
// `acceptance 3 5` runs only criteria 3 and 5.
#include "chern/harness.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace chern;

namespace {

struct Result {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

IndexMask bit(int a) { return IndexMask{1} << a; }

Degeneracy origin(int n) {
  Degeneracy v;
  for (int a = 0; a < n; ++a) v.equations.push_back(HoloPoly::coordinate(n, a));
  v.codim = n;
  return v;
}

SectionMatrix l_plus_l() { return SectionMatrix::parse(2, {{"z1", "0"}, {"z2", "0"}, {"0", "z1"}, {"0", "z2"}}); }
SectionMatrix o_plus_l() { return SectionMatrix::parse(2, {{"1", "0"}, {"0", "z1"}, {"0", "z2"}}); }
SectionMatrix radial_line() { return SectionMatrix::parse(2, {{"z1"}, {"z2"}}); }
SectionMatrix smooth_sections() { return SectionMatrix::parse(2, {{"1", "0"}, {"0", "1"}, {"z1", "z2"}}); }

// int -chi'(t/R)/R prod_i t^2/(t^2 + e_i^2) dt: the pairing of the radial
// products with the bump of radius R.
Real radial_oracle(Real radius, Real inner, std::vector<Real> eps) {
  const CutOff chi{inner};
  auto f = [&](Real t) {
    Real v = -chi.derivative(t / radius) / radius;
    for (Real e : eps) v *= t * t / (t * t + e * e);
    return v;
  };
  return boost::math::quadrature::gauss_kronrod<Real, 61>::integrate(f, inner * radius, radius, 15, 1e-14);
}

std::string num(Real x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// ---------------------------------------------------------------------------

void symbolic(Result& r) {
  const CharClassAlgebra alg(10);
  for (int k = 1; k <= 10; ++k) {
    const CharClassPoly s_in_s =
        alg.segre_to_chern(k).substitute(Family::Chern, 0, [&](int i) { return alg.chern_to_segre(i); });
    const CharClassPoly c_in_c =
        alg.chern_to_segre(k).substitute(Family::Segre, 0, [&](int i) { return alg.segre_to_chern(i); });
    r.require(s_in_s == CharClassPoly::s(k) && c_in_c == CharClassPoly::c(k), "round trip k=" + std::to_string(k));
  }
  CharClassPoly total_s(1);
  for (int k = 1; k <= 10; ++k) total_s += alg.segre_to_chern(k);
  r.require((alg.total_chern() * total_s).truncate(10) == CharClassPoly(1), "total-class inverse");

  // As polynomial identities in the classes of E (slot 0) and F (slot 1).
  const auto c = [](int i, int slot) { return i == 0 ? CharClassPoly(1) : CharClassPoly::c(i, slot); };
  const auto to_slot1 = [](const CharClassPoly& p) {
    return p.substitute(Family::Chern, 0, [](int i) { return CharClassPoly::c(i, 1); });
  };
  const int rank_e = 3, rank_f = 2;
  for (int k = 0; k <= 10; ++k) {
    CharClassPoly whitney(0);
    for (int i = 0; i <= k; ++i) whitney += c(i, 0) * c(k - i, 1);
    r.require(alg.whitney_sum(k) == whitney, "Whitney k=" + std::to_string(k));
    r.require(alg.dual_class(k) == (k % 2 ? Rational(-1) : Rational(1)) * c(k, 0), "duality k=" + std::to_string(k));
    CharClassPoly product(0);
    for (int i = 0; i <= k; ++i)
      product += alg.chern_character(i, rank_e) * to_slot1(alg.chern_character(k - i, rank_f));
    r.require(alg.ch_tensor(k, BundleSlot("E", rank_e), BundleSlot("F", rank_f)) == product,
              "ch tensor k=" + std::to_string(k));
  }
  r.detail << "degrees 1-10 exact";
}

// ---------------------------------------------------------------------------

void exterior(Result& r) {
  // n = 2 at 64 points per real axis: 16.8M nodes, so fields are dropped as
  // soon as they are reduced.
  const Chart chart = Chart::cube(2, 0.6, 64);
  const Region inner = Region::interior(chart, 2);
  const MetricField sec = from_sections(chart, smooth_sections()).h;
  const MetricField fs = fubini_study_metric(chart);
  const auto g = [&](const Point& z) { return sec.matrix_at(z)(0, 1); };
  const auto h = [&](const Point& z) { return fs.matrix_at(z)(0, 0); };
  Real dd = 0, leibniz = 0, herm = 0;
  {
    const FormField f = as_form(ScalarField::sample(chart, g));
    dd = std::max(dbar(dbar(f)).max_abs(), del(del(f)).max_abs());
  }
  {
    const FormField G = as_form(ScalarField::sample(chart, g));
    const FormField H = as_form(ScalarField::sample(chart, h));
    const ScalarField GH = ScalarField::sample(chart, [&](const Point& z) { return g(z) * h(z); });
    for (auto d : {&del, &dbar}) {
      FormField res = d(as_form(GH));
      res -= wedge(d(G), H);
      res -= wedge(G, d(H));
      leibniz = std::max(leibniz, res.max_abs(inner));
    }
  }
  {
    const RealField u = RealField::sample(chart, [&](const Point& z) {
      return std::log(std::real(sec.dual_matrix_at(z).determinant())) + std::log(1.0 + z.squaredNorm());
    });
    const FormField w = ddc(u);
    for (std::size_t node = 0; node < chart.node_count(); ++node)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          herm = std::max(herm, std::abs(w.at(bit(b), bit(a), node) + std::conj(w.at(bit(a), bit(b), node))));
  }
  r.require(dd <= 1e-6, "dbar dbar");
  r.require(leibniz <= 1e-6, "Leibniz");
  r.require(herm <= 1e-6, "hermitian");
  r.detail << "res 64: d^2 " << num(dd) << ", Leibniz " << num(leibniz) << ", hermitian " << num(herm);
}

// ---------------------------------------------------------------------------

void segre_check(Result& r) {
  const auto start = std::chrono::steady_clock::now();
  const Chart chart = Chart::cube(2, 1.0, 48);
  const FiberAtlas atlas = FiberAtlas::build(2);
  const auto& cal = atlas.calibration();
  const Real fiber = std::max(cal.mass_error, cal.moment_error);
  r.require(fiber <= 1e-4, "fiber quadrature");
  const std::vector<std::pair<std::string, MetricField>> metrics{
      {"sections", from_sections(chart, smooth_sections()).h},
      {"diag-exp", diag_exp_metric(chart, {{1.0, 0.5}, {-0.3, 1.0}})},
      {"fs+diag-exp", direct_sum(fubini_study_metric(chart), diag_exp_metric(chart, {{0.7, 0.2}}))},
  };
  Real worst = 0;
  for (const auto& [name, h] : metrics) {
    const auto err = segre_cross_check(h, 2, atlas, 2);
    for (Real e : err) worst = std::max(worst, e);
    r.require(*std::max_element(err.begin(), err.end()) <= 1e-3, name);
  }
  const Real seconds = std::chrono::duration<Real>(std::chrono::steady_clock::now() - start).count();
  r.require(seconds < 300, "runtime");
  r.detail << "res 48: fiber error " << num(fiber) << ", worst relative error " << num(worst) << " (k = 0, 1, 2)";
}

// ---------------------------------------------------------------------------

void poincare_lelong(Result& r) {
  const Chart chart = Chart::cube(1, 1.0, 64);
  const auto sched = geometric_schedule(0.3, 0.7, 5);
  const auto fam = RegularizationFamily::analytic(chart, SectionMatrix::parse(1, {{"z1"}}), origin(1), sched);
  const Real rho = 0.8;
  std::vector<Complex> disc;
  Real worst = 0;
  for (Real e : sched) {
    disc.push_back(integrate(chern_forms(fam.at(e), 1)[1], Region::ball(Point::Zero(1), rho)));
    worst = std::max(worst, std::abs(disc.back() - rho * rho / (rho * rho + e * e)));
  }
  const Extrapolation ex = richardson(sched, disc);
  r.require(worst <= 1e-3, "disc pairings");
  r.require(std::abs(ex.limit - 1.0) <= 1e-3, "disc limit");

  // The same through the current machinery against a bump.
  const BumpForm b = bump_form(chart, Point::Zero(1), 1, 0.9);
  const auto rep = chern_current(1, fam, b);
  r.require(rep.converged() && std::abs(rep.limit - 1.0) <= 1e-3, "current limit");
  r.detail << "disc error " << num(worst) << ", limit " << num(ex.limit.real()) << ", bump limit "
           << num(rep.limit.real());
}

// ---------------------------------------------------------------------------

void monge_ampere(Result& r) {
  const auto start = std::chrono::steady_clock::now();
  const Chart chart = Chart::cube(2, 1.0, 48);
  const BumpForm b = bump_form(chart, Point::Zero(2), 2, 0.9);
  const auto fam = RegularizationFamily::analytic(chart, l_plus_l(), origin(2), geometric_schedule(0.4, 0.7, 6));
  const Real mass = radial_oracle(0.9, 0.5, {});
  const auto sim = simultaneous_limit({{{0, 2}}}, {fam}, b);
  const auto it = chern_current(2, fam, b);
  const Real seconds = std::chrono::duration<Real>(std::chrono::steady_clock::now() - start).count();
  r.require(std::abs(sim.limit - mass) <= 2e-2, "simultaneous");
  r.require(std::abs(it.limit - mass) <= 2e-2, "iterated");
  r.require(std::abs(sim.limit - it.limit) <= 1e-2, "agreement");
  r.require(seconds < 600, "runtime");
  r.detail << "res 48: simultaneous " << num(sim.limit.real()) << ", iterated " << num(it.limit.real())
           << ", mass " << num(mass) << ", " << num(seconds) << " s";
}

// ---------------------------------------------------------------------------

void independence(Result& r) {
  Real worst_ratio = 0;
  for (const auto& ex : singular_examples()) {
    ExperimentConfig cfg = ExperimentConfig::defaults(Pipeline::Converge);
    cfg.name = ex.name;
    cfg.dimension = ex.dimension;
    cfg.metric = ex.metric;
    cfg.degrees = ex.degrees;
    if (ex.dimension == 2) {
      cfg.resolution = 24;
      cfg.schedule = geometric_schedule(0.5, 0.75, 5);
    }
    const ExperimentResult res = run_experiment(cfg);
    for (const auto& row : res.report["calibration"]["independence"]) {
      const Real spread = row["spread"], err = row["max_error"];
      worst_ratio = std::max(worst_ratio, spread / std::max(err, 1e-300));
      r.require(row["agree"].get<bool>(), ex.name);
      r.detail << ex.name << " " << num(spread) << "/" << num(err) << "; ";
    }
  }
  r.detail << "spread/error at most " << num(worst_ratio);
}

// ---------------------------------------------------------------------------

void whitney_duality(Result& r) {
  const Chart c2 = Chart::cube(2, 1.0, 32);
  const BumpForm b2 = bump_form(c2, Point::Zero(2), 2, 0.9);
  const auto fam = RegularizationFamily::analytic(c2, o_plus_l(), origin(2), geometric_schedule(0.5, 0.75, 5));
  const auto it = chern_current(2, fam, b2);
  const auto sim = simultaneous_limit({{{0, 2}}}, {fam}, b2);
  r.require(std::abs(it.limit) <= 2e-2 && std::abs(sim.limit) <= 2e-2, "c2 of O+L");
  r.detail << "c2(O+L) " << num(std::abs(it.limit)) << "/" << num(std::abs(sim.limit));

  struct Case {
    Chart chart;
    SectionMatrix s;
    std::vector<Real> schedule;
  };
  const std::vector<Case> cases{
      {Chart::cube(1, 1.0, 64), SectionMatrix::parse(1, {{"z1"}}), geometric_schedule(0.3, 0.7, 5)},
      {c2, l_plus_l(), geometric_schedule(0.5, 0.75, 5)},
  };
  for (const auto& c : cases) {
    const int n = c.chart.dimension();
    const auto f = RegularizationFamily::analytic(c.chart, c.s, origin(n), c.schedule);
    const auto dual = RegularizationFamily::custom(
        from_sections(c.chart, c.s, origin(n)).hstar, [f](Real e) { return dual_metric(f.at(e)); }, c.schedule,
        ConvergenceClaim::LocallyUniformOutsideV, "dual");
    const BumpForm b = bump_form(c.chart, Point::Zero(n), 1, 0.9);
    const auto a = simultaneous_limit({{{0, 1}}}, {f}, b);
    const auto d = simultaneous_limit({{{0, 1}}}, {dual}, b);
    const Real gap = std::abs(a.limit + d.limit);
    r.require(gap <= 1e-3, "dual c1 n=" + std::to_string(n));
    r.detail << ", dual c1 gap n=" << n << " " << num(gap);
  }
}

// ---------------------------------------------------------------------------

void cohomology(Result& r) {
  const CohomologyReport rep = cohomology_check(1, 128, geometric_schedule(0.4, 0.7, 5), {{2.0, 0.5}, {1.6, 0.7}}, 1e-3);
  r.require(std::abs(rep.smooth - 1.0) <= 1e-3, "Fubini-Study");
  r.require(std::abs(rep.singular.limit - 1.0) <= 1e-3, "singular");
  r.require(rep.outcome == Outcome::Pass, "report");
  r.detail << "Fubini-Study " << num(rep.smooth.real()) << ", singular " << num(rep.singular.limit.real())
           << ", transition " << num(rep.transition_error);
}

// ---------------------------------------------------------------------------

void closedness(Result& r) {
  // k < n: the exact test forms d(gamma + conj gamma) need a (n-k-1, n-k) gamma.
  const Chart c2 = Chart::cube(2, 1.0, 32);
  Point center(2);
  center << Complex(0.05, -0.03), Complex(-0.04, 0.02);
  Real worst = 0;
  int count = 0;
  for (const auto& ex : singular_examples()) {
    if (ex.dimension != 2) continue;
    const CatalogMetric m = catalog_metric(c2, ex.metric);
    const auto fam = RegularizationFamily::analytic(c2, *m.sections, m.h.degeneracy(), geometric_schedule(0.5, 0.75, 5));
    for (std::uint64_t seed : {9u, 21u}) {
      const FormField t = exact_test_form(c2, center, 1, 0.85, seed);
      const auto rep = chern_current(1, fam, t);
      worst = std::max(worst, std::abs(rep.limit));
      r.require(std::abs(rep.limit) <= 1e-3, ex.name);
      ++count;
    }
  }
  r.detail << count << " pairings, largest " << num(worst);
}

// ---------------------------------------------------------------------------

void sign_structure(Result& r) {
  const Chart c2 = Chart::cube(2, 1.0, 32);
  const FiberAtlas atlas = FiberAtlas::build(2);
  std::vector<Point> centers(2, Point::Zero(2));
  centers[1] << Complex(0.1, 0.05), Complex(-0.05, 0.1);
  const std::vector<std::vector<int>> parts{{1}, {2}, {1, 1}};
  Real worst = 1e300;
  int count = 0;
  auto check = [&](Real value, const std::string& what) {
    worst = std::min(worst, value);
    r.require(value >= -1e-3, what);
    ++count;
  };

  // Smooth Griffiths-positive metrics: forms directly.
  const std::vector<std::pair<std::string, MetricField>> smooth{
      {"sections", from_sections(c2, smooth_sections()).h},
      {"fs+fs", direct_sum(fubini_study_metric(c2), fubini_study_metric(c2))},
  };
  for (const auto& [name, h] : smooth) {
    r.require(griffiths_diagnostic(h, 200).pass, name + " not Griffiths positive");
    const auto s = segre_forms(h, 2, atlas);
    for (const auto& p : parts) {
      FormField prod = s[static_cast<std::size_t>(p[0])];
      int k = p[0];
      for (std::size_t i = 1; i < p.size(); ++i) {
        prod = wedge(prod, s[static_cast<std::size_t>(p[i])]);
        k += p[i];
      }
      for (const auto& c : centers)
        check((k % 2 ? -1.0 : 1.0) * pair(prod, bump_form(c2, c, k, 0.8)).real(), name);
    }
  }

  // Singular section metrics: every member of the family and the limit.
  for (const auto& sm : {l_plus_l(), radial_line(), o_plus_l()}) {
    const auto fam = RegularizationFamily::analytic(c2, sm, origin(2), geometric_schedule(0.5, 0.75, 5));
    r.require(griffiths_diagnostic(fam.at(fam.schedule().back()), 200).pass, "family not Griffiths positive");
    for (const auto& p : parts) {
      int k = 0;
      for (int d : p) k += d;
      for (const auto& c : centers) {
        const BumpForm b = bump_form(c2, c, k, 0.8, origin(2));
        const auto rep = iterated_segre_limit(p, fam, b);
        const Real sign = k % 2 ? -1.0 : 1.0;
        check(sign * rep.limit.real(), "limit");
        for (Complex v : rep.pairings) check(sign * v.real(), "sequence");
      }
    }
  }
  r.detail << count << " pairings, smallest " << num(worst);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void(Result&)>>> criteria{
      {"symbolic identities", symbolic},
      {"exterior calculus", exterior},
      {"Segre cross-check", segre_check},
      {"Poincare-Lelong", poincare_lelong},
      {"Monge-Ampere c2 mass", monge_ampere},
      {"regularization independence", independence},
      {"Whitney and duality of currents", whitney_duality},
      {"cohomology on P^1", cohomology},
      {"closedness", closedness},
      {"sign structure", sign_structure},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Result r;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(r);
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail << "threw: " << e.what();
    }
    const Real seconds = std::chrono::duration<Real>(std::chrono::steady_clock::now() - start).count();
    std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << id << " " << criteria[i].first << ": "
              << r.detail.str() << " [" << num(seconds) << " s]" << std::endl;
    failed += !r.pass;
  }
  return failed ? 1 : 0;
}
