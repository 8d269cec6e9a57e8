#include "chern/regularize.hpp"

#include "chern/quadrature.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace chern {

namespace {

Real sphere_area(int n) {
  Real fact = 1;
  for (int i = 2; i < n; ++i) fact *= i;
  return 2 * std::pow(kPi, n) / fact;
}

Real spectral_norm(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Eigen::MatrixXcd(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Dual matrix of a metric averaged over fixed offsets.
class BallAverage : public MatrixModel {
 public:
  BallAverage(MetricField h, std::vector<std::pair<Point, Real>> ball) : h_(std::move(h)), ball_(std::move(ball)) {}
  int dimension() const override { return h_.dimension(); }
  int rank() const override { return h_.rank(); }

  Mat value(const Point& z) const override {
    Mat acc = Mat::Zero(rank(), rank());
    for (const auto& [y, w] : ball_) acc += w * h_.dual_matrix_at(z - y);
    return acc;
  }

  MetricJet jet(const Point& z) const override {
    const int n = dimension(), r = rank();
    MetricJet acc;
    acc.n = n;
    acc.value = Mat::Zero(r, r);
    for (int a = 0; a < n; ++a) {
      acc.d[static_cast<std::size_t>(a)] = Mat::Zero(r, r);
      for (int b = 0; b < n; ++b) acc.mixed(a, b) = Mat::Zero(r, r);
    }
    for (const auto& [y, w] : ball_) {
      const MetricJet g = h_.dual_jet_at(z - y);
      acc.value += w * g.value;
      for (int a = 0; a < n; ++a) {
        acc.d[static_cast<std::size_t>(a)] += w * g.d[static_cast<std::size_t>(a)];
        for (int b = 0; b < n; ++b) acc.mixed(a, b) += w * g.mixed(a, b);
      }
    }
    return acc;
  }

 private:
  MetricField h_;
  std::vector<std::pair<Point, Real>> ball_;
};

}  // namespace

Mollifier Mollifier::parse(const std::string& name) {
  if (name == "bump") return bump();
  if (name == "gaussian" || name == "truncated-gaussian") return truncated_gaussian();
  throw std::invalid_argument("unknown mollifier kernel '" + name + "'");
}

std::string Mollifier::name() const { return shape_ == KernelShape::Bump ? "bump" : "truncated-gaussian"; }

Real Mollifier::profile(Real t) const {
  if (t >= 1) return 0;
  if (shape_ == KernelShape::Bump) return std::exp(1 / (t * t - 1));
  return std::exp(-2 * t * t);
}

Real Mollifier::normalization(int n) const {
  boost::math::quadrature::tanh_sinh<Real> ts;
  const Real radial = ts.integrate([&](Real t) { return profile(t) * std::pow(t, 2 * n - 1); }, 0.0, 1.0);
  return 1 / (sphere_area(n) * radial);
}

std::vector<Real> Mollifier::radial_moments(int n, Real eps, int up_to) const {
  boost::math::quadrature::tanh_sinh<Real> ts;
  auto moment = [&](int j) {
    return ts.integrate([&](Real t) { return profile(t) * std::pow(t, 2 * n - 1 + 2 * j); }, 0.0, 1.0);
  };
  const Real m0 = moment(0);
  std::vector<Real> out;
  for (int j = 0; j <= up_to; ++j) out.push_back(j == 0 ? 1.0 : moment(j) / m0 * std::pow(eps, 2 * j));
  return out;
}

Real Mollifier::spread(int n) const { return std::sqrt(radial_moments(n, 1.0, 1)[1]); }

Real Mollifier::calibration_error(int n) const {
  const auto [x, w] = gauss_legendre(256);
  Real radial = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real t = 0.5 * (x[i] + 1);
    radial += 0.5 * w[i] * profile(t) * std::pow(t, 2 * n - 1);
  }
  return std::abs(normalization(n) * sphere_area(n) * radial - 1);
}

MetricField mollify(const MetricField& h, Real eps, const Mollifier& kernel, const MollifyOptions& options) {
  if (!(eps > 0)) throw std::invalid_argument("mollifier radius must be positive");
  const Chart& chart = h.chart();
  const Real margin = *std::min_element(chart.radius().begin(), chart.radius().end());
  if (eps >= margin) throw std::invalid_argument("mollifier radius too large for chart");
  if (!h.has_analytic_jet()) throw std::logic_error("mollify needs a model-backed metric");
  const int n = h.dimension();

  Provenance p{Provenance::Kind::Mollified, kernel.name(), {{"eps", eps}},
               std::make_shared<const Provenance>(h.provenance())};

  const auto* poly = dynamic_cast<const PolynomialMatrixModel*>(h.model().get());
  if (poly && h.model_side() == MetricField::Side::Dual) {
    int degree = 0;
    for (const auto& row : poly->entries())
      for (const BiPoly& e : row) degree = std::max(degree, e.degree());
    const auto moments = kernel.radial_moments(n, eps, degree);
    auto entries = poly->entries();
    for (auto& row : entries)
      for (BiPoly& e : row) e = e.convolve_radial(moments);
    return MetricField(chart, std::make_shared<PolynomialMatrixModel>(std::move(entries)), MetricField::Side::Dual,
                       Regularity::Smooth, {}, std::move(p));
  }

  // Ball rule: Gauss-Legendre in |y|/eps against k(t) t^{2n-1}, times the
  // uniform rule on the sphere.
  const auto [x, w] = gauss_legendre(options.radial);
  const auto sphere = simplex_torus_rule(n - 1, options.simplex, options.angular, true);
  std::vector<std::pair<Point, Real>> ball;
  Real total = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real t = 0.5 * (x[i] + 1);
    const Real radial = w[i] * kernel.profile(t) * std::pow(t, 2 * n - 1);
    for (const auto& [u, su] : sphere) {
      ball.emplace_back(eps * t * u, radial * su);
      total += radial * su;
    }
  }
  for (auto& b : ball) b.second /= total;

  auto model = std::make_shared<BallAverage>(h, std::move(ball));
  return MetricField(chart, std::move(model), MetricField::Side::Dual, Regularity::Smooth, {}, std::move(p));
}

MetricField analytic_eps(const Chart& chart, const SectionMatrix& s, Real eps) {
  if (!(eps > 0)) throw std::invalid_argument("analytic_eps needs eps > 0");
  if (s.dimension() != chart.dimension()) throw ChartMismatch("section matrix dimension differs from chart");
  auto entries = s.gram();
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i][i] += BiPoly::constant(s.dimension(), eps * eps);
  Provenance p{Provenance::Kind::AnalyticEps, std::to_string(s.rows()) + "x" + std::to_string(s.cols()),
               {{"eps", eps}}, nullptr};
  return MetricField(chart, std::make_shared<PolynomialMatrixModel>(std::move(entries)), MetricField::Side::Dual,
                     Regularity::Smooth, {}, std::move(p));
}

// ---------------------------------------------------------------------------

std::vector<Real> geometric_schedule(Real start, Real ratio, int count) {
  if (!(start > 0) || !(ratio > 0 && ratio < 1) || count < 1)
    throw std::invalid_argument("geometric schedule needs start > 0, 0 < ratio < 1, count >= 1");
  std::vector<Real> out;
  for (int j = 0; j < count; ++j) out.push_back(start * std::pow(ratio, j));
  return out;
}

std::vector<Real> matched_schedule(const Mollifier& kernel, int n, const std::vector<Real>& eps) {
  const Real f = kernel.spread(n);
  std::vector<Real> out;
  for (Real e : eps) out.push_back(e / f);
  return out;
}

std::vector<Real> default_schedule(const Chart& chart) {
  const Real r = *std::min_element(chart.radius().begin(), chart.radius().end());
  return geometric_schedule(r / 8, 0.5, 6);
}

std::vector<Real> parse_schedule(const std::string& text) {
  std::istringstream is(text);
  Real start = 0, ratio = 0;
  int count = 0;
  char c1 = 0, c2 = 0;
  if (!(is >> start >> c1 >> ratio >> c2 >> count) || c1 != ':' || c2 != ':' || !(is >> std::ws).eof())
    throw std::invalid_argument("eps schedule must read start:ratio:count, got '" + text + "'");
  return geometric_schedule(start, ratio, count);
}

void validate_schedule(const std::vector<Real>& schedule) {
  if (schedule.empty()) throw std::invalid_argument("empty eps schedule");
  for (std::size_t j = 0; j < schedule.size(); ++j) {
    if (!(schedule[j] > 0)) throw std::invalid_argument("eps schedule entries must be positive");
    if (j > 0 && !(schedule[j] < schedule[j - 1]))
      throw std::invalid_argument("eps schedule must be strictly decreasing");
  }
}

RegularizationFamily::RegularizationFamily(MetricField source, RegularizationMode mode, ConvergenceClaim claim,
                                           std::string label, Builder build, std::vector<Real> schedule)
    : source_(std::move(source)),
      mode_(mode),
      claim_(claim),
      label_(std::move(label)),
      build_(std::move(build)),
      schedule_(std::move(schedule)) {
  validate_schedule(schedule_);
}

RegularizationFamily RegularizationFamily::mollified(MetricField source, Mollifier kernel, std::vector<Real> schedule,
                                                     ConvergenceClaim claim) {
  auto build = [source, kernel](Real eps) { return mollify(source, eps, kernel); };
  return RegularizationFamily(source, RegularizationMode::Mollify, claim, "mollify-" + kernel.name(), build,
                              std::move(schedule));
}

RegularizationFamily RegularizationFamily::analytic(const Chart& chart, const SectionMatrix& s, Degeneracy v,
                                                    std::vector<Real> schedule) {
  MetricField source = from_sections(chart, s, std::move(v)).h;
  auto build = [chart, s](Real eps) { return analytic_eps(chart, s, eps); };
  return RegularizationFamily(source, RegularizationMode::AnalyticEps, ConvergenceClaim::Both, "analytic-eps", build,
                              std::move(schedule));
}

RegularizationFamily RegularizationFamily::custom(MetricField source, Builder build, std::vector<Real> schedule,
                                                  ConvergenceClaim claim, std::string label) {
  if (!build) throw std::invalid_argument("custom family needs a builder");
  return RegularizationFamily(std::move(source), RegularizationMode::Custom, claim, std::move(label),
                              std::move(build), std::move(schedule));
}

MetricField RegularizationFamily::at(Real eps) const {
  MetricField m = build_(eps);
  if (!(m.chart() == source_.chart())) m = m.on_chart(source_.chart());
  return m;
}

RegularizationFamily RegularizationFamily::with_schedule(std::vector<Real> schedule) const {
  RegularizationFamily f = *this;
  validate_schedule(schedule);
  f.schedule_ = std::move(schedule);
  return f;
}

// ---------------------------------------------------------------------------

ConvergenceReport convergence_diagnostic(const RegularizationFamily& family, const Region& region,
                                         const ConvergenceOptions& options) {
  std::vector<MetricField> members;
  for (std::size_t j = 0; j < family.size(); ++j) members.push_back(family.member(j));
  return convergence_diagnostic(members, family.schedule(), family.source(), region, options);
}

ConvergenceReport convergence_diagnostic(const std::vector<MetricField>& members, const std::vector<Real>& eps,
                                         const MetricField& limit, const Region& region,
                                         const ConvergenceOptions& options) {
  if (members.size() != eps.size()) throw std::invalid_argument("one eps per member expected");
  const Chart& chart = limit.chart();
  std::vector<std::size_t> nodes;
  for (std::size_t k = 0; k < chart.node_count(); ++k)
    if (region.contains(chart, k)) nodes.push_back(k);
  if (nodes.empty()) throw std::invalid_argument("diagnostic region holds no nodes");

  ConvergenceReport rep;
  rep.eps = eps;
  std::vector<Mat> target;
  std::vector<Real> scale;
  for (std::size_t k : nodes) {
    target.push_back(limit.matrix(k));
    scale.push_back(spectral_norm(target.back()));
  }
  for (const MetricField& m : members) {
    Real worst = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      worst = std::max(worst, spectral_norm(m.matrix(nodes[i]) - target[i]) / scale[i]);
    rep.sup_difference.push_back(worst);
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
  std::normal_distribution<Real> nd;
  for (std::size_t j = 0; j + 1 < members.size(); ++j) {
    for (std::size_t s = 0; s < options.pairs; ++s) {
      const std::size_t k = nodes[pick(rng)];
      Eigen::VectorXcd xi(members[j].rank());
      for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = Complex(nd(rng), nd(rng));
      const Real coarse = (xi.adjoint() * members[j].matrix(k) * xi)(0).real();
      const Real fine = (xi.adjoint() * members[j + 1].matrix(k) * xi)(0).real();
      ++rep.pairs_checked;
      const Real deficit = coarse - fine;
      if (deficit > options.monotonicity_tolerance * std::max<Real>(1.0, std::abs(coarse))) {
        ++rep.monotonicity_violations;
        rep.worst_violation = std::max(rep.worst_violation, deficit / std::max<Real>(1.0, std::abs(coarse)));
      }
    }
  }
  rep.monotone = rep.monotonicity_violations == 0;
  rep.decreasing = true;
  for (std::size_t j = 0; j + 1 < rep.sup_difference.size(); ++j)
    if (rep.sup_difference[j + 1] > rep.sup_difference[j] * (1 + 1e-12) + 1e-14) rep.decreasing = false;
  const std::size_t m = rep.sup_difference.size();
  if (m >= 2 && rep.sup_difference[m - 1] > 0 && rep.sup_difference[m - 2] > 0)
    rep.observed_order = std::log(rep.sup_difference[m - 2] / rep.sup_difference[m - 1]) / std::log(eps[m - 2] / eps[m - 1]);
  rep.pass = rep.monotone && rep.decreasing;
  return rep;
}

}  // namespace chern
