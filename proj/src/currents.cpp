#include "chern/currents.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace chern {

namespace {

Real smooth_zero(Real t) { return t > 0 ? std::exp(-1 / t) : 0.0; }
Real smooth_zero_prime(Real t) { return t > 0 ? std::exp(-1 / t) / (t * t) : 0.0; }

std::vector<std::vector<int>> index_subsets(int n, int p) {
  std::vector<std::vector<int>> out;
  for (IndexMask m : form_algebra(n).subsets(p)) {
    std::vector<int> s;
    for (int a = 0; a < n; ++a)
      if (m & (IndexMask{1} << a)) s.push_back(a);
    out.push_back(s);
  }
  return out;
}

Real norm_of(const Point& w, const std::vector<int>& idx) {
  Real s = 0;
  for (int a : idx) s += std::norm(w(a));
  return std::sqrt(s);
}

std::vector<int> complement(int n, const std::vector<int>& idx) {
  std::vector<int> out;
  for (int a = 0; a < n; ++a)
    if (std::find(idx.begin(), idx.end(), a) == idx.end()) out.push_back(a);
  return out;
}

Eigen::MatrixXcd random_unitary(int n, std::mt19937_64& rng) {
  std::normal_distribution<Real> nd;
  Eigen::MatrixXcd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = Complex(nd(rng), nd(rng));
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(a);
  Eigen::MatrixXcd q = qr.householderQ();
  return q;
}

// prod_{j in I} i dw_j ^ dwbar_j with dw = U dz.
PointForm coordinate_volume(int n, const std::vector<int>& idx, const Eigen::MatrixXcd& u) {
  PointForm acc = PointForm::scalar(n, 1.0);
  for (int j : idx) {
    Eigen::MatrixXcd m(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) m(a, b) = kI * u(j, a) * std::conj(u(j, b));
    acc = wedge(acc, one_one_form(m));
  }
  return acc;
}

void check_support(const Chart& chart, const Point& center, Real reach, const char* what) {
  for (int a = 0; a < chart.dimension(); ++a) {
    const Complex off = center(a) - chart.center()[static_cast<std::size_t>(a)];
    const Real r = chart.radius()[static_cast<std::size_t>(a)];
    if (std::abs(off.real()) + reach > r || std::abs(off.imag()) + reach > r)
      throw std::invalid_argument(std::string(what) + " support exceeds chart");
  }
}

// The conjugate of a (p,p) point form, written back in the dz-first basis.
PointForm conjugate_form(const PointForm& f) {
  if (f.p != f.q) throw DegreeError("conjugate_form expects a (p,p)-form");
  const FormAlgebra& alg = form_algebra(f.n);
  PointForm out(f.n, f.p, f.q);
  const Real sign = (f.p * f.p) % 2 == 0 ? 1.0 : -1.0;
  for (IndexMask I : alg.subsets(f.p))
    for (IndexMask J : alg.subsets(f.q)) out.at(J, I) = sign * std::conj(f.at(I, J));
  return out;
}

}  // namespace

Real CutOff::operator()(Real s) const {
  const Real u = (1 - s) / (1 - inner);
  if (u >= 1) return 1;
  if (u <= 0) return 0;
  const Real a = smooth_zero(u), b = smooth_zero(1 - u);
  return a / (a + b);
}

Real CutOff::derivative(Real s) const {
  const Real u = (1 - s) / (1 - inner);
  if (u >= 1 || u <= 0) return 0;
  const Real a = smooth_zero(u), b = smooth_zero(1 - u);
  const Real da = smooth_zero_prime(u), db = -smooth_zero_prime(1 - u);
  const Real dstep = (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
  return -dstep / (1 - inner);
}

PointForm BumpForm::evaluate(const Point& z) const {
  const int n = static_cast<int>(z.size());
  const Point w = rotation_ * (z - center_);
  const CutOff chi{inner_};
  PointForm out(n, degree(), degree());
  out.c.setZero();
  for (std::size_t i = 0; i < subsets_.size(); ++i) {
    const Real a = norm_of(w, subsets_[i]);
    const Real b = norm_of(w, complement(n, subsets_[i]));
    const Real v = chi(a / transverse_) * chi(b / radius_);
    if (v != 0) out.c += v * bases_[i].c;
  }
  return out;
}

BumpForm bump_form(const Chart& chart, const Point& center, int k_plus_q, Real scale, const Degeneracy& v,
                   const BumpOptions& options) {
  const int n = chart.dimension();
  if (center.size() != n) throw ChartMismatch("bump center dimension differs from chart");
  if (k_plus_q < 0 || k_plus_q > n) throw DegreeError("bump needs 0 <= k + q <= n");
  if (!(scale > 0) || !(options.inner > 0 && options.inner < 1) || !(options.transverse_ratio > 0))
    throw std::invalid_argument("bump radii must be positive with inner fraction in (0, 1)");
  const int p = n - k_plus_q;
  const Real r2 = scale, r1 = options.transverse_ratio * scale;
  const Real reach = p == 0 ? r2 : (p == n ? r1 : std::hypot(r1, r2));
  check_support(chart, center, reach, "bump");

  const auto subsets = index_subsets(n, p);
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(n, n);
  bool rotated = false;

  if (!v.empty()) {
    // Points of V near the support, by projecting random nearby points.
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<Real> ud(-1.5 * reach, 1.5 * reach);
    std::vector<Point> on_v;
    if (auto c = v.project(center)) on_v.push_back(*c);
    for (int s = 0; s < options.separation_samples; ++s) {
      Point z = center;
      for (int a = 0; a < n; ++a) z(a) += Complex(ud(rng), ud(rng));
      if (auto q = v.project(z)) on_v.push_back(*q);
    }
    auto separated = [&](const Eigen::MatrixXcd& rot) {
      for (const Point& q : on_v) {
        const Point w = rot * (q - center);
        for (const auto& idx : subsets) {
          const Real a = norm_of(w, idx), b = norm_of(w, complement(n, idx));
          if (a <= 1.05 * r1 && b >= 0.95 * options.inner * r2 && b <= 1.05 * r2) return false;
        }
      }
      return true;
    };
    if (!separated(u)) {
      std::mt19937_64 urng(options.seed + 1);
      bool found = false;
      for (int t = 0; t < options.max_rotations && !found; ++t) {
        const Eigen::MatrixXcd cand = random_unitary(n, urng);
        if (separated(cand)) {
          u = cand;
          found = rotated = true;
        }
      }
      if (!found) throw std::runtime_error("no tried coordinate rotation separates V from the bump projections");
    }
  }

  BumpForm b{FormField(chart, p, p)};
  b.center_ = center;
  b.radius_ = r2;
  b.transverse_ = r1;
  b.inner_ = options.inner;
  b.rotated_ = rotated;
  b.rotation_ = u;
  b.subsets_ = subsets;
  for (const auto& idx : subsets) b.bases_.push_back(coordinate_volume(n, idx, u));
  Real fact = 1;
  for (int i = 2; i <= p; ++i) fact *= i;
  b.domination_ = 1 / fact;
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    const Point z = chart.point(node);
    if ((z - center).norm() >= reach) continue;
    b.form_.set_point_form(node, b.evaluate(z));
  }
  return b;
}

Real strong_positivity_margin(const PointForm& beta, int samples, std::uint64_t seed) {
  const int n = beta.n, m = n - beta.p;
  if (beta.p != beta.q) throw DegreeError("strong positivity is defined for (p,p)-forms");
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> nd;
  const Complex vol = top_form_volume_factor(n);
  Complex im = 1;
  for (int i = 0; i < m * m; ++i) im *= kI;
  Real worst = std::numeric_limits<Real>::infinity();
  for (int s = 0; s < samples; ++s) {
    PointForm g = PointForm::scalar(n, 1.0);
    for (int i = 0; i < m; ++i) {
      PointForm a(n, 1, 0);
      for (Eigen::Index k = 0; k < a.c.size(); ++k) a.c(k) = Complex(nd(rng), nd(rng));
      a.c /= a.c.norm();
      g = wedge(g, a);
    }
    const Real size = g.c.squaredNorm();
    if (size < 1e-12) continue;
    PointForm gbar(n, 0, m);
    for (Eigen::Index k = 0; k < g.c.size(); ++k) gbar.c(k) = std::conj(g.c(k));
    PointForm sigma = wedge(g, gbar);
    sigma.c *= im;
    const Complex top = wedge(beta, sigma).c(0) * vol;
    worst = std::min(worst, top.real() / size);
  }
  return worst;
}

FormField exact_test_form(const Chart& chart, const Point& center, int k, Real scale, std::uint64_t seed) {
  const int n = chart.dimension();
  if (k < 0 || k >= n) throw DegreeError("exact test forms need 0 <= k < n");
  check_support(chart, center, scale, "test form");
  const int m = n - k;
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> nd;
  PointForm gamma(n, m - 1, m);
  for (Eigen::Index i = 0; i < gamma.c.size(); ++i) gamma.c(i) = Complex(nd(rng), nd(rng));
  gamma.c /= gamma.c.norm();
  std::vector<PointForm> dz_gamma;
  for (int a = 0; a < n; ++a) {
    PointForm dz(n, 1, 0);
    dz.c.setZero();
    dz.at(IndexMask{1} << a, 0) = 1.0;
    dz_gamma.push_back(wedge(dz, gamma));
  }
  const CutOff chi{0.5};
  FormField out(chart, m, m);
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    const Point dzc = chart.point(node) - center;
    const Real r = dzc.norm();
    if (r >= scale || r == 0) continue;
    const Real dchi = chi.derivative(r / scale) / scale;
    if (dchi == 0) continue;
    PointForm d(n, m, m);
    d.c.setZero();
    for (int a = 0; a < n; ++a) d.c += dchi * std::conj(dzc(a)) / (2 * r) * dz_gamma[static_cast<std::size_t>(a)].c;
    PointForm sum = d;
    sum.c += conjugate_form(d).c;
    out.set_point_form(node, sum);
  }
  return out;
}

Complex pair(const FormField& t, const FormField& test) {
  const int n = t.dimension();
  if (!(t.chart() == test.chart())) throw ChartMismatch("pairing across different charts");
  if (t.p() + test.p() != n || t.q() + test.q() != n)
    throw DegreeError("pairing needs complementary bidegrees");
  return integrate(wedge(t, test));
}

Complex pair(const FormField& t, const BumpForm& beta) { return pair(t, beta.form()); }

// ---------------------------------------------------------------------------

namespace {

Complex neville_at_zero(const std::vector<Real>& x, const std::vector<Complex>& y) {
  std::vector<Complex> p = y;
  const std::size_t m = x.size();
  for (std::size_t level = 1; level < m; ++level)
    for (std::size_t i = 0; i + level < m; ++i)
      p[i] = (x[i + level] * p[i] - x[i] * p[i + 1]) / (x[i + level] - x[i]);
  return p[0];
}

Complex extrapolate_window(const std::vector<Real>& eps, const std::vector<Complex>& v, std::size_t end,
                           std::size_t width) {
  std::vector<Real> x;
  std::vector<Complex> y;
  for (std::size_t i = end - width; i < end; ++i) {
    x.push_back(eps[i] * eps[i]);
    y.push_back(v[i]);
  }
  return neville_at_zero(x, y);
}

}  // namespace

Extrapolation richardson(const std::vector<Real>& eps, const std::vector<Complex>& values, Real tolerance,
                         Real floor) {
  if (eps.size() != values.size() || eps.empty()) throw std::invalid_argument("richardson needs matching data");
  Extrapolation e;
  const std::size_t m = values.size();
  if (m == 1) {
    e.limit = values[0];
    e.error = std::numeric_limits<Real>::infinity();
    e.relative_change = std::numeric_limits<Real>::infinity();
    return e;
  }
  Complex previous;
  if (m == 2) {
    e.limit = extrapolate_window(eps, values, 2, 2);
    previous = values[1];
  } else {
    e.limit = extrapolate_window(eps, values, m, 3);
    previous = m >= 4 ? extrapolate_window(eps, values, m - 1, 3) : extrapolate_window(eps, values, m, 2);
  }
  const Real change = std::abs(e.limit - previous);
  e.error = change;
  e.relative_change = change / std::max(std::abs(e.limit), std::numeric_limits<Real>::min());
  e.converged = m >= 3 && (change <= tolerance * std::abs(e.limit) || change <= floor);
  return e;
}

std::string to_string(Verdict v) { return v == Verdict::Converged ? "converged" : "inconclusive"; }

nlohmann::json PairingReport::to_json() const {
  auto cx = [](Complex c) { return nlohmann::json::array({c.real(), c.imag()}); };
  nlohmann::json j;
  j["label"] = label;
  j["schedule"] = eps;
  j["pairings"] = nlohmann::json::array();
  for (Complex c : pairings) j["pairings"].push_back(cx(c));
  j["extrapolation"] = {{"limit", cx(limit)}, {"error", error}, {"relative_change", relative_change}};
  j["verdict"] = to_string(verdict);
  j["levels"] = nlohmann::json::array();
  for (const LevelRecord& r : levels) {
    nlohmann::json l;
    l["level"] = r.level;
    l["frozen"] = r.frozen;
    l["eps"] = r.eps;
    l["values"] = nlohmann::json::array();
    for (Complex c : r.values) l["values"].push_back(cx(c));
    l["estimate"] = cx(r.estimate);
    l["relative_change"] = r.relative_change;
    l["stabilized"] = r.stabilized;
    j["levels"].push_back(l);
  }
  return j;
}

std::string PairingReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "eps,re,im\n";
  for (std::size_t i = 0; i < eps.size(); ++i) os << eps[i] << "," << pairings[i].real() << "," << pairings[i].imag() << "\n";
  return os.str();
}

int CurrentProductSpec::total_degree() const {
  int k = 0;
  for (const auto& f : factors) k += f.degree;
  return k;
}

void check_codimension(const std::vector<RegularizationFamily>& families, int k) {
  for (const auto& f : families) {
    const Degeneracy& v = f.degeneracy();
    if (!v.empty() && v.codim < k)
      throw PreconditionError("codim V = " + std::to_string(v.codim) + " < k = " + std::to_string(k) +
                              ": the codimension condition can not be relaxed in general");
  }
}

// ---------------------------------------------------------------------------

namespace {

using Samples = Eigen::MatrixXcd;  // components x support nodes

// Nodes where the test form is nonzero, with trapezoid weights.
struct Support {
  Chart chart;
  int n = 0, p = 0;
  std::vector<std::size_t> nodes;
  std::vector<Real> weights;
  Samples test;

  explicit Support(const FormField& t) : chart(t.chart()), n(t.dimension()), p(t.p()) {
    if (t.p() != t.q()) throw DegreeError("test forms must have bidegree (p,p)");
    const std::vector<Real> w = Region::whole().weights(chart);
    for (std::size_t k = 0; k < chart.node_count(); ++k)
      if (w[k] != 0 && t.coeffs().col(static_cast<Eigen::Index>(k)).cwiseAbs().maxCoeff() != 0) {
        nodes.push_back(k);
        weights.push_back(w[k]);
      }
    test.resize(t.coeffs().rows(), static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t s = 0; s < nodes.size(); ++s)
      test.col(static_cast<Eigen::Index>(s)) = t.coeffs().col(static_cast<Eigen::Index>(nodes[s]));
  }

  std::size_t size() const { return nodes.size(); }

  Complex total() const {
    const Complex sum = pairwise_sum_indexed<Complex>(size(), [&](std::size_t s) {
      return weights[s] * test(0, static_cast<Eigen::Index>(s));
    });
    return top_form_volume_factor(n) * sum;
  }

  // Integral of f_1 ^ ... ^ f_m ^ test over the support.
  Complex integrate(const std::vector<const Samples*>& factors, const std::vector<int>& degrees) const {
    const Complex sum = pairwise_sum_indexed<Complex>(size(), [&](std::size_t s) {
      const auto col = static_cast<Eigen::Index>(s);
      PointForm acc(n, p, p);
      acc.c = test.col(col);
      for (std::size_t i = 0; i < factors.size(); ++i) {
        PointForm f(n, degrees[i], degrees[i]);
        f.c = factors[i]->col(col);
        acc = wedge(f, acc);
      }
      return weights[s] * acc.c(0);
    });
    return top_form_volume_factor(n) * sum;
  }
};

// Per-eps caches of Chern or Segre forms of family members on the support.
class FormSampler {
 public:
  enum class Kind { Chern, Segre };
  FormSampler(const RegularizationFamily& family, const Support& support, Kind kind, std::set<int> degrees,
              const FiberQuadratureOptions& fiber)
      : family_(family), support_(support), kind_(kind), degrees_(std::move(degrees)) {
    if (kind_ == Kind::Segre) atlas_ = FiberAtlas::build(family.source().rank(), fiber);
  }

  const Samples& get(Real eps, int degree) {
    auto it = cache_.find(eps);
    if (it == cache_.end()) it = cache_.emplace(eps, compute(eps)).first;
    return it->second.at(degree);
  }

 private:
  std::map<int, Samples> compute(Real eps) {
    const MetricField h = family_.at(eps);
    const int top = *degrees_.rbegin();
    const int n = support_.n;
    std::map<int, Samples> out;
    for (int d : degrees_) out[d].resize(form_algebra(n).components(d, d), static_cast<Eigen::Index>(support_.size()));
    for (std::size_t s = 0; s < support_.size(); ++s) {
      const std::size_t node = support_.nodes[s];
      const auto forms = kind_ == Kind::Chern ? chern_point_forms(h.jet(node), top)
                                              : segre_point_forms(h.dual_jet(node), *atlas_, top);
      for (int d : degrees_)
        out[d].col(static_cast<Eigen::Index>(s)) = forms[static_cast<std::size_t>(d)].c.head(out[d].rows());
    }
    return out;
  }

  const RegularizationFamily& family_;
  const Support& support_;
  Kind kind_;
  std::set<int> degrees_;
  std::optional<FiberAtlas> atlas_;
  std::map<Real, std::map<int, Samples>> cache_;
};

std::optional<Real> schedule_entry(const std::vector<Real>& schedule, std::size_t i, Real floor) {
  if (i < schedule.size()) return schedule[i];
  const Real ratio = schedule.size() >= 2 ? schedule.back() / schedule[schedule.size() - 2] : 0.5;
  const Real e = schedule.back() * std::pow(ratio, static_cast<Real>(i - schedule.size() + 1));
  if (e < floor) return std::nullopt;
  return e;
}

void check_test_degree(const FormField& test, int k) {
  if (test.p() != test.q() || test.p() + k != test.dimension())
    throw DegreeError("test form must have bidegree (n-k, n-k)");
}

// Nested limit over factor levels; level 0 is the innermost.
class NestedLimit {
 public:
  NestedLimit(const std::vector<int>& degrees, FormSampler& sampler, const Support& support,
              const std::vector<Real>& schedule, const LimitOptions& options)
      : degrees_(degrees), sampler_(sampler), support_(support), schedule_(schedule), options_(options),
        eps_(degrees.size(), 0.0) {
    floor_ = options.eps_floor;
    if (floor_ <= 0)
      for (int a = 0; a < support.n; ++a) floor_ = std::max(floor_, 1.5 * support.chart.spacing(a));
  }

  Complex run(std::vector<LevelRecord>& records, bool& ok, Real& inner_error) {
    records_ = &records;
    ok_ = true;
    inner_error_ = 0;
    const Complex v = stage(static_cast<int>(degrees_.size()) - 1);
    ok = ok_;
    inner_error = inner_error_;
    return v;
  }

  Extrapolation outer;
  std::vector<Real> outer_eps;
  std::vector<Complex> outer_values;

 private:
  Complex direct() {
    std::vector<const Samples*> f;
    for (std::size_t i = 0; i < degrees_.size(); ++i) f.push_back(&sampler_.get(eps_[i], degrees_[i]));
    return support_.integrate(f, degrees_);
  }

  Complex stage(int level) {
    if (level < 0) return direct();
    const bool top = level == static_cast<int>(degrees_.size()) - 1;
    LevelRecord rec;
    rec.level = level;
    for (std::size_t i = static_cast<std::size_t>(level) + 1; i < degrees_.size(); ++i) rec.frozen.push_back(eps_[i]);
    Extrapolation ex;
    const std::size_t cap =
        std::max<std::size_t>(3, schedule_.size()) + static_cast<std::size_t>(std::max(0, options_.max_refinements));
    for (std::size_t i = 0; i < cap; ++i) {
      const auto e = schedule_entry(schedule_, i, floor_);
      if (!e) break;
      eps_[static_cast<std::size_t>(level)] = *e;
      const Complex v = stage(level - 1);
      rec.eps.push_back(*e);
      rec.values.push_back(v);
      ex = richardson(rec.eps, rec.values, options_.tolerance, options_.floor);
      // the outermost level walks the whole schedule; inner ones stop once stable
      if (ex.converged && (!top ? true : i + 1 >= schedule_.size())) break;
    }
    rec.estimate = ex.limit;
    rec.relative_change = ex.relative_change;
    rec.stabilized = ex.converged;
    if (!ex.converged) ok_ = false;
    if (!top) inner_error_ = std::max(inner_error_, ex.error);
    if (top) {
      outer = ex;
      outer_eps = rec.eps;
      outer_values = rec.values;
    }
    records_->push_back(rec);
    return ex.limit;
  }

  std::vector<int> degrees_;
  FormSampler& sampler_;
  const Support& support_;
  std::vector<Real> schedule_;
  LimitOptions options_;
  std::vector<Real> eps_;
  Real floor_ = 0;
  std::vector<LevelRecord>* records_ = nullptr;
  bool ok_ = true;
  Real inner_error_ = 0;
};

std::vector<int> monomial_degrees(const Monomial& m) {
  std::vector<int> d;
  for (const auto& [var, e] : m) {
    if (var.family != Family::Segre || var.slot != 0)
      throw std::invalid_argument("expected a polynomial in the Segre classes of one bundle");
    for (int i = 0; i < e; ++i) d.push_back(var.index);
  }
  return d;
}

Real to_real(const Rational& r) { return static_cast<Real>(r); }

void require_claim(const RegularizationFamily& f, ConvergenceClaim want, const char* what) {
  if (f.claim() != ConvergenceClaim::Both && f.claim() != want) throw PreconditionError(what);
}

}  // namespace

PairingReport simultaneous_limit(const CurrentProductSpec& spec, const std::vector<RegularizationFamily>& families,
                                 const FormField& test, const LimitOptions& options) {
  if (spec.factors.empty()) throw std::invalid_argument("product spec has no factors");
  if (families.empty()) throw std::invalid_argument("no regularization families");
  const int k = spec.total_degree();
  check_test_degree(test, k);
  check_codimension(families, k);
  for (const auto& f : families) {
    require_claim(f, ConvergenceClaim::LocallyUniformOutsideV,
                  "simultaneous limits need families converging locally uniformly outside V");
    if (f.size() != families[0].size()) throw std::invalid_argument("families must share the schedule length");
    if (!(f.source().chart() == test.chart())) throw ChartMismatch("family and test form live on different charts");
  }
  const Support support(test);
  std::vector<std::set<int>> wanted(families.size());
  for (const auto& f : spec.factors) {
    if (f.family < 0 || static_cast<std::size_t>(f.family) >= families.size())
      throw std::invalid_argument("factor refers to a missing family");
    if (f.degree < 1) throw DegreeError("factor degrees must be positive");
    if (f.degree > families[static_cast<std::size_t>(f.family)].source().rank())
      throw DegreeError("c_k needs k <= rank of the bundle");
    wanted[static_cast<std::size_t>(f.family)].insert(f.degree);
  }
  std::vector<std::unique_ptr<FormSampler>> samplers;
  for (std::size_t i = 0; i < families.size(); ++i)
    samplers.push_back(wanted[i].empty() ? nullptr
                                         : std::make_unique<FormSampler>(families[i], support, FormSampler::Kind::Chern,
                                                                         wanted[i], options.fiber));
  PairingReport rep;
  rep.label = "simultaneous";
  std::vector<int> degrees;
  for (const auto& f : spec.factors) degrees.push_back(f.degree);
  for (std::size_t j = 0; j < families[0].size(); ++j) {
    std::vector<const Samples*> fs;
    for (const auto& f : spec.factors) {
      const auto fi = static_cast<std::size_t>(f.family);
      fs.push_back(&samplers[fi]->get(families[fi].schedule()[j], f.degree));
    }
    rep.eps.push_back(families[0].schedule()[j]);
    rep.pairings.push_back(support.integrate(fs, degrees));
  }
  const Extrapolation ex = richardson(rep.eps, rep.pairings, options.tolerance, options.floor);
  rep.limit = ex.limit;
  rep.error = ex.error;
  rep.relative_change = ex.relative_change;
  rep.verdict = ex.converged ? Verdict::Converged : Verdict::Inconclusive;
  return rep;
}

PairingReport simultaneous_limit(const CurrentProductSpec& spec, const std::vector<RegularizationFamily>& families,
                                 const BumpForm& beta, const LimitOptions& options) {
  return simultaneous_limit(spec, families, beta.form(), options);
}

PairingReport segre_polynomial_limit(const CharClassPoly& p, const RegularizationFamily& family, const FormField& test,
                                     const LimitOptions& options) {
  const int k = p.is_zero() ? 0 : p.grade();
  check_test_degree(test, k);
  check_codimension({family}, k);
  require_claim(family, ConvergenceClaim::IncreasingPointwise, "nested limits need pointwise increasing families");
  if (!(family.source().chart() == test.chart())) throw ChartMismatch("family and test form live on different charts");
  const Support support(test);
  std::set<int> wanted;
  for (const auto& [mono, c] : p.terms())
    for (int d : monomial_degrees(mono)) wanted.insert(d);
  std::unique_ptr<FormSampler> sampler;
  if (!wanted.empty())
    sampler = std::make_unique<FormSampler>(family, support, FormSampler::Kind::Segre, wanted, options.fiber);

  PairingReport rep;
  rep.label = "segre-polynomial";
  rep.verdict = Verdict::Converged;
  rep.eps = family.schedule();
  rep.pairings.assign(rep.eps.size(), Complex{});
  for (const auto& [mono, coeff] : p.terms()) {
    const Real c = to_real(coeff);
    const auto degrees = monomial_degrees(mono);
    if (degrees.empty()) {
      const Complex t = support.total();
      rep.limit += c * t;
      for (auto& v : rep.pairings) v += c * t;
      continue;
    }
    NestedLimit nested(degrees, *sampler, support, family.schedule(), options);
    std::vector<LevelRecord> records;
    bool ok = true;
    Real inner_error = 0;
    const Complex v = nested.run(records, ok, inner_error);
    rep.limit += c * v;
    rep.error += std::abs(c) * (nested.outer.error + inner_error);
    if (!ok) rep.verdict = Verdict::Inconclusive;
    // the diagonal sequence, every factor at the same eps
    for (std::size_t j = 0; j < rep.eps.size(); ++j) {
      std::vector<const Samples*> fs;
      for (int d : degrees) fs.push_back(&sampler->get(rep.eps[j], d));
      rep.pairings[j] += c * support.integrate(fs, degrees);
    }
    for (auto& r : records) rep.levels.push_back(std::move(r));
  }
  rep.relative_change = rep.error / std::max(std::abs(rep.limit), std::numeric_limits<Real>::min());
  return rep;
}

PairingReport iterated_segre_limit(const std::vector<int>& degrees, const RegularizationFamily& family,
                                   const FormField& test, const LimitOptions& options) {
  if (degrees.empty()) throw std::invalid_argument("iterated limit needs at least one factor");
  CharClassPoly mono = 1;
  for (int d : degrees) {
    if (d < 1) throw DegreeError("Segre factor degrees must be positive");
    mono = mono * CharClassPoly::s(d);
  }
  // Evaluate with the factor order as given rather than the canonical order.
  const int k = mono.grade();
  check_test_degree(test, k);
  check_codimension({family}, k);
  require_claim(family, ConvergenceClaim::IncreasingPointwise, "nested limits need pointwise increasing families");
  if (!(family.source().chart() == test.chart())) throw ChartMismatch("family and test form live on different charts");
  const Support support(test);
  FormSampler sampler(family, support, FormSampler::Kind::Segre, std::set<int>(degrees.begin(), degrees.end()),
                      options.fiber);
  NestedLimit nested(degrees, sampler, support, family.schedule(), options);
  PairingReport rep;
  rep.label = "iterated-segre";
  bool ok = true;
  Real inner_error = 0;
  rep.limit = nested.run(rep.levels, ok, inner_error);
  rep.eps = nested.outer_eps;
  rep.pairings = nested.outer_values;
  rep.error = nested.outer.error + inner_error;
  rep.relative_change = nested.outer.relative_change;
  rep.verdict = ok ? Verdict::Converged : Verdict::Inconclusive;
  return rep;
}

PairingReport iterated_segre_limit(const std::vector<int>& degrees, const RegularizationFamily& family,
                                   const BumpForm& beta, const LimitOptions& options) {
  return iterated_segre_limit(degrees, family, beta.form(), options);
}

PairingReport chern_current(int k, const RegularizationFamily& family, const FormField& test,
                            const LimitOptions& options) {
  if (k < 0 || k > family.source().dimension()) throw DegreeError("Chern current degree out of range");
  const CharClassPoly p = k == 0 ? CharClassPoly(1) : CharClassAlgebra(k).chern_to_segre(k);
  PairingReport rep = segre_polynomial_limit(p, family, test, options);
  rep.label = "c" + std::to_string(k);
  return rep;
}

PairingReport chern_current(int k, const RegularizationFamily& family, const BumpForm& beta,
                            const LimitOptions& options) {
  return chern_current(k, family, beta.form(), options);
}

PairingReport chern_character_current(int k, const RegularizationFamily& family, const FormField& test,
                                      const LimitOptions& options) {
  if (k < 0 || k > family.source().dimension()) throw DegreeError("Chern character degree out of range");
  const int r = family.source().rank();
  CharClassPoly p = r;
  if (k > 0) {
    const CharClassAlgebra alg(k);
    p = alg.chern_character(k, r).substitute(Family::Chern, 0, [&](int i) { return alg.chern_to_segre(i); });
  }
  PairingReport rep = segre_polynomial_limit(p, family, test, options);
  rep.label = "ch" + std::to_string(k);
  return rep;
}

PairingReport chern_character_current(int k, const RegularizationFamily& family, const BumpForm& beta,
                                      const LimitOptions& options) {
  return chern_character_current(k, family, beta.form(), options);
}

MassTable mass_estimate(std::vector<std::pair<Real, PairingReport>> reports, Real tolerance) {
  std::sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  MassTable t;
  t.locally_finite = !reports.empty();
  for (const auto& [radius, rep] : reports) {
    t.rows.push_back({radius, rep.limit, rep.error, rep.converged()});
    if (!rep.converged() || !std::isfinite(std::abs(rep.limit))) t.locally_finite = false;
  }
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    const MassRow& a = t.rows[i - 1];
    const MassRow& b = t.rows[i];
    if (b.mass.real() > a.mass.real() + a.error + b.error + tolerance * std::max<Real>(1.0, std::abs(a.mass)))
      t.locally_finite = false;
  }
  return t;
}

}  // namespace chern
