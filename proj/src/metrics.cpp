#include "chern/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace chern {

MetricJet MetricJet::constant(int n, const Mat& m) {
  MetricJet j;
  j.n = n;
  j.value = m;
  const auto r = m.rows();
  for (int a = 0; a < n; ++a) {
    j.d[static_cast<std::size_t>(a)] = Mat::Zero(r, r);
    for (int b = 0; b < n; ++b) j.mixed(a, b) = Mat::Zero(r, r);
  }
  return j;
}

MetricJet inverse_jet(const MetricJet& m) {
  const int n = m.n;
  MetricJet p;
  p.n = n;
  p.value = m.value.inverse();
  const Mat& P = p.value;
  std::array<Mat, kMaxDim> pd, pdb;  // P d_a, P dbar_a
  for (int a = 0; a < n; ++a) {
    pd[static_cast<std::size_t>(a)] = P * m.d[static_cast<std::size_t>(a)];
    pdb[static_cast<std::size_t>(a)] = P * m.dbar(a);
    p.d[static_cast<std::size_t>(a)] = -pd[static_cast<std::size_t>(a)] * P;
  }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      p.mixed(a, b) = pd[static_cast<std::size_t>(a)] * pdb[static_cast<std::size_t>(b)] * P -
                      P * m.mixed(a, b) * P + pdb[static_cast<std::size_t>(b)] * pd[static_cast<std::size_t>(a)] * P;
  return p;
}

MetricJet transpose_jet(const MetricJet& m) {
  MetricJet t;
  t.n = m.n;
  t.value = m.value.transpose();
  for (int a = 0; a < m.n; ++a) {
    t.d[static_cast<std::size_t>(a)] = m.d[static_cast<std::size_t>(a)].transpose();
    for (int b = 0; b < m.n; ++b) t.mixed(a, b) = m.mixed(a, b).transpose();
  }
  return t;
}

MetricJet dual_jet(const MetricJet& m) { return transpose_jet(inverse_jet(m)); }

MetricJet congruence(const MetricJet& m, const Mat& t) {
  MetricJet c;
  c.n = m.n;
  const Mat th = t.adjoint();
  c.value = th * m.value * t;
  for (int a = 0; a < m.n; ++a) {
    c.d[static_cast<std::size_t>(a)] = th * m.d[static_cast<std::size_t>(a)] * t;
    for (int b = 0; b < m.n; ++b) c.mixed(a, b) = th * m.mixed(a, b) * t;
  }
  return c;
}

bool is_positive_definite(const Mat& m, Real relative_floor) {
  const Real scale = m.cwiseAbs().maxCoeff();
  if (!(scale > 0) || !std::isfinite(scale)) return false;
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) return false;
  const auto diag = llt.matrixL().toDenseMatrix().diagonal().real();
  return diag.minCoeff() * diag.minCoeff() > relative_floor * scale;
}

// ---------------------------------------------------------------------------

PolynomialMatrixModel::PolynomialMatrixModel(std::vector<std::vector<BiPoly>> entries)
    : entries_(std::move(entries)) {
  r_ = static_cast<int>(entries_.size());
  if (r_ == 0 || r_ > kMaxRank) throw std::invalid_argument("polynomial metric rank out of range");
  n_ = 0;
  for (const auto& row : entries_) {
    if (static_cast<int>(row.size()) != r_) throw std::invalid_argument("polynomial metric must be square");
    for (const auto& e : row) n_ = std::max(n_, e.dimension());
  }
  if (n_ == 0 || n_ > kMaxDim) throw std::invalid_argument("polynomial metric dimension out of range");
  const auto ur = static_cast<std::size_t>(r_);
  d_.assign(static_cast<std::size_t>(n_), std::vector<std::vector<BiPoly>>(ur, std::vector<BiPoly>(ur)));
  dd_.assign(static_cast<std::size_t>(n_ * n_), std::vector<std::vector<BiPoly>>(ur, std::vector<BiPoly>(ur)));
  for (int a = 0; a < n_; ++a)
    for (std::size_t i = 0; i < ur; ++i)
      for (std::size_t j = 0; j < ur; ++j) {
        d_[static_cast<std::size_t>(a)][i][j] = entries_[i][j].d(a);
        for (int b = 0; b < n_; ++b)
          dd_[static_cast<std::size_t>(a * n_ + b)][i][j] = d_[static_cast<std::size_t>(a)][i][j].dbar(b);
      }
}

Mat PolynomialMatrixModel::value(const Point& z) const {
  Mat m(r_, r_);
  for (int i = 0; i < r_; ++i)
    for (int j = 0; j < r_; ++j) m(i, j) = entries_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](z);
  return m;
}

MetricJet PolynomialMatrixModel::jet(const Point& z) const {
  MetricJet jt;
  jt.n = n_;
  jt.value = value(z);
  const auto eval = [&](const std::vector<std::vector<BiPoly>>& p) {
    Mat m(r_, r_);
    for (int i = 0; i < r_; ++i)
      for (int j = 0; j < r_; ++j) m(i, j) = p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](z);
    return m;
  };
  for (int a = 0; a < n_; ++a) {
    jt.d[static_cast<std::size_t>(a)] = eval(d_[static_cast<std::size_t>(a)]);
    for (int b = 0; b < n_; ++b) jt.mixed(a, b) = eval(dd_[static_cast<std::size_t>(a * n_ + b)]);
  }
  return jt;
}

// ---------------------------------------------------------------------------

Real Degeneracy::residual(const Point& z) const {
  Real r = 0;
  for (const auto& f : equations) r = std::max(r, std::abs(f(z)));
  return r;
}

std::optional<Point> Degeneracy::project(const Point& z0, int iterations) const {
  if (equations.empty()) return std::nullopt;
  const int n = static_cast<int>(z0.size());
  const int m = static_cast<int>(equations.size());
  std::vector<std::vector<HoloPoly>> jac(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    for (int a = 0; a < n; ++a) jac[static_cast<std::size_t>(i)].push_back(equations[static_cast<std::size_t>(i)].derivative(a));
  Point z = z0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXcd f(m);
    Eigen::MatrixXcd J(m, n);
    for (int i = 0; i < m; ++i) {
      f(i) = equations[static_cast<std::size_t>(i)](z);
      for (int a = 0; a < n; ++a) J(i, a) = jac[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)](z);
    }
    if (f.norm() < 1e-14) return z;
    const Eigen::VectorXcd step = J.completeOrthogonalDecomposition().solve(f);
    if (!step.allFinite()) return std::nullopt;
    for (int a = 0; a < n; ++a) z(a) -= step(a);
  }
  if (residual(z) < 1e-10) return z;
  return std::nullopt;
}

Real Degeneracy::distance_estimate(const Point& z) const {
  const auto p = project(z);
  if (!p) return std::numeric_limits<Real>::infinity();
  return (*p - z).norm();
}

std::string Provenance::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Catalog: os << "catalog(" << name; break;
    case Kind::SectionInduced: os << "section-induced(" << name; break;
    case Kind::DualOf: os << "dual-of(" << (parent ? parent->describe() : name); break;
    case Kind::Mollified: os << "mollified(" << (parent ? parent->describe() : "") << ", " << name; break;
    case Kind::AnalyticEps: os << "analytic-eps(" << (parent ? parent->describe() : name); break;
    case Kind::Sampled: os << "sampled(" << name; break;
  }
  for (const auto& [k, v] : params) os << ", " << k << "=" << v;
  os << ")";
  return os.str();
}

// ---------------------------------------------------------------------------

MetricField::MetricField(Chart chart, std::shared_ptr<const MatrixModel> model, Side side, Regularity regularity,
                         Degeneracy degeneracy, Provenance provenance)
    : chart_(std::move(chart)),
      model_(std::move(model)),
      side_(side),
      regularity_(regularity),
      degeneracy_(std::move(degeneracy)),
      provenance_(std::move(provenance)) {
  if (!model_) throw std::invalid_argument("metric model is null");
  if (model_->dimension() != chart_.dimension()) throw ChartMismatch("metric model dimension differs from chart");
  rank_ = model_->rank();
  if (rank_ < 1 || rank_ > kMaxRank) throw std::invalid_argument("metric rank out of range");
}

MetricField MetricField::from_samples(Chart chart, std::vector<Mat> samples, Side side, Regularity regularity,
                                      Degeneracy degeneracy) {
  if (samples.size() != chart.node_count()) throw ChartMismatch("metric samples do not match chart");
  if (samples.empty()) throw std::invalid_argument("no metric samples");
  const auto r = samples[0].rows();
  for (const Mat& m : samples) {
    if (m.rows() != r || m.cols() != r) throw std::invalid_argument("metric samples must share one square shape");
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max<Real>(1.0, m.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("metric sample is not hermitian");
  }
  MetricField f(std::move(chart));
  f.rank_ = static_cast<int>(r);
  if (f.rank_ < 1 || f.rank_ > kMaxRank) throw std::invalid_argument("metric rank out of range");
  f.samples_ = std::make_shared<const std::vector<Mat>>(std::move(samples));
  f.side_ = side;
  f.regularity_ = regularity;
  f.degeneracy_ = std::move(degeneracy);
  f.provenance_.kind = Provenance::Kind::Sampled;
  f.provenance_.name = "samples";
  return f;
}

Mat MetricField::stored(std::size_t node) const {
  if (model_) return model_->value(chart_.point(node));
  return (*samples_)[node];
}

namespace {

Mat dual_of(const Mat& m) {
  Eigen::LLT<Mat> llt(m);
  return llt.solve(Mat::Identity(m.rows(), m.cols())).conjugate();
}

}  // namespace

Mat MetricField::side_matrix(std::size_t node, Side want) const {
  Mat raw = stored(node);
  if (want == side_) return raw;
  if (!is_positive_definite(raw)) throw DegenerateNode("metric is degenerate at node " + std::to_string(node));
  return dual_of(raw);
}

Mat MetricField::matrix(std::size_t node) const { return side_matrix(node, Side::Metric); }
Mat MetricField::dual_matrix(std::size_t node) const { return side_matrix(node, Side::Dual); }
bool MetricField::is_flagged(std::size_t node) const { return !is_positive_definite(stored(node)); }

Mat MetricField::matrix_at(const Point& z) const {
  if (!model_) throw std::logic_error("point evaluation needs a model-backed metric");
  const Mat m = model_->value(z);
  if (side_ == Side::Metric) return m;
  if (!is_positive_definite(m)) throw DegenerateNode("metric is degenerate at the requested point");
  return m.inverse().conjugate();
}

Mat MetricField::dual_matrix_at(const Point& z) const {
  if (!model_) throw std::logic_error("point evaluation needs a model-backed metric");
  const Mat m = model_->value(z);
  if (side_ == Side::Dual) return m;
  if (!is_positive_definite(m)) throw DegenerateNode("metric is degenerate at the requested point");
  return m.inverse().conjugate();
}

MetricJet MetricField::jet_at(const Point& z) const {
  if (!model_) throw std::logic_error("point evaluation needs a model-backed metric");
  MetricJet j = model_->jet(z);
  if (side_ == Side::Metric) return j;
  if (!is_positive_definite(j.value)) throw DegenerateNode("metric is degenerate at the requested point");
  return chern::dual_jet(j);
}

MetricJet MetricField::dual_jet_at(const Point& z) const {
  if (!model_) throw std::logic_error("point evaluation needs a model-backed metric");
  MetricJet j = model_->jet(z);
  if (side_ == Side::Dual) return j;
  if (!is_positive_definite(j.value)) throw DegenerateNode("metric is degenerate at the requested point");
  return chern::dual_jet(j);
}

MetricJet MetricField::side_jet(std::size_t node, Side want, DerivativeMode mode) const {
  if (mode == DerivativeMode::Automatic) mode = model_ ? DerivativeMode::Analytic : DerivativeMode::FiniteDifference;
  if (mode == DerivativeMode::Analytic) {
    const Point z = chart_.point(node);
    return want == Side::Metric ? jet_at(z) : dual_jet_at(z);
  }
  return fd_matrix_jet(chart_, node, rank_, [&](std::size_t k) { return side_matrix(k, want); });
}

MetricJet MetricField::jet(std::size_t node, DerivativeMode mode) const { return side_jet(node, Side::Metric, mode); }
MetricJet MetricField::dual_jet(std::size_t node, DerivativeMode mode) const {
  return side_jet(node, Side::Dual, mode);
}

MetricField MetricField::dual() const {
  MetricField d = *this;
  d.side_ = side_ == Side::Metric ? Side::Dual : Side::Metric;
  Provenance p;
  p.kind = Provenance::Kind::DualOf;
  p.parent = std::make_shared<const Provenance>(provenance_);
  d.provenance_ = std::move(p);
  return d;
}

MetricField MetricField::on_chart(const Chart& chart) const {
  if (!model_) throw std::logic_error("only model-backed metrics can move to another chart");
  MetricField m = *this;
  if (chart.dimension() != chart_.dimension()) throw ChartMismatch("chart dimension differs");
  m.chart_ = chart;
  return m;
}

MetricField MetricField::with_provenance(Provenance p) const {
  MetricField m = *this;
  m.provenance_ = std::move(p);
  return m;
}

MetricField MetricField::with_regularity(Regularity r) const {
  MetricField m = *this;
  m.regularity_ = r;
  return m;
}

// ---------------------------------------------------------------------------

MetricField flat_metric(const Chart& chart, int rank) {
  const int n = chart.dimension();
  auto model = std::make_shared<FunctionModel>(n, rank, [n, rank](const Point&) {
    return MetricJet::constant(n, Mat::Identity(rank, rank));
  });
  Provenance p{Provenance::Kind::Catalog, "flat", {{"rank", rank}}, nullptr};
  return MetricField(chart, model, MetricField::Side::Metric, Regularity::Smooth, {}, p);
}

MetricField diag_exp_metric(const Chart& chart, const std::vector<std::vector<Real>>& weights) {
  const int n = chart.dimension();
  const int r = static_cast<int>(weights.size());
  for (const auto& w : weights)
    if (static_cast<int>(w.size()) != n) throw std::invalid_argument("diag-exp weights need one entry per coordinate");
  auto model = std::make_shared<FunctionModel>(n, r, [n, r, weights](const Point& z) {
    MetricJet j = MetricJet::constant(n, Mat::Zero(r, r));
    for (int i = 0; i < r; ++i) {
      const auto& w = weights[static_cast<std::size_t>(i)];
      Real phi = 0;
      for (int a = 0; a < n; ++a) phi += w[static_cast<std::size_t>(a)] * std::norm(z(a));
      const Real e = std::exp(-phi);
      j.value(i, i) = e;
      for (int a = 0; a < n; ++a) {
        const Real wa = w[static_cast<std::size_t>(a)];
        j.d[static_cast<std::size_t>(a)](i, i) = -wa * std::conj(z(a)) * e;
        for (int b = 0; b < n; ++b) {
          const Real wb = w[static_cast<std::size_t>(b)];
          j.mixed(a, b)(i, i) = (wa * wb * std::conj(z(a)) * z(b) - (a == b ? wa : 0.0)) * e;
        }
      }
    }
    return j;
  });
  Provenance p{Provenance::Kind::Catalog, "diag-exp", {{"rank", r}}, nullptr};
  return MetricField(chart, model, MetricField::Side::Metric, Regularity::Smooth, {}, p);
}

MetricField fubini_study_metric(const Chart& chart) {
  const int n = chart.dimension();
  auto model = std::make_shared<FunctionModel>(n, 1, [n](const Point& z) {
    // h = exp(-phi), phi = log(1 + |z|^2)
    const Real s = 1.0 + z.squaredNorm();
    const Real h = 1.0 / s;
    MetricJet j = MetricJet::constant(n, Mat::Constant(1, 1, h));
    for (int a = 0; a < n; ++a) {
      const Complex phi_a = std::conj(z(a)) / s;
      j.d[static_cast<std::size_t>(a)](0, 0) = -phi_a * h;
      for (int b = 0; b < n; ++b) {
        const Complex phi_bbar = z(b) / s;
        const Complex phi_ab = (a == b ? 1.0 / s : 0.0) - std::conj(z(a)) * z(b) / (s * s);
        j.mixed(a, b)(0, 0) = (phi_a * phi_bbar - phi_ab) * h;
      }
    }
    return j;
  });
  Provenance p{Provenance::Kind::Catalog, "fubini-study-o1", {}, nullptr};
  return MetricField(chart, model, MetricField::Side::Metric, Regularity::Smooth, {}, p);
}

MetricPair from_sections(const Chart& chart, const SectionMatrix& s, Degeneracy v) {
  if (s.dimension() != chart.dimension()) throw ChartMismatch("section matrix dimension differs from chart");
  auto model = std::make_shared<PolynomialMatrixModel>(s.gram());
  const Regularity reg = v.empty() ? Regularity::Smooth : Regularity::Singular;
  Provenance p{Provenance::Kind::SectionInduced, std::to_string(s.rows()) + "x" + std::to_string(s.cols()),
               {{"codim", v.codim}}, nullptr};
  MetricField h(chart, model, MetricField::Side::Dual, reg, std::move(v), p);
  MetricField hstar = h.dual();
  return {h, hstar};
}

MetricField dual_metric(const MetricField& h) { return h.dual(); }

MetricField direct_sum(const MetricField& h, const MetricField& g) {
  if (!h.has_analytic_jet() || !g.has_analytic_jet()) throw std::logic_error("direct_sum needs model-backed metrics");
  if (h.dimension() != g.dimension()) throw ChartMismatch("direct_sum of metrics over different dimensions");
  const int n = h.dimension();
  const int r1 = h.rank(), r2 = g.rank();
  if (r1 + r2 > kMaxRank) throw std::invalid_argument("direct sum rank exceeds the supported maximum");
  auto model = std::make_shared<FunctionModel>(n, r1 + r2, [h, g, n, r1, r2](const Point& z) {
    const MetricJet a = h.jet_at(z), b = g.jet_at(z);
    auto block = [&](const Mat& x, const Mat& y) {
      Mat m = Mat::Zero(r1 + r2, r1 + r2);
      m.topLeftCorner(r1, r1) = x;
      m.bottomRightCorner(r2, r2) = y;
      return m;
    };
    MetricJet j;
    j.n = n;
    j.value = block(a.value, b.value);
    for (int p = 0; p < n; ++p) {
      j.d[static_cast<std::size_t>(p)] = block(a.d[static_cast<std::size_t>(p)], b.d[static_cast<std::size_t>(p)]);
      for (int q = 0; q < n; ++q) j.mixed(p, q) = block(a.mixed(p, q), b.mixed(p, q));
    }
    return j;
  });
  const Regularity reg =
      h.regularity() == Regularity::Smooth && g.regularity() == Regularity::Smooth ? Regularity::Smooth
                                                                                   : Regularity::Singular;
  // V(h) union V(g) is cut out by the pairwise products of the equations.
  Degeneracy v;
  if (h.degeneracy().empty()) {
    v = g.degeneracy();
  } else if (g.degeneracy().empty()) {
    v = h.degeneracy();
  } else {
    for (const auto& e : h.degeneracy().equations)
      for (const auto& f : g.degeneracy().equations) v.equations.push_back(e * f);
    v.codim = std::min(h.degeneracy().codim, g.degeneracy().codim);
  }
  Provenance p{Provenance::Kind::Catalog, "direct-sum(" + h.provenance().describe() + ", " + g.provenance().describe() + ")",
               {}, nullptr};
  return MetricField(h.chart(), model, MetricField::Side::Metric, reg, std::move(v), p);
}

DegeneracyReport check_degeneracy(const MetricField& h, Real delta, int samples, std::uint64_t seed, Real vanish_tol,
                                  Real away_floor) {
  DegeneracyReport rep;
  rep.min_det_away = std::numeric_limits<Real>::infinity();
  const Chart& chart = h.chart();
  const int n = chart.dimension();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> unit(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, chart.node_count() - 1);
  auto det_at = [&](const Point& z) { return std::abs(h.dual_matrix_at(z).determinant()); };
  for (int s = 0; s < samples; ++s) {
    Point z(n);
    for (int a = 0; a < n; ++a)
      z(a) = chart.center()[static_cast<std::size_t>(a)] +
             chart.radius()[static_cast<std::size_t>(a)] * Complex(unit(rng), unit(rng));
    if (const auto p = h.degeneracy().project(z)) {
      rep.max_det_on_v = std::max(rep.max_det_on_v, det_at(*p));
      ++rep.points_on_v;
    }
    const std::size_t node = pick(rng);
    const Point zn = chart.point(node);
    if (h.degeneracy().distance_estimate(zn) > delta) {
      rep.min_det_away = std::min(rep.min_det_away, det_at(zn));
      ++rep.nodes_away;
    }
  }
  rep.pass = (h.degeneracy().empty() || (rep.points_on_v > 0 && rep.max_det_on_v <= vanish_tol)) &&
             rep.min_det_away > away_floor;
  return rep;
}

// ---------------------------------------------------------------------------

std::array<Mat, kMaxDim * kMaxDim> curvature_at(const MetricJet& h) {
  const int n = h.n;
  std::array<Mat, kMaxDim * kMaxDim> theta;
  const Mat P = h.value.inverse();
  for (int a = 0; a < n; ++a) {
    const Mat pda = P * h.d[static_cast<std::size_t>(a)];
    for (int b = 0; b < n; ++b)
      theta[static_cast<std::size_t>(a * kMaxDim + b)] = P * h.dbar(b) * pda - P * h.mixed(a, b);
  }
  return theta;
}

namespace {

// (i/2pi) Theta as an r x r matrix of (1,1) point forms.
std::vector<PointForm> normalized_curvature_entries(const MetricJet& h) {
  const int n = h.n;
  const auto r = h.value.rows();
  const auto theta = curvature_at(h);
  const Complex f = kI / (2 * kPi);
  std::vector<PointForm> A(static_cast<std::size_t>(r * r), PointForm(n, 1, 1));
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) {
      PointForm& e = A[static_cast<std::size_t>(i * r + j)];
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) e.c(a * n + b) = f * theta[static_cast<std::size_t>(a * kMaxDim + b)](i, j);
    }
  return A;
}

int permutation_sign(const std::vector<int>& p) {
  int inv = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j)
      if (p[i] > p[j]) ++inv;
  return inv % 2 == 0 ? 1 : -1;
}

}  // namespace

std::vector<PointForm> chern_point_forms(const MetricJet& h, int up_to) {
  const int n = h.n;
  const int r = static_cast<int>(h.value.rows());
  const auto A = normalized_curvature_entries(h);
  std::vector<PointForm> c;
  c.push_back(PointForm::scalar(n, 1.0));
  for (int k = 1; k <= up_to; ++k) {
    PointForm ck(n, k, k);
    if (k > r) {  // c_k vanishes above the rank
      c.push_back(ck);
      continue;
    }
    // Principal k x k minors of A, expanded by permutations.
    std::vector<int> subset(static_cast<std::size_t>(k));
    std::iota(subset.begin(), subset.end(), 0);
    while (true) {
      std::vector<int> perm = subset;
      do {
        PointForm term = A[static_cast<std::size_t>(subset[0] * r + perm[0])];
        for (int t = 1; t < k; ++t)
          term = wedge(term, A[static_cast<std::size_t>(subset[static_cast<std::size_t>(t)] * r + perm[static_cast<std::size_t>(t)])]);
        ck.c += static_cast<Real>(permutation_sign(perm)) * term.c;
      } while (std::next_permutation(perm.begin(), perm.end()));
      int pos = k - 1;
      while (pos >= 0 && subset[static_cast<std::size_t>(pos)] == r - k + pos) --pos;
      if (pos < 0) break;
      ++subset[static_cast<std::size_t>(pos)];
      for (int t = pos + 1; t < k; ++t) subset[static_cast<std::size_t>(t)] = subset[static_cast<std::size_t>(t) - 1] + 1;
    }
    c.push_back(ck);
  }
  return c;
}

std::vector<PointForm> chern_character_point_forms(const MetricJet& h, int up_to) {
  const int n = h.n;
  const int r = static_cast<int>(h.value.rows());
  const auto A = normalized_curvature_entries(h);
  std::vector<PointForm> ch;
  ch.push_back(PointForm::scalar(n, static_cast<Real>(r)));
  std::vector<PointForm> power = A;
  Real factorial = 1;
  for (int k = 1; k <= up_to; ++k) {
    if (k > 1) {
      std::vector<PointForm> next(static_cast<std::size_t>(r * r), PointForm(n, k, k));
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
          for (int l = 0; l < r; ++l)
            next[static_cast<std::size_t>(i * r + j)].c +=
                wedge(power[static_cast<std::size_t>(i * r + l)], A[static_cast<std::size_t>(l * r + j)]).c;
      power = std::move(next);
      factorial *= k;
    }
    PointForm tr(n, k, k);
    for (int i = 0; i < r; ++i) tr.c += power[static_cast<std::size_t>(i * r + i)].c;
    tr.c /= factorial;
    ch.push_back(tr);
  }
  return ch;
}

PointForm log_det_ddc_point(const MetricJet& g) {
  const int n = g.n;
  const Mat Q = g.value.inverse();
  PointForm f(n, 1, 1);
  const Complex c = kI / (2 * kPi);
  for (int a = 0; a < n; ++a) {
    const Mat qda = Q * g.d[static_cast<std::size_t>(a)];
    for (int b = 0; b < n; ++b)
      f.c(a * n + b) = c * ((Q * g.mixed(a, b)).trace() - (Q * g.dbar(b) * qda).trace());
  }
  return f;
}

// ---------------------------------------------------------------------------

namespace {

void require_smooth(const MetricField& h, const char* what) {
  if (h.regularity() != Regularity::Smooth)
    throw std::invalid_argument(std::string(what) + " needs a smooth metric; regularize it first");
}

}  // namespace

std::vector<std::vector<FormField>> curvature(const MetricField& h, DerivativeMode mode) {
  require_smooth(h, "curvature");
  const Chart& chart = h.chart();
  const int n = chart.dimension();
  const int r = h.rank();
  std::vector<std::vector<FormField>> theta(static_cast<std::size_t>(r),
                                            std::vector<FormField>(static_cast<std::size_t>(r), FormField(chart, 1, 1)));
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    const auto t = curvature_at(h.jet(node, mode));
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            theta[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].coeffs()(a * n + b, static_cast<Eigen::Index>(node)) =
                t[static_cast<std::size_t>(a * kMaxDim + b)](i, j);
  }
  return theta;
}

NodeMask region_mask(const Chart& chart, const Region& region) {
  NodeMask m(chart.node_count(), 0);
  for (std::size_t k = 0; k < chart.node_count(); ++k) m[k] = region.contains(chart, k) ? 1 : 0;
  return m;
}

void check_mask(const Chart& chart, const NodeMask& support) {
  if (!support.empty() && support.size() != chart.node_count()) throw ChartMismatch("node mask does not match chart");
}

std::vector<FormField> chern_forms(const MetricField& h, int up_to, DerivativeMode mode,
                                   const NodeMask& support) {
  require_smooth(h, "chern_forms");
  const Chart& chart = h.chart();
  if (up_to < 0 || up_to > std::min(h.rank(), chart.dimension()))
    throw DegreeError("Chern form degree must lie in [0, min(rank, dimension)]");
  std::vector<FormField> out;
  for (int k = 0; k <= up_to; ++k) out.emplace_back(chart, k, k);
  check_mask(chart, support);
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    if (!support.empty() && !support[node]) continue;
    const auto c = chern_point_forms(h.jet(node, mode), up_to);
    for (int k = 0; k <= up_to; ++k) out[static_cast<std::size_t>(k)].set_point_form(node, c[static_cast<std::size_t>(k)]);
  }
  return out;
}

std::vector<FormField> chern_character_forms(const MetricField& h, int up_to, DerivativeMode mode,
                                   const NodeMask& support) {
  require_smooth(h, "chern_character_forms");
  const Chart& chart = h.chart();
  if (up_to < 0 || up_to > chart.dimension()) throw DegreeError("Chern character degree out of range");
  std::vector<FormField> out;
  for (int k = 0; k <= up_to; ++k) out.emplace_back(chart, k, k);
  check_mask(chart, support);
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    if (!support.empty() && !support[node]) continue;
    const auto c = chern_character_point_forms(h.jet(node, mode), up_to);
    for (int k = 0; k <= up_to; ++k) out[static_cast<std::size_t>(k)].set_point_form(node, c[static_cast<std::size_t>(k)]);
  }
  return out;
}

FormField first_chern_via_det(const MetricField& h, DerivativeMode mode) {
  const Chart& chart = h.chart();
  if (mode == DerivativeMode::Automatic) mode = h.has_analytic_jet() ? DerivativeMode::Analytic : DerivativeMode::FiniteDifference;
  if (mode == DerivativeMode::Analytic) {
    FormField out(chart, 1, 1);
    for (std::size_t node = 0; node < chart.node_count(); ++node) {
      const MetricJet g = h.dual_jet(node, mode);
      if (!is_positive_definite(g.value)) throw DegenerateNode("det h* vanishes at node " + std::to_string(node));
      out.set_point_form(node, log_det_ddc_point(g));
    }
    return out;
  }
  RealField::Values v(static_cast<Eigen::Index>(chart.node_count()));
  std::vector<std::size_t> bad;
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    const Real det = h.dual_matrix(node).determinant().real();
    if (det > 0) {
      v(static_cast<Eigen::Index>(node)) = std::log(det);
    } else {
      v(static_cast<Eigen::Index>(node)) = 0;
      bad.push_back(node);
    }
  }
  RealField u(chart, std::move(v));
  for (std::size_t node : bad) u.flag_singular(node);
  return ddc(u);
}

namespace {

template <class Form, class Make, class Value>
Form evaluate_class_impl(const CharClassPoly& p, int n, Make&& zero, Value&& value) {
  const int g = p.is_zero() ? 0 : p.grade();
  if (g > n) throw DegreeError("class degree exceeds the dimension");
  Form out = zero(g);
  for (const auto& [mono, coeff] : p.terms()) {
    Form term = zero(0);
    term.c.setConstant(1.0);
    for (const auto& [var, e] : mono) {
      const Form v = value(var);
      for (int i = 0; i < e; ++i) term = wedge(term, v);
    }
    out.c += static_cast<Real>(coeff) * term.c;
  }
  return out;
}

}  // namespace

PointForm evaluate_class(const CharClassPoly& p, int n, const std::function<PointForm(const Variable&)>& value) {
  return evaluate_class_impl<PointForm>(p, n, [n](int k) { return PointForm(n, k, k); }, value);
}

FormField evaluate_class(const CharClassPoly& p, const Chart& chart,
                         const std::function<FormField(const Variable&)>& value) {
  const int n = chart.dimension();
  const int g = p.is_zero() ? 0 : p.grade();
  if (g > n) throw DegreeError("class degree exceeds the dimension");
  FormField out(chart, g, g);
  for (const auto& [mono, coeff] : p.terms()) {
    FormField term = FormField::constant(chart, 1.0);
    for (const auto& [var, e] : mono) {
      const FormField v = value(var);
      for (int i = 0; i < e; ++i) term = wedge(term, v);
    }
    out += Complex(static_cast<Real>(coeff)) * term;
  }
  return out;
}

GriffithsReport griffiths_diagnostic(const MetricField& h, std::size_t samples, std::uint64_t seed, Real tolerance,
                                     DerivativeMode mode) {
  GriffithsReport rep;
  rep.min_levi = std::numeric_limits<Real>::infinity();
  const Chart& chart = h.chart();
  const int n = chart.dimension();
  const int r = h.rank();
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> g;
  std::uniform_int_distribution<std::size_t> pick(0, chart.node_count() - 1);
  Real scale = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t node = pick(rng);
    MetricJet G;
    try {
      G = h.dual_jet(node, mode);
    } catch (const DegenerateNode&) {
      continue;
    }
    Eigen::VectorXcd u(r);
    for (int i = 0; i < r; ++i) u(i) = Complex(g(rng), g(rng));
    u.normalize();
    Eigen::MatrixXcd levi(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) levi(a, b) = u.dot(G.mixed(a, b) * u);
    // Hermitian part guards against round-off in finite-difference jets.
    const Eigen::MatrixXcd herm = 0.5 * (levi + levi.adjoint());
    const Real lam = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(herm).eigenvalues().minCoeff();
    rep.min_levi = std::min(rep.min_levi, lam);
    scale = std::max(scale, G.value.cwiseAbs().maxCoeff());
    ++rep.samples;
  }
  rep.pass = rep.samples > 0 && rep.min_levi >= -tolerance * std::max<Real>(1.0, scale);
  return rep;
}

}  // namespace chern
