#include "chern/projbundle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace chern {

FiberVector FiberNode::affine() const {
  const auto r = homogeneous.size();
  FiberVector w(r - 1);
  for (Eigen::Index i = 0, k = 0; i < r; ++i)
    if (i != chart) w(k++) = homogeneous(i);
  return w;
}

Real fubini_study_density(const FiberNode& node) {
  const int f = static_cast<int>(node.homogeneous.size()) - 1;
  Real fact = 1;
  for (int i = 2; i <= f; ++i) fact *= i;
  const Real s = node.homogeneous.squaredNorm();  // 1 + |w|^2
  return fact / std::pow(kPi, f) * std::pow(s, -(f + 1));
}


FiberAtlas FiberAtlas::build(int rank, const FiberQuadratureOptions& options) {
  if (rank < 1 || rank > kMaxRank) throw std::invalid_argument("fiber rank out of range");
  FiberAtlas a;
  a.rank_ = rank;
  FiberRule rule = options.rule;
  if (rule == FiberRule::Automatic) rule = rank <= 3 ? FiberRule::Product : FiberRule::MonteCarlo;
  if (rank == 1) {
    FiberNode p;
    p.homogeneous = FiberVector::Ones(1);
    p.weight = 1;
    a.nodes_.push_back(p);
    a.calibration_.rule = "point";
  } else if (rule == FiberRule::Product && rank == 2) {
    // Segre minors (n <= 3) agree with a 16 x 24 rule to roundoff already
    // at 3 x 6; 4 x 7 keeps one order of slack.
    const int nu = options.radial > 0 ? options.radial : 4;
    const int nt = options.angular > 0 ? options.angular : 7;
    const auto [u, wu] = gauss_legendre(nu);
    for (std::size_t i = 0; i < u.size(); ++i) {
      // u = cos t and w = tan(t/2) e^{i theta}; the FS measure is du dtheta / 4pi.
      const Real rho = std::sqrt((1 - u[i]) / (1 + u[i]));
      for (int j = 0; j < nt; ++j) {
        FiberNode p;
        p.homogeneous = FiberVector(2);
        p.homogeneous << 1.0, std::polar(rho, 2 * kPi * j / nt);
        const Real s = 1 + rho * rho;
        p.weight = wu[i] * (2 * kPi / nt) * s * s / 4;
        a.nodes_.push_back(p);
      }
    }
    a.calibration_.rule = "product-sphere";
  } else if (rule == FiberRule::Product && rank == 3) {
    const auto pts = simplex_torus_rule(2, options.radial > 0 ? options.radial : 4, options.angular > 0 ? options.angular : 6, false);
    for (const auto& [pt, fs_weight] : pts) {
      const FiberVector v = pt.head(3);
      Eigen::Index c = 0;
      v.cwiseAbs().maxCoeff(&c);
      FiberNode p;
      p.chart = static_cast<int>(c);
      p.homogeneous = v / v(c);
      p.homogeneous(c) = 1.0;
      p.weight = fs_weight / fubini_study_density(p);
      a.nodes_.push_back(p);
    }
    a.calibration_.rule = "product-simplex-torus";
  } else if (rule == FiberRule::MonteCarlo) {
    if (options.samples == 0) throw std::invalid_argument("Monte Carlo fiber rule needs samples");
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<Real> nd;
    for (std::size_t s = 0; s < options.samples; ++s) {
      FiberVector v(rank);
      for (int i = 0; i < rank; ++i) v(i) = Complex(nd(rng), nd(rng));
      Eigen::Index c = 0;
      v.cwiseAbs().maxCoeff(&c);
      FiberNode p;
      p.chart = static_cast<int>(c);
      p.homogeneous = v / v(c);
      p.homogeneous(c) = 1.0;
      p.weight = 1.0 / (static_cast<Real>(options.samples) * fubini_study_density(p));
      a.nodes_.push_back(p);
    }
    a.calibration_.rule = "monte-carlo";
  } else {
    throw std::invalid_argument("product fiber rules exist for rank <= 3 only");
  }
  a.calibrate(options.tolerance);
  const auto count = static_cast<Eigen::Index>(a.nodes_.size());
  a.columns_.resize(rank, count);
  a.outer_.resize(rank * rank, count);
  for (Eigen::Index t = 0; t < count; ++t) {
    const FiberVector& w = a.nodes_[static_cast<std::size_t>(t)].homogeneous;
    a.columns_.col(t) = w;
    for (int j = 0; j < rank; ++j)
      for (int i = 0; i < rank; ++i) a.outer_(i + rank * j, t) = std::conj(w(i)) * w(j);
  }
  return a;
}

void FiberAtlas::calibrate(Real tolerance) {
  const int r = rank_;
  std::vector<Real> share(static_cast<std::size_t>(r), 0.0);
  std::vector<Real> moments;
  Real mass = 0, moment = 0, moment_last = 0;
  for (const auto& p : nodes_) {
    const Real m = p.weight * fubini_study_density(p);
    const Real v = std::norm(p.homogeneous(0)) / p.homogeneous.squaredNorm();
    const Real u = std::norm(p.homogeneous(r - 1)) / p.homogeneous.squaredNorm();
    mass += m;
    moment += m * v * v;
    moment_last += m * u * u;
    moments.push_back(v * v);
    share[static_cast<std::size_t>(p.chart)] += m;
  }
  FiberCalibration& c = calibration_;
  c.nodes = nodes_.size();
  c.mass = mass;
  c.mass_error = std::abs(mass - 1.0);
  c.moment_error = std::max(std::abs(moment - 2.0 / (r * (r + 1))), std::abs(moment_last - 2.0 / (r * (r + 1))));
  // Chart shares are quadrature quantities only when each chart carries its
  // own rule (one chart) or for sampling; the simplex-torus rule assigns
  // charts after the fact.
  c.worst_chart_error = 0;
  if (c.rule != "product-simplex-torus") {
    const bool single_chart = c.rule == "product-sphere" || c.rule == "point";
    for (int i = 0; i < r; ++i) {
      const Real exact = single_chart ? (i == 0 ? 1.0 : 0.0) : 1.0 / r;
      c.worst_chart_error = std::max(c.worst_chart_error, std::abs(share[static_cast<std::size_t>(i)] - exact));
    }
  }
  c.tolerance = tolerance;
  if (c.rule == "monte-carlo") {
    // Sampling error: five standard errors of the chart shares and the moment.
    const Real n = static_cast<Real>(nodes_.size());
    Real mean = 0, var = 0;
    for (Real m : moments) mean += m;
    mean /= n;
    for (Real m : moments) var += (m - mean) * (m - mean);
    var /= std::max<Real>(1.0, n - 1);
    const Real share_se = std::sqrt((1.0 / r) * (1 - 1.0 / r) / n);
    c.tolerance = std::max(tolerance, 5 * std::max(share_se, std::sqrt(var / n)));
  }
  c.pass = c.mass_error <= c.tolerance && c.worst_chart_error <= c.tolerance && c.moment_error <= c.tolerance;
}

// ---------------------------------------------------------------------------

Real induced_phi_at(const Mat& g, const FiberVector& w) {
  if (w.norm() == 0) throw std::invalid_argument("induced_phi: zero fiber vector");
  const Real q = w.dot(g * w).real();
  if (!(q > 0)) return -std::numeric_limits<Real>::infinity();
  return std::log(q);
}

TotalMatrix induced_phi_hessian(const MetricJet& g, const FiberNode& node) {
  // Plain loops: r and n are tiny and this runs per base node per fiber node.
  const int n = g.n;
  const auto r = static_cast<int>(g.value.rows());
  const int f = r - 1;
  const Complex* w = node.homogeneous.data();
  std::array<Complex, kMaxRank> wc{};
  for (int i = 0; i < r; ++i) wc[static_cast<std::size_t>(i)] = std::conj(w[i]);
  // v = M w for a column-major r x r block, then w^H v.
  const auto apply = [&](const Mat& m, Complex* v) {
    const Complex* d = m.data();
    for (int i = 0; i < r; ++i) v[i] = 0;
    for (int j = 0; j < r; ++j)
      for (int i = 0; i < r; ++i) v[i] += d[j * r + i] * w[j];
  };
  const auto form = [&](const Complex* v) {
    Complex s = 0;
    for (int i = 0; i < r; ++i) s += wc[static_cast<std::size_t>(i)] * v[i];
    return s;
  };
  Complex gw[kMaxRank];
  apply(g.value, gw);
  const Real q = form(gw).real();
  if (!(q > 0)) throw DegenerateNode("induced_phi: w^H G w vanishes");
  const Real iq = 1 / q, iq2 = iq * iq;
  Complex dw[kMaxDim][kMaxRank], qa[kMaxDim];
  for (int a = 0; a < n; ++a) {
    apply(g.d[static_cast<std::size_t>(a)], dw[a]);
    qa[a] = form(dw[a]);
  }
  // Affine slots of the fiber.
  std::array<int, kMaxRank> slot{};
  for (int i = 0, k = 0; i < r; ++i)
    if (i != node.chart) slot[static_cast<std::size_t>(k++)] = i;

  TotalMatrix H(n + f, n + f);
  Complex v[kMaxRank];
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      apply(g.mixed(a, b), v);
      H(a, b) = form(v) * iq - qa[a] * std::conj(qa[b]) * iq2;
    }
    for (int i = 0; i < f; ++i) {
      const int s = slot[static_cast<std::size_t>(i)];
      H(a, n + i) = dw[a][s] * iq - qa[a] * gw[s] * iq2;
      H(n + i, a) = std::conj(H(a, n + i));
    }
  }
  for (int j = 0; j < f; ++j) {
    const int sj = slot[static_cast<std::size_t>(j)];
    for (int i = 0; i < f; ++i) {
      const int si = slot[static_cast<std::size_t>(i)];
      H(n + j, n + i) = g.value(si, sj) * iq - std::conj(gw[sj]) * gw[si] * iq2;
    }
  }
  return H;
}

InducedPhi::InducedPhi(MetricField hstar, FiberAtlas atlas) : hstar_(std::move(hstar)), atlas_(std::move(atlas)) {
  if (hstar_.rank() != atlas_.rank()) throw std::invalid_argument("fiber atlas rank differs from the metric rank");
  const std::size_t nodes = hstar_.chart().node_count();
  values_.resize(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(atlas_.size()));
  for (std::size_t k = 0; k < nodes; ++k) {
    const Mat g = hstar_.matrix(k);
    for (std::size_t j = 0; j < atlas_.size(); ++j)
      values_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
          induced_phi_at(g, atlas_.nodes()[j].homogeneous);
  }
}

TotalMatrix InducedPhi::hessian(std::size_t node, std::size_t fiber_node, DerivativeMode mode) const {
  return induced_phi_hessian(hstar_.jet(node, mode), atlas_.nodes()[fiber_node]);
}

InducedPhi induced_phi(const MetricField& hstar, const FiberAtlas& atlas) { return InducedPhi(hstar, atlas); }

// ---------------------------------------------------------------------------

TotalSpaceForm::TotalSpaceForm(Chart base, FiberAtlas atlas, int p, int q)
    : base_(std::move(base)), atlas_(std::move(atlas)), p_(p), q_(q) {
  const int dim = total_dimension();
  if (dim > kMaxDim) throw DegreeError("total space dimension exceeds the supported maximum");
  if (p < 0 || q < 0 || p > dim || q > dim) throw DegreeError("total space bidegree out of range");
  samples_.assign(base_.node_count() * atlas_.size(), PointForm(dim, p, q));
}

TotalSpaceForm TotalSpaceForm::sample(const Chart& base, const FiberAtlas& atlas, int p, int q,
                                      const std::function<PointForm(std::size_t, const FiberNode&)>& fn) {
  TotalSpaceForm t(base, atlas, p, q);
  for (std::size_t k = 0; k < base.node_count(); ++k)
    for (std::size_t j = 0; j < atlas.size(); ++j) {
      PointForm f = fn(k, atlas.nodes()[j]);
      if (f.n != t.total_dimension() || f.p != p || f.q != q)
        throw DegreeError("sampled total space form has the wrong shape");
      t.at(k, j) = std::move(f);
    }
  return t;
}

TotalSpaceForm TotalSpaceForm::pullback(const FormField& gamma, const FiberAtlas& atlas) {
  TotalSpaceForm t(gamma.chart(), atlas, gamma.p(), gamma.q());
  const int n = gamma.dimension();
  const FormAlgebra& base = form_algebra(n);
  const FormAlgebra& total = form_algebra(t.total_dimension());
  for (std::size_t k = 0; k < gamma.chart().node_count(); ++k) {
    const PointForm g = gamma.point_form(k);
    PointForm lifted(t.total_dimension(), gamma.p(), gamma.q());
    for (IndexMask I : base.subsets(gamma.p()))
      for (IndexMask J : base.subsets(gamma.q()))
        lifted.c(total.component(gamma.p(), gamma.q(), I, J)) = g.c(base.component(gamma.p(), gamma.q(), I, J));
    for (std::size_t j = 0; j < atlas.size(); ++j) t.at(k, j) = lifted;
  }
  return t;
}

namespace {

IndexMask fiber_mask(int n, int f) { return ((IndexMask{1} << f) - 1) << n; }

}  // namespace

Complex fiber_integration_factor(int fiber_dim, int base_q) {
  const int f = fiber_dim;
  Complex factor = ((f * base_q) % 2 == 0 ? 1.0 : -1.0) * ((f * (f - 1) / 2) % 2 == 0 ? 1.0 : -1.0);
  for (int i = 0; i < f; ++i) factor *= Complex(0, -2);
  return factor;
}

TotalSpaceForm TotalSpaceForm::fiber_volume(const Chart& base, const FiberAtlas& atlas) {
  const int n = base.dimension();
  const int f = atlas.fiber_dimension();
  const IndexMask F = fiber_mask(n, f);
  const Complex factor = fiber_integration_factor(f, 0);
  return sample(base, atlas, f, f, [&](std::size_t, const FiberNode& node) {
    PointForm v(n + f, f, f);
    v.at(F, F) = fubini_study_density(node) / factor;
    return v;
  });
}

TotalSpaceForm TotalSpaceForm::induced_curvature(const MetricField& h, const FiberAtlas& atlas, DerivativeMode mode) {
  if (h.rank() != atlas.rank()) throw std::invalid_argument("fiber atlas rank differs from the metric rank");
  const Chart& base = h.chart();
  const int dim = base.dimension() + atlas.fiber_dimension();
  TotalSpaceForm t(base, atlas, 1, 1);
  for (std::size_t k = 0; k < base.node_count(); ++k) {
    const MetricJet g = h.dual_jet(k, mode);
    for (std::size_t j = 0; j < atlas.size(); ++j) {
      const TotalMatrix H = induced_phi_hessian(g, atlas.nodes()[j]);
      PointForm& phi = t.at(k, j);
      for (int A = 0; A < dim; ++A)
        for (int B = 0; B < dim; ++B) phi.at(IndexMask{1} << A, IndexMask{1} << B) = kI / (2 * kPi) * H(A, B);
    }
  }
  return t;
}

TotalSpaceForm wedge(const TotalSpaceForm& a, const TotalSpaceForm& b) {
  if (!(a.base() == b.base()) || a.atlas().size() != b.atlas().size() || a.atlas().rank() != b.atlas().rank())
    throw ChartMismatch("total space forms live on different samplings");
  TotalSpaceForm t(a.base(), a.atlas(), a.p() + b.p(), a.q() + b.q());
  for (std::size_t k = 0; k < a.base().node_count(); ++k)
    for (std::size_t j = 0; j < a.atlas().size(); ++j) t.at(k, j) = wedge(a.at(k, j), b.at(k, j));
  return t;
}

FormField fiber_pushforward(const TotalSpaceForm& eta) {
  const FiberAtlas& atlas = eta.atlas();
  if (!atlas.calibration().pass) throw std::runtime_error("fiber quadrature is not calibrated");
  const Chart& base = eta.base();
  const int n = base.dimension();
  const int f = atlas.fiber_dimension();
  const int pb = eta.p() - f, qb = eta.q() - f;
  if (pb < 0 || qb < 0 || pb > n || qb > n)
    throw DegreeError("push-forward needs fiber degree (r-1, r-1) and base degree at most n");
  FormField out(base, pb, qb);
  const FormAlgebra& alg = form_algebra(n);
  const FormAlgebra& total = form_algebra(n + f);
  const IndexMask F = fiber_mask(n, f);
  const Complex factor = fiber_integration_factor(f, qb);
  for (std::size_t k = 0; k < base.node_count(); ++k) {
    PointForm pf(n, pb, qb);
    for (IndexMask I : alg.subsets(pb))
      for (IndexMask J : alg.subsets(qb)) {
        const int comp = total.component(eta.p(), eta.q(), I | F, J | F);
        Complex acc = 0;
        for (std::size_t j = 0; j < atlas.size(); ++j) acc += atlas.nodes()[j].weight * eta.at(k, j).c(comp);
        pf.at(I, J) = factor * acc;
      }
    out.set_point_form(k, pf);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct MinorPlan {
  // For each k: pairs (I, J) of base subsets and the row/column index lists
  // of the (k+f) x (k+f) minor.
  struct Entry {
    IndexMask I, J;
    std::array<int, kMaxDim + kMaxRank> rows, cols;
  };
  std::vector<std::vector<Entry>> by_degree;
};

MinorPlan make_plan(int n, int f, int up_to) {
  MinorPlan plan;
  const FormAlgebra& alg = form_algebra(n);
  for (int k = 0; k <= up_to; ++k) {
    std::vector<MinorPlan::Entry> entries;
    for (IndexMask I : alg.subsets(k))
      for (IndexMask J : alg.subsets(k)) {
        MinorPlan::Entry e{I, J, {}, {}};
        int ri = 0, ci = 0;
        for (int a = 0; a < n; ++a) {
          if (I & (IndexMask{1} << a)) e.rows[static_cast<std::size_t>(ri++)] = a;
          if (J & (IndexMask{1} << a)) e.cols[static_cast<std::size_t>(ci++)] = a;
        }
        for (int i = 0; i < f; ++i) {
          e.rows[static_cast<std::size_t>(ri++)] = n + i;
          e.cols[static_cast<std::size_t>(ci++)] = n + i;
        }
        entries.push_back(e);
      }
    plan.by_degree.push_back(std::move(entries));
  }
  return plan;
}

// Determinant of the minor of a on the listed rows and columns.
Complex minor_determinant(const TotalMatrix& a, const int* rw, const int* cl, int m) {
  const auto e = [&](int i, int j) { return a(rw[i], cl[j]); };
  switch (m) {
    case 1: return e(0, 0);
    case 2: return e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0);
    case 3:
      return e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0)) +
             e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0));
    default: {
      TotalMatrix sub(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) sub(i, j) = e(i, j);
      return sub.determinant();
    }
  }
}

// Coefficient of Omega^m for Omega = (i/2pi) sum H_AB dZ_A ^ dZbar_B in
// front of det(H_{I,J}) dZ_I ^ dZbar_J.
Complex power_coefficient(int m) {
  Complex c = ((m * (m - 1) / 2) % 2 == 0) ? 1.0 : -1.0;
  for (int i = 1; i <= m; ++i) c *= static_cast<Real>(i) * kI / (2 * kPi);
  return c;
}

}  // namespace

std::vector<PointForm> segre_point_forms(const MetricJet& g, const FiberAtlas& atlas, int up_to) {
  const int n = g.n;
  const int r = static_cast<int>(g.value.rows());
  if (r != atlas.rank()) throw std::invalid_argument("fiber atlas rank differs from the metric rank");
  const int f = r - 1;
  if (up_to < 0 || up_to > n) throw DegreeError("Segre degree must lie in [0, n]");

  Eigen::LLT<Mat> llt(g.value);
  if (llt.info() != Eigen::Success) throw DegenerateNode("segre: h* is not positive definite");
  const Mat L = llt.matrixL();
  const Mat T = L.adjoint().triangularView<Eigen::Upper>().solve(Mat::Identity(r, r));
  const MetricJet gw = congruence(g, T);

  static thread_local std::vector<std::pair<int, MinorPlan>> plans;
  const int key = (n * 16 + f) * 16 + up_to;
  const MinorPlan* plan = nullptr;
  for (const auto& [k, p] : plans)
    if (k == key) plan = &p;
  if (!plan) {
    plans.emplace_back(key, make_plan(n, f, up_to));
    plan = &plans.back().second;
  }

  std::vector<std::vector<Complex>> acc(static_cast<std::size_t>(up_to + 1));
  for (int k = 0; k <= up_to; ++k) acc[static_cast<std::size_t>(k)].assign(plan->by_degree[static_cast<std::size_t>(k)].size(), 0.0);
  // Every entry of the Hessian comes from w^H M w = vec(M) . (conj(w_i) w_j)
  // or from M w for the matrices of the jet.
  const int rr = r * r;
  std::array<std::array<Complex, kMaxRank * kMaxRank>, 1 + kMaxDim + kMaxDim * kMaxDim> A;
  const auto put = [&](const Mat& m, int row) {
    for (int i = 0; i < rr; ++i) A[static_cast<std::size_t>(row)][static_cast<std::size_t>(i)] = m.data()[i];
  };
  put(gw.value, 0);
  for (int a = 0; a < n; ++a) {
    put(gw.d[static_cast<std::size_t>(a)], 1 + a);
    for (int b = 0; b < n; ++b) put(gw.mixed(a, b), 1 + n + a * n + b);
  }
  const int rows = 1 + n + n * n;
  const auto& P = atlas.outer_columns();
  const auto& W = atlas.columns();
  std::array<Complex, 1 + kMaxDim + kMaxDim * kMaxDim> Qt;
  std::array<std::array<Complex, kMaxRank>, 1 + kMaxDim> Vt;
  const auto Q = [&](int row, Eigen::Index) { return Qt[static_cast<std::size_t>(row)]; };
  const auto V = [&](int row, Eigen::Index) {
    return Vt[static_cast<std::size_t>(row / r)][static_cast<std::size_t>(row % r)];
  };

  TotalMatrix H(n + f, n + f);
  std::array<int, kMaxRank> slot{};
  std::array<Complex, kMaxDim> qa{};
  const auto& nodes = atlas.nodes();
  for (Eigen::Index t = 0; t < P.cols(); ++t) {
    const FiberNode& node = nodes[static_cast<std::size_t>(t)];
    const Complex* pt = P.col(t).data();
    for (int k = 0; k < rows; ++k) {
      const auto& ak = A[static_cast<std::size_t>(k)];
      Complex sum = 0;
      for (int i = 0; i < rr; ++i) sum += ak[static_cast<std::size_t>(i)] * pt[i];
      Qt[static_cast<std::size_t>(k)] = sum;
    }
    const Complex* wt = W.col(t).data();
    for (int k = 0; k <= n; ++k) {
      const Mat& m = k == 0 ? gw.value : gw.d[static_cast<std::size_t>(k - 1)];
      for (int i = 0; i < r; ++i) {
        Complex sum = 0;
        for (int j = 0; j < r; ++j) sum += m(i, j) * wt[j];
        Vt[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = sum;
      }
    }
    const Real q = Q(0, t).real();
    if (!(q > 0)) throw DegenerateNode("induced_phi: w^H G w vanishes");
    const Real iq = 1 / q, iq2 = iq * iq;
    for (int i = 0, k = 0; i < r; ++i)
      if (i != node.chart) slot[static_cast<std::size_t>(k++)] = i;
    for (int a = 0; a < n; ++a) qa[static_cast<std::size_t>(a)] = Q(1 + a, t);
    for (int a = 0; a < n; ++a) {
      const Complex qa_a = qa[static_cast<std::size_t>(a)];
      for (int b = 0; b < n; ++b)
        H(a, b) = Q(1 + n + a * n + b, t) * iq - qa_a * std::conj(qa[static_cast<std::size_t>(b)]) * iq2;
      for (int i = 0; i < f; ++i) {
        const int s = slot[static_cast<std::size_t>(i)];
        H(a, n + i) = V(r * (1 + a) + s, t) * iq - qa_a * V(s, t) * iq2;
        H(n + i, a) = std::conj(H(a, n + i));
      }
    }
    for (int j = 0; j < f; ++j) {
      const int sj = slot[static_cast<std::size_t>(j)];
      for (int i = 0; i < f; ++i) {
        const int si = slot[static_cast<std::size_t>(i)];
        H(n + j, n + i) = gw.value(si, sj) * iq - std::conj(V(sj, t)) * V(si, t) * iq2;
      }
    }
    for (int k = 0; k <= up_to; ++k) {
      const int m = k + f;
      const auto& entries = plan->by_degree[static_cast<std::size_t>(k)];
      auto& acc_k = acc[static_cast<std::size_t>(k)];
      if (m == 0) {
        for (std::size_t e = 0; e < entries.size(); ++e) acc_k[e] += node.weight;
        continue;
      }
      for (std::size_t e = 0; e < entries.size(); ++e)
        acc_k[e] += node.weight * minor_determinant(H, entries[e].rows.data(), entries[e].cols.data(), m);
    }
  }
  std::vector<PointForm> out;
  for (int k = 0; k <= up_to; ++k) {
    const Complex scale = (k % 2 == 0 ? 1.0 : -1.0) * power_coefficient(k + f) * fiber_integration_factor(f, k);
    PointForm s(n, k, k);
    const auto& entries = plan->by_degree[static_cast<std::size_t>(k)];
    for (std::size_t e = 0; e < entries.size(); ++e)
      s.at(entries[e].I, entries[e].J) = scale * acc[static_cast<std::size_t>(k)][e];
    out.push_back(s);
  }
  return out;
}

std::vector<FormField> segre_forms(const MetricField& h, int up_to, const FiberAtlas& atlas, DerivativeMode mode,
                                   const NodeMask& support) {
  if (h.regularity() != Regularity::Smooth)
    throw std::invalid_argument("segre_form needs a smooth metric; regularize it first");
  if (!atlas.calibration().pass) throw std::runtime_error("fiber quadrature is not calibrated");
  const Chart& chart = h.chart();
  if (up_to < 0 || up_to > chart.dimension()) throw DegreeError("Segre degree must lie in [0, n]");
  std::vector<FormField> out;
  for (int k = 0; k <= up_to; ++k) out.emplace_back(chart, k, k);
  check_mask(chart, support);
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    if (!support.empty() && !support[node]) continue;
    const auto s = segre_point_forms(h.dual_jet(node, mode), atlas, up_to);
    for (int k = 0; k <= up_to; ++k) out[static_cast<std::size_t>(k)].set_point_form(node, s[static_cast<std::size_t>(k)]);
  }
  return out;
}

FormField segre_form(const MetricField& h, int k, const FiberAtlas& atlas, DerivativeMode mode,
                     const NodeMask& support) {
  return segre_forms(h, k, atlas, mode, support)[static_cast<std::size_t>(k)];
}

Real fiber_positivity_margin(const MetricField& h, const FiberAtlas& atlas, DerivativeMode mode) {
  const int f = atlas.fiber_dimension();
  if (f == 0) return std::numeric_limits<Real>::infinity();
  Real margin = std::numeric_limits<Real>::infinity();
  for (std::size_t k = 0; k < h.chart().node_count(); ++k) {
    const MetricJet g = h.dual_jet(k, mode);
    for (const FiberNode& node : atlas.nodes()) {
      const TotalMatrix H = induced_phi_hessian(g, node);
      const Eigen::MatrixXcd block = H.bottomRightCorner(f, f);
      margin = std::min(margin, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(block).eigenvalues().minCoeff());
    }
  }
  return margin;
}

}  // namespace chern
