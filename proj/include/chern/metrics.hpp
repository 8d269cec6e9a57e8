// Hermitian metrics on trivial bundles over a chart and their Chern forms.
//
// A metric h of rank r is stored through the matrix H with
// |xi|_h^2 = xi^H H xi. Its dual h* has matrix G = conj(H^{-1}). Metrics are
// backed either by an analytic model (value and derivatives anywhere) or by
// per-node samples (derivatives by finite differences).
#pragma once

#include "chern/charclass.hpp"
#include "chern/forms.hpp"
#include "chern/poly.hpp"

#include <map>
#include <memory>
#include <optional>
#include <unordered_map>

namespace chern {

inline constexpr int kMaxRank = 4;

using Mat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxRank, kMaxRank>;

class DegenerateNode : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix value with first derivatives d_a M and mixed derivatives d_a dbar_b M.
/// The matrix is hermitian, so dbar_b M = (d_b M)^H.
struct MetricJet {
  int n = 0;
  Mat value;
  std::array<Mat, kMaxDim> d;
  std::array<Mat, kMaxDim * kMaxDim> dd;

  Mat dbar(int b) const { return d[static_cast<std::size_t>(b)].adjoint(); }
  Mat& mixed(int a, int b) { return dd[static_cast<std::size_t>(a * kMaxDim + b)]; }
  const Mat& mixed(int a, int b) const { return dd[static_cast<std::size_t>(a * kMaxDim + b)]; }

  static MetricJet constant(int n, const Mat& m);
};

MetricJet inverse_jet(const MetricJet& m);
MetricJet transpose_jet(const MetricJet& m);
/// Jet of conj(M^{-1}): the dual metric.
MetricJet dual_jet(const MetricJet& m);
/// Jet of T^H M T for a constant matrix T.
MetricJet congruence(const MetricJet& m, const Mat& t);

/// Cholesky-based positive-definiteness guard.
bool is_positive_definite(const Mat& m, Real relative_floor = 1e-13);

/// Smooth hermitian matrix field on C^n with analytic derivatives.
class MatrixModel {
 public:
  virtual ~MatrixModel() = default;
  virtual int dimension() const = 0;
  virtual int rank() const = 0;
  virtual Mat value(const Point& z) const { return jet(z).value; }
  virtual MetricJet jet(const Point& z) const = 0;
};

/// Model with polynomial entries in (z, zbar); covers section-induced metrics
/// and their regularizations.
class PolynomialMatrixModel : public MatrixModel {
 public:
  explicit PolynomialMatrixModel(std::vector<std::vector<BiPoly>> entries);
  int dimension() const override { return n_; }
  int rank() const override { return r_; }
  Mat value(const Point& z) const override;
  MetricJet jet(const Point& z) const override;
  const std::vector<std::vector<BiPoly>>& entries() const { return entries_; }

 private:
  int n_, r_;
  std::vector<std::vector<BiPoly>> entries_;
  // d_[a][i][j], dd_[a*n+b][i][j]
  std::vector<std::vector<std::vector<BiPoly>>> d_, dd_;
};

/// Model given by a jet callback.
class FunctionModel : public MatrixModel {
 public:
  FunctionModel(int n, int r, std::function<MetricJet(const Point&)> jet) : n_(n), r_(r), jet_(std::move(jet)) {}
  int dimension() const override { return n_; }
  int rank() const override { return r_; }
  MetricJet jet(const Point& z) const override { return jet_(z); }

 private:
  int n_, r_;
  std::function<MetricJet(const Point&)> jet_;
};

enum class Regularity { Smooth, Singular };
enum class DerivativeMode { Automatic, Analytic, FiniteDifference };

/// Declared degeneracy variety V: common zeros of holomorphic polynomials.
struct Degeneracy {
  std::vector<HoloPoly> equations;
  int codim = 0;

  bool empty() const { return equations.empty(); }
  Real residual(const Point& z) const;
  /// Gauss-Newton projection onto V; nullopt if it does not converge.
  std::optional<Point> project(const Point& z, int iterations = 60) const;
  /// |z - project(z)|, an upper bound for the distance to V (infinite if
  /// V is empty or the projection fails).
  Real distance_estimate(const Point& z) const;
};

struct Provenance {
  enum class Kind { Catalog, SectionInduced, DualOf, Mollified, AnalyticEps, Sampled };
  Kind kind = Kind::Catalog;
  std::string name;
  std::map<std::string, Real> params;
  std::shared_ptr<const Provenance> parent;

  std::string describe() const;
};

class MetricField {
 public:
  /// Which matrix the backing model or samples describe.
  enum class Side { Metric, Dual };

  MetricField(Chart chart, std::shared_ptr<const MatrixModel> model, Side side, Regularity regularity,
              Degeneracy degeneracy, Provenance provenance);
  /// Per-node matrices of `side`; derivatives only by finite differences.
  static MetricField from_samples(Chart chart, std::vector<Mat> samples, Side side, Regularity regularity,
                                  Degeneracy degeneracy = {});

  const Chart& chart() const { return chart_; }
  int dimension() const { return chart_.dimension(); }
  int rank() const { return rank_; }
  Regularity regularity() const { return regularity_; }
  const Degeneracy& degeneracy() const { return degeneracy_; }
  const Provenance& provenance() const { return provenance_; }
  bool has_analytic_jet() const { return model_ != nullptr; }
  const std::shared_ptr<const MatrixModel>& model() const { return model_; }
  Side model_side() const { return side_; }

  /// Matrix of h at a node; throws DegenerateNode where it is not defined.
  Mat matrix(std::size_t node) const;
  /// Matrix of h* at a node.
  Mat dual_matrix(std::size_t node) const;
  /// True where the stored side is not positive definite.
  bool is_flagged(std::size_t node) const;

  /// Model-backed evaluation at arbitrary points.
  Mat matrix_at(const Point& z) const;
  Mat dual_matrix_at(const Point& z) const;
  MetricJet jet_at(const Point& z) const;
  MetricJet dual_jet_at(const Point& z) const;

  MetricJet jet(std::size_t node, DerivativeMode mode = DerivativeMode::Automatic) const;
  MetricJet dual_jet(std::size_t node, DerivativeMode mode = DerivativeMode::Automatic) const;

  /// The dual metric sharing this field's storage.
  MetricField dual() const;
  /// Same metric on another chart (model-backed only).
  MetricField on_chart(const Chart& chart) const;
  MetricField with_provenance(Provenance p) const;
  MetricField with_regularity(Regularity r) const;

 private:
  explicit MetricField(Chart chart) : chart_(std::move(chart)) {}
  Mat stored(std::size_t node) const;
  Mat side_matrix(std::size_t node, Side want) const;
  MetricJet side_jet(std::size_t node, Side want, DerivativeMode mode) const;

  Chart chart_;
  int rank_ = 0;
  std::shared_ptr<const MatrixModel> model_;
  std::shared_ptr<const std::vector<Mat>> samples_;
  Side side_ = Side::Metric;
  Regularity regularity_ = Regularity::Smooth;
  Degeneracy degeneracy_;
  Provenance provenance_;
};

struct MetricPair {
  MetricField h;
  MetricField hstar;
};

// Catalog.
MetricField flat_metric(const Chart& chart, int rank);
/// h = diag(exp(-sum_a w[i][a] |z_a|^2)).
MetricField diag_exp_metric(const Chart& chart, const std::vector<std::vector<Real>>& weights);
/// h = 1/(1+|z|^2): the Fubini-Study metric on O(1) in an affine chart.
MetricField fubini_study_metric(const Chart& chart);

/// h* = S^H S, h its dual. Smooth when no degeneracy is declared.
MetricPair from_sections(const Chart& chart, const SectionMatrix& s, Degeneracy v = {});
MetricField dual_metric(const MetricField& h);
/// Block-diagonal h (+) g of two model-backed metrics on the same chart.
MetricField direct_sum(const MetricField& h, const MetricField& g);

/// Sampling check of a declared V: det h* small on points of V and bounded
/// away from 0 at nodes farther than delta from V.
struct DegeneracyReport {
  Real max_det_on_v = 0;
  Real min_det_away = 0;
  std::size_t points_on_v = 0;
  std::size_t nodes_away = 0;
  bool pass = false;
};
DegeneracyReport check_degeneracy(const MetricField& h, Real delta, int samples, std::uint64_t seed = 7,
                                  Real vanish_tol = 1e-10, Real away_floor = 1e-12);

// Point-level curvature.

/// Theta_ab with Theta = sum_ab Theta_ab dz_a ^ dzbar_b, from the jet of H.
std::array<Mat, kMaxDim * kMaxDim> curvature_at(const MetricJet& h);
/// c_0..c_up_to from the jet of H.
std::vector<PointForm> chern_point_forms(const MetricJet& h, int up_to);
/// ch_0..ch_up_to as tr((i Theta/2pi)^k)/k!.
std::vector<PointForm> chern_character_point_forms(const MetricJet& h, int up_to);
/// dd^c log det G from the jet of G.
PointForm log_det_ddc_point(const MetricJet& g);

// Field-level operations.

/// Nodes to evaluate; empty means all. Skipped nodes hold zero forms.
using NodeMask = std::vector<std::uint8_t>;
NodeMask region_mask(const Chart& chart, const Region& region);
void check_mask(const Chart& chart, const NodeMask& support);

/// r x r matrix of (1,1)-forms Theta.
std::vector<std::vector<FormField>> curvature(const MetricField& h, DerivativeMode mode = DerivativeMode::Automatic);
std::vector<FormField> chern_forms(const MetricField& h, int up_to, DerivativeMode mode = DerivativeMode::Automatic,
                                   const NodeMask& support = {});
std::vector<FormField> chern_character_forms(const MetricField& h, int up_to,
                                             DerivativeMode mode = DerivativeMode::Automatic,
                                             const NodeMask& support = {});
/// dd^c log det h* = -dd^c log det h.
FormField first_chern_via_det(const MetricField& h, DerivativeMode mode = DerivativeMode::Automatic);

/// A homogeneous characteristic-class polynomial evaluated on forms; `value`
/// supplies the (j,j)-form of each variable. Rational coefficients are rounded
/// to double.
FormField evaluate_class(const CharClassPoly& p, const Chart& chart,
                         const std::function<FormField(const Variable&)>& value);
PointForm evaluate_class(const CharClassPoly& p, int n, const std::function<PointForm(const Variable&)>& value);

struct GriffithsReport {
  Real min_levi = 0;
  std::size_t samples = 0;
  bool pass = false;
};
/// Levi form of |u|^2_{h*} for random constant u at random nodes: its
/// smallest eigenvalue over complex directions. Pass means no negative value
/// below -tolerance (relative to the size of h*).
GriffithsReport griffiths_diagnostic(const MetricField& h, std::size_t samples, std::uint64_t seed = 1,
                                     Real tolerance = 1e-9, DerivativeMode mode = DerivativeMode::Automatic);

/// Finite-difference jet of a hermitian matrix field sampled at nodes.
template <class Get>
MetricJet fd_matrix_jet(const Chart& chart, std::size_t node, int rank, Get&& matrix_at_node) {
  std::unordered_map<std::size_t, Mat> cache;
  auto cached = [&](std::size_t k) -> const Mat& {
    auto it = cache.find(k);
    if (it == cache.end()) it = cache.emplace(k, matrix_at_node(k)).first;
    return it->second;
  };
  const int n = chart.dimension();
  MetricJet j;
  j.n = n;
  j.value = cached(node);
  for (int a = 0; a < n; ++a) j.d[static_cast<std::size_t>(a)] = Mat::Zero(rank, rank);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) j.mixed(a, b) = Mat::Zero(rank, rank);
  for (int r1 = 0; r1 < rank; ++r1)
    for (int r2 = 0; r2 < rank; ++r2) {
      const ScalarJet s = fd::jet(chart, node, [&](std::size_t k) { return cached(k)(r1, r2); });
      for (int a = 0; a < n; ++a) {
        j.d[static_cast<std::size_t>(a)](r1, r2) = s.d[static_cast<std::size_t>(a)];
        for (int b = 0; b < n; ++b) j.mixed(a, b)(r1, r2) = s.hess(a, b);
      }
    }
  return j;
}

}  // namespace chern
