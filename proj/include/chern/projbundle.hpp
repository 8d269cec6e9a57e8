// The projectivized bundle P(E*) over a chart: the fiber P^{r-1} with its
// quadrature, the potential phi = log |w|^2_{h*} of the induced metric on
// O(1), push-forward along the fibers and Segre forms.
//
// Total-space forms live in dimension n + r - 1 with the base coordinates
// z_1..z_n first and the affine fiber coordinates after them.
#pragma once

#include "chern/metrics.hpp"
#include "chern/quadrature.hpp"

#include <functional>
#include <string>

namespace chern {

using FiberVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxRank, 1>;

/// A quadrature node on P^{r-1}: homogeneous vector with entry `chart` equal
/// to 1, and a weight for Lebesgue measure in that chart's affine coordinates.
struct FiberNode {
  int chart = 0;
  FiberVector homogeneous;
  Real weight = 0;

  /// The r-1 affine coordinates (the entries other than `chart`).
  FiberVector affine() const;
};

/// Density of the normalized Fubini-Study volume in affine coordinates:
/// f!/pi^f (1 + |w|^2)^{-(f+1)}.
Real fubini_study_density(const FiberNode& node);

enum class FiberRule { Automatic, Product, MonteCarlo };

struct FiberQuadratureOptions {
  FiberRule rule = FiberRule::Automatic;
  int radial = 0;   // 0 picks a default per rank
  int angular = 0;
  std::size_t samples = 20000;
  std::uint64_t seed = 1;
  Real tolerance = 1e-8;
};

struct FiberCalibration {
  std::string rule;
  std::size_t nodes = 0;
  Real mass = 0;
  Real mass_error = 0;
  /// Largest deviation of a chart's share of the mass from its exact value.
  Real worst_chart_error = 0;
  /// Error of the integrals of |w_0|^4/|w|^4 and |w_{r-1}|^4/|w|^4, exactly
  /// 2/(r(r+1)).
  Real moment_error = 0;
  Real tolerance = 0;
  bool pass = false;
};

class FiberAtlas {
 public:
  /// r = 1: a single point. r = 2: the chart w_0 = 1 with a product rule in
  /// (cos t, theta), w = tan(t/2) e^{i theta). r = 3: a product rule in
  /// (|w_i|^2/|w|^2, arg w_i) with each node placed in the chart where |w_i|
  /// is largest.
  /// r > 3: Monte Carlo with a fixed seed.
  static FiberAtlas build(int rank, const FiberQuadratureOptions& options = {});

  int rank() const { return rank_; }
  int fiber_dimension() const { return rank_ - 1; }
  const std::vector<FiberNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  const FiberCalibration& calibration() const { return calibration_; }
  /// Node vectors as columns (r x size) and their products conj(w_i) w_j as
  /// columns (r^2 x size, row i + r j), so w^H M w = vec(M)^T column.
  const Eigen::MatrixXcd& columns() const { return columns_; }
  const Eigen::MatrixXcd& outer_columns() const { return outer_; }

 private:
  void calibrate(Real tolerance);

  int rank_ = 1;
  std::vector<FiberNode> nodes_;
  FiberCalibration calibration_;
  Eigen::MatrixXcd columns_, outer_;
};

// ---------------------------------------------------------------------------

/// Complex Hessian of phi in (z, w) at one base point and fiber node; rows
/// are holomorphic directions, columns antiholomorphic.
using TotalMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim + kMaxRank,
                                  kMaxDim + kMaxRank>;

/// phi = log(w^H G w); throws on a zero vector, -inf where G w vanishes.
Real induced_phi_at(const Mat& g, const FiberVector& w);
/// d dbar phi from the jet of G, analytic in the fiber directions.
TotalMatrix induced_phi_hessian(const MetricJet& g, const FiberNode& node);

/// phi sampled on base nodes x fiber nodes.
class InducedPhi {
 public:
  InducedPhi(MetricField hstar, FiberAtlas atlas);

  const MetricField& hstar() const { return hstar_; }
  const FiberAtlas& atlas() const { return atlas_; }
  /// -inf where the fiber vector is null for G.
  Real value(std::size_t node, std::size_t fiber_node) const {
    return values_(static_cast<Eigen::Index>(node), static_cast<Eigen::Index>(fiber_node));
  }
  bool is_flagged(std::size_t node, std::size_t fiber_node) const { return !std::isfinite(value(node, fiber_node)); }
  TotalMatrix hessian(std::size_t node, std::size_t fiber_node, DerivativeMode mode = DerivativeMode::Automatic) const;

 private:
  MetricField hstar_;
  FiberAtlas atlas_;
  Eigen::MatrixXd values_;
};

/// `hstar` is the metric whose matrix is G (the h* side of a pair).
InducedPhi induced_phi(const MetricField& hstar, const FiberAtlas& atlas);

// ---------------------------------------------------------------------------

/// A form on the total space sampled on base nodes x fiber nodes.
class TotalSpaceForm {
 public:
  TotalSpaceForm(Chart base, FiberAtlas atlas, int p, int q);
  static TotalSpaceForm sample(const Chart& base, const FiberAtlas& atlas, int p, int q,
                               const std::function<PointForm(std::size_t node, const FiberNode& f)>& fn);
  /// pi^* gamma.
  static TotalSpaceForm pullback(const FormField& gamma, const FiberAtlas& atlas);
  /// The normalized Fubini-Study volume of the fiber, as an (r-1, r-1)-form.
  static TotalSpaceForm fiber_volume(const Chart& base, const FiberAtlas& atlas);
  /// Phi = dd^c phi on the total space.
  static TotalSpaceForm induced_curvature(const MetricField& h, const FiberAtlas& atlas,
                                          DerivativeMode mode = DerivativeMode::Automatic);

  const Chart& base() const { return base_; }
  const FiberAtlas& atlas() const { return atlas_; }
  int p() const { return p_; }
  int q() const { return q_; }
  int total_dimension() const { return base_.dimension() + atlas_.fiber_dimension(); }

  PointForm& at(std::size_t node, std::size_t fiber_node) { return samples_[node * atlas_.size() + fiber_node]; }
  const PointForm& at(std::size_t node, std::size_t fiber_node) const {
    return samples_[node * atlas_.size() + fiber_node];
  }

 private:
  Chart base_;
  FiberAtlas atlas_;
  int p_, q_;
  std::vector<PointForm> samples_;
};

TotalSpaceForm wedge(const TotalSpaceForm& a, const TotalSpaceForm& b);

/// Integral over the fiber of the component of full fiber degree.
FormField fiber_pushforward(const TotalSpaceForm& eta);

/// Integration factor for the fiber part of a total-space coefficient:
/// dz_I dw_F ^ dzbar_J dwbar_F = factor * dz_I ^ dzbar_J ^ dLebesgue(w),
/// with |J| = base_q.
Complex fiber_integration_factor(int fiber_dim, int base_q);

/// s_0..s_up_to at one point from the jet of G (the h* matrix). The fiber
/// coordinates are first changed linearly so that G is the identity at the
/// point, which leaves the push-forward unchanged.
std::vector<PointForm> segre_point_forms(const MetricJet& g, const FiberAtlas& atlas, int up_to);

/// s_k(E, h) = (-1)^k pi_*(Phi^{k+r-1}) for k = 0..up_to.
std::vector<FormField> segre_forms(const MetricField& h, int up_to, const FiberAtlas& atlas,
                                   DerivativeMode mode = DerivativeMode::Automatic, const NodeMask& support = {});
FormField segre_form(const MetricField& h, int k, const FiberAtlas& atlas,
                     DerivativeMode mode = DerivativeMode::Automatic, const NodeMask& support = {});

/// Smallest eigenvalue of the fiber block of the Hessian of phi over all base
/// and fiber nodes; positive when the restriction of Phi to fibers is positive.
Real fiber_positivity_margin(const MetricField& h, const FiberAtlas& atlas,
                             DerivativeMode mode = DerivativeMode::Automatic);

}  // namespace chern
