// Smooth approximations h_eps of a (possibly singular) metric: mollification
// of the dual matrix, the explicit family S^H S + eps^2 Id for section
// metrics, and diagnostics for how the family approaches its limit.
#pragma once

#include "chern/metrics.hpp"

#include <functional>
#include <string>

namespace chern {

enum class KernelShape { Bump, TruncatedGaussian };

/// Radial mollifier rho_eps(x) = c eps^{-2n} k(|x|/eps) on the ball |x| < eps
/// of C^n. The bump is k(t) = exp(1/(t^2 - 1)); the truncated Gaussian is
/// exp(-t^2/(2 sigma^2)) cut at t = 1, sigma = 1/2.
class Mollifier {
 public:
  static Mollifier bump() { return Mollifier(KernelShape::Bump); }
  static Mollifier truncated_gaussian() { return Mollifier(KernelShape::TruncatedGaussian); }
  static Mollifier parse(const std::string& name);

  KernelShape shape() const { return shape_; }
  std::string name() const;
  /// Unnormalized profile k(t), zero for t >= 1.
  Real profile(Real t) const;
  /// c with integral of c k(|x|) over the unit ball of C^n equal to 1.
  Real normalization(int n) const;
  /// E|y|^{2j}, j = 0..up_to, for y distributed by rho_eps on C^n.
  std::vector<Real> radial_moments(int n, Real eps, int up_to) const;
  /// |mass - 1| of the normalized kernel by a quadrature independent of the
  /// one used for normalization.
  Real calibration_error(int n) const;
  /// sqrt(E|y|^2) for eps = 1: the mollified |z|^2 is |z|^2 + (spread eps)^2.
  Real spread(int n) const;

 private:
  explicit Mollifier(KernelShape s) : shape_(s) {}
  KernelShape shape_;
};

struct MollifyOptions {
  /// Point counts of the ball rule used when the dual matrix is not polynomial.
  int radial = 6;
  int simplex = 3;
  int angular = 4;
};

/// Entrywise convolution of the h* matrix with rho_eps, then dualized.
/// Exact (through kernel moments) when h* is polynomial in (z, zbar);
/// otherwise each jet is averaged with a fixed product rule on the ball.
/// Throws if eps is not below the smallest chart radius or h has no model.
MetricField mollify(const MetricField& h, Real eps, const Mollifier& kernel = Mollifier::bump(),
                    const MollifyOptions& options = {});

/// h_eps with h*_eps = S^H S + eps^2 Id.
MetricField analytic_eps(const Chart& chart, const SectionMatrix& s, Real eps);

// ---------------------------------------------------------------------------

/// eps_j = start * ratio^j, j < count.
std::vector<Real> geometric_schedule(Real start, Real ratio, int count);
/// start = smallest chart radius / 8, ratio 1/2, 6 steps.
std::vector<Real> default_schedule(const Chart& chart);
/// Kernel radii whose spread equals the given radii, so that
/// mollify(h, matched[j], kernel) smooths |z|^2 like analytic_eps at eps[j].
std::vector<Real> matched_schedule(const Mollifier& kernel, int n, const std::vector<Real>& eps);
/// "start:ratio:count".
std::vector<Real> parse_schedule(const std::string& text);
/// Throws unless strictly decreasing and positive.
void validate_schedule(const std::vector<Real>& schedule);

enum class RegularizationMode { Mollify, AnalyticEps, Custom };
enum class ConvergenceClaim { IncreasingPointwise, LocallyUniformOutsideV, Both };

class RegularizationFamily {
 public:
  using Builder = std::function<MetricField(Real eps)>;

  static RegularizationFamily mollified(MetricField source, Mollifier kernel, std::vector<Real> schedule,
                                        ConvergenceClaim claim = ConvergenceClaim::Both);
  /// Source is from_sections(chart, s, v).h.
  static RegularizationFamily analytic(const Chart& chart, const SectionMatrix& s, Degeneracy v,
                                       std::vector<Real> schedule);
  static RegularizationFamily custom(MetricField source, Builder build, std::vector<Real> schedule,
                                     ConvergenceClaim claim, std::string label);

  const MetricField& source() const { return source_; }
  const Degeneracy& degeneracy() const { return source_.degeneracy(); }
  RegularizationMode mode() const { return mode_; }
  ConvergenceClaim claim() const { return claim_; }
  const std::string& label() const { return label_; }
  const std::vector<Real>& schedule() const { return schedule_; }
  std::size_t size() const { return schedule_.size(); }

  MetricField member(std::size_t j) const { return at(schedule_.at(j)); }
  MetricField at(Real eps) const;
  RegularizationFamily with_schedule(std::vector<Real> schedule) const;

 private:
  RegularizationFamily(MetricField source, RegularizationMode mode, ConvergenceClaim claim, std::string label,
                       Builder build, std::vector<Real> schedule);

  MetricField source_;
  RegularizationMode mode_;
  ConvergenceClaim claim_;
  std::string label_;
  Builder build_;
  std::vector<Real> schedule_;
};

struct ConvergenceOptions {
  std::size_t pairs = 1000;  // (node, vector) samples per consecutive pair of members
  std::uint64_t seed = 3;
  Real monotonicity_tolerance = 1e-10;
};

struct ConvergenceReport {
  std::vector<Real> eps;
  /// max over region nodes of |H_eps - H| / |H| (spectral norms).
  std::vector<Real> sup_difference;
  std::size_t pairs_checked = 0;
  std::size_t monotonicity_violations = 0;
  Real worst_violation = 0;
  /// log(d_{m-1}/d_m) / log(eps_{m-1}/eps_m) for the last two members.
  Real observed_order = 0;
  bool monotone = false;
  bool decreasing = false;
  bool pass = false;
};

/// The family's members compared with its source on region nodes (the
/// region is expected to stay away from V).
ConvergenceReport convergence_diagnostic(const RegularizationFamily& family, const Region& region,
                                         const ConvergenceOptions& options = {});
/// Same for an explicit member list, taken in the given order.
ConvergenceReport convergence_diagnostic(const std::vector<MetricField>& members, const std::vector<Real>& eps,
                                         const MetricField& limit, const Region& region,
                                         const ConvergenceOptions& options = {});

}  // namespace chern
