// Currents as limits of smooth forms: bump test forms, pairings, the
// simultaneous limit of Chern-form products, nested limits of Segre-form
// products, and the Chern and Chern-character currents assembled from them.
#pragma once

#include "chern/charclass.hpp"
#include "chern/projbundle.hpp"
#include "chern/regularize.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace chern {

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Smooth cut-off on [0, inf): 1 on [0, inner], 0 from 1 on, C^infinity.
struct CutOff {
  Real inner = 0.5;
  Real operator()(Real s) const;
  Real derivative(Real s) const;
};

struct BumpOptions {
  /// chi_2 equals 1 on the ball of radius inner * R (1 - delta in the recipe).
  Real inner = 0.5;
  /// Radius of B' over the radius R of B''.
  Real transverse_ratio = 0.25;
  int separation_samples = 4000;
  int max_rotations = 8;
  std::uint64_t seed = 17;
};

/// A strongly positive (p,p)-form, p = n - k - q, built as
/// sum_I chi_1(w_I) chi_2(w_{I^c}) prod_{j in I} i dw_j ^ dwbar_j in
/// coordinates w = U (z - center). U is the identity unless the projection
/// check against the declared V fails for some I.
class BumpForm {
 public:
  const FormField& form() const { return form_; }
  const Point& center() const { return center_; }
  int degree() const { return form_.p(); }
  int codegree() const { return form_.dimension() - form_.p(); }
  Real radius() const { return radius_; }
  Real transverse_radius() const { return transverse_; }
  Real inner() const { return inner_; }
  /// C with C omega^p <= beta near the center (omega = i sum dz ^ dzbar).
  Real domination() const { return domination_; }
  bool rotated() const { return rotated_; }
  const Eigen::MatrixXcd& rotation() const { return rotation_; }
  /// Value of the point form at any z (not only nodes).
  PointForm evaluate(const Point& z) const;

 private:
  friend BumpForm bump_form(const Chart&, const Point&, int, Real, const Degeneracy&, const BumpOptions&);
  explicit BumpForm(FormField f) : form_(std::move(f)) {}
  FormField form_;
  Point center_;
  Real radius_ = 0, transverse_ = 0, inner_ = 0, domination_ = 0;
  bool rotated_ = false;
  Eigen::MatrixXcd rotation_;
  std::vector<std::vector<int>> subsets_;
  std::vector<PointForm> bases_;
};

/// Bump of bidegree (n - k_plus_q, n - k_plus_q) with support radius `scale`
/// (the radius of B''). Throws if the support leaves the chart or no tried
/// rotation separates V.
BumpForm bump_form(const Chart& chart, const Point& center, int k_plus_q, Real scale, const Degeneracy& v = {},
                   const BumpOptions& options = {});

/// Smallest value of beta ^ i^{m^2} g ^ conj(g) per unit volume over random
/// simple (m,0)-forms g of unit size, m = n - p.
Real strong_positivity_margin(const PointForm& beta, int samples, std::uint64_t seed = 5);

/// d(gamma + conj gamma) restricted to bidegree (n-k, n-k), for gamma a
/// cut-off times a random constant (n-k-1, n-k)-form. Needs k < n.
FormField exact_test_form(const Chart& chart, const Point& center, int k, Real scale, std::uint64_t seed = 9);

/// Integral of T ^ test over the chart.
Complex pair(const FormField& t, const FormField& test);
Complex pair(const FormField& t, const BumpForm& beta);

// ---------------------------------------------------------------------------

struct Extrapolation {
  Complex limit{};
  Real error = 0;
  Real relative_change = 0;
  bool converged = false;
};

/// Richardson in eps^2 through the last three points (fewer if fewer are
/// given). The change is measured against the same rule one point earlier,
/// or against the two-point rule when only three points exist. Converged
/// when the change is below tolerance * |limit| or below `floor`.
Extrapolation richardson(const std::vector<Real>& eps, const std::vector<Complex>& values, Real tolerance = 1e-3,
                         Real floor = 1e-10);

enum class Verdict { Converged, Inconclusive };
std::string to_string(Verdict v);

/// One stage of a nested limit: the index of the varied factor, the
/// schedule positions of the factors outside it, and its sequence.
struct LevelRecord {
  int level = 0;
  std::vector<Real> frozen;
  std::vector<Real> eps;
  std::vector<Complex> values;
  Complex estimate{};
  Real relative_change = 0;
  bool stabilized = false;
};

struct PairingReport {
  std::string label;
  std::vector<Real> eps;
  std::vector<Complex> pairings;
  Complex limit{};
  Real error = 0;
  Real relative_change = 0;
  Verdict verdict = Verdict::Inconclusive;
  std::vector<LevelRecord> levels;

  bool converged() const { return verdict == Verdict::Converged; }
  nlohmann::json to_json() const;
  /// Header "eps,re,im" then one row per eps.
  std::string to_csv() const;
};

struct CurrentFactor {
  int family = 0;  // index into the family list
  int degree = 1;
};

enum class LimitMode { Simultaneous, Iterated };

struct CurrentProductSpec {
  std::vector<CurrentFactor> factors;
  LimitMode mode = LimitMode::Simultaneous;
  int total_degree() const;
};

struct LimitOptions {
  Real tolerance = 1e-3;
  Real floor = 1e-10;
  int max_refinements = 8;
  /// Refinements beyond the schedule continue it geometrically, never below
  /// this. Zero means 1.5 times the coarsest grid spacing.
  Real eps_floor = 0;
  FiberQuadratureOptions fiber;
};

/// Throws PreconditionError when the smallest declared codimension among the
/// families' V is below k.
void check_codimension(const std::vector<RegularizationFamily>& families, int k);

/// lim over the common schedule of the pairing of c_{k_1}(h^1_eps) ^ ... with
/// the test form.
PairingReport simultaneous_limit(const CurrentProductSpec& spec, const std::vector<RegularizationFamily>& families,
                                 const FormField& test, const LimitOptions& options = {});
PairingReport simultaneous_limit(const CurrentProductSpec& spec, const std::vector<RegularizationFamily>& families,
                                 const BumpForm& beta, const LimitOptions& options = {});

/// lim_{eps^m} ... lim_{eps^1} of the pairing of
/// s_{k_1}(h_{eps^1}) ^ ... ^ s_{k_m}(h_{eps^m}) with the test form.
PairingReport iterated_segre_limit(const std::vector<int>& degrees, const RegularizationFamily& family,
                                   const FormField& test, const LimitOptions& options = {});
PairingReport iterated_segre_limit(const std::vector<int>& degrees, const RegularizationFamily& family,
                                   const BumpForm& beta, const LimitOptions& options = {});

/// A polynomial in the Segre variables of slot 0, each monomial evaluated as
/// an iterated limit and combined with its coefficient.
PairingReport segre_polynomial_limit(const CharClassPoly& p, const RegularizationFamily& family, const FormField& test,
                                     const LimitOptions& options = {});

PairingReport chern_current(int k, const RegularizationFamily& family, const FormField& test,
                            const LimitOptions& options = {});
PairingReport chern_current(int k, const RegularizationFamily& family, const BumpForm& beta,
                            const LimitOptions& options = {});
PairingReport chern_character_current(int k, const RegularizationFamily& family, const FormField& test,
                                      const LimitOptions& options = {});
PairingReport chern_character_current(int k, const RegularizationFamily& family, const BumpForm& beta,
                                      const LimitOptions& options = {});

struct MassRow {
  Real radius = 0;
  Complex mass{};
  Real error = 0;
  bool converged = false;
};

struct MassTable {
  std::vector<MassRow> rows;  // by decreasing radius
  bool locally_finite = false;
};

/// Masses are the limits of pairings against bumps over shrinking balls.
/// Locally finite when every limit converged and the real parts do not grow
/// as the radius shrinks beyond their combined error and tolerance.
MassTable mass_estimate(std::vector<std::pair<Real, PairingReport>> reports, Real tolerance = 1e-3);

}  // namespace chern
