// Example catalog, experiment configs and pipelines, and the two-chart
// check of c_1 on P^1.
#pragma once

#include "chern/currents.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace chern {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Pipeline { Symbolic, ChernForms, Segre, Converge, Iterated, Mass, Cohomology };
Pipeline parse_pipeline(const std::string& name);
std::string to_string(Pipeline p);

enum class Outcome { Pass, Inconclusive, Fail };
std::string to_string(Outcome o);
/// 0 pass, 2 inconclusive, 1 fail.
int exit_code(Outcome o);

// ---------------------------------------------------------------------------
// Catalog.

/// A metric by name: flat, diag-exp, fubini-study-o1, sections. Section
/// entries are strings ("z1 + 2*z2") or term lists [[re, im, e1, .., en], ..].
struct CatalogMetric {
  std::string name;
  MetricField h;
  std::optional<SectionMatrix> sections;
};

std::vector<std::string> catalog_names();
CatalogMetric catalog_metric(const Chart& chart, const nlohmann::json& spec);
Degeneracy parse_degeneracy(int n, const nlohmann::json& spec);
HoloPoly parse_entry(int n, const nlohmann::json& entry);

/// The singular examples every regularization-independence run covers.
struct SingularExample {
  std::string name;
  int dimension = 1;
  nlohmann::json metric;
  std::vector<int> degrees{1};  // factors of the Chern current checked
};
std::vector<SingularExample> singular_examples();

// ---------------------------------------------------------------------------
// Config.

struct BumpSpec {
  std::vector<Complex> center;  // empty: the chart center
  Real scale = 0.9;
  int k_plus_q = -1;  // -1: the degree of the current
};

struct ExperimentConfig {
  std::string name = "experiment";
  Pipeline pipeline = Pipeline::Converge;
  int dimension = 1;
  Real radius = 1.0;
  int resolution = 32;
  nlohmann::json metric;
  std::vector<std::string> families{"analytic", "bump", "truncated-gaussian"};
  std::vector<Real> schedule;  // empty: default_schedule
  bool matched = true;
  std::vector<BumpSpec> bumps;
  std::vector<int> degrees{1};
  std::string current = "chern";  // chern | segre | character
  bool tie = true;
  Real tie_tolerance = 1e-2;
  std::vector<Real> radii;
  int symbolic_degree = 5;
  std::vector<std::pair<Real, Real>> partitions{{2.0, 0.5}, {1.6, 0.7}};
  Real tolerance = 1e-3;
  std::uint64_t seed = 3;
  int max_refinements = 8;
  std::string out = ".";

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig defaults(Pipeline p);
  nlohmann::json to_json() const;
  Chart chart() const;
  int total_degree() const;
  /// Throws ConfigError on unknown names or a violated codimension bound.
  void validate() const;
};

// ---------------------------------------------------------------------------
// P^1.

/// Charts z and w = 1/z, each a centered square; O(1) trivialized by X0 on
/// the first and X1 = z X0 on the second, so |X1|^2 = |z|^2 |X0|^2.
class ProjectiveLine {
 public:
  ProjectiveLine(int resolution, Real cut, Real inner);

  const Chart& chart(int i) const { return charts_[static_cast<std::size_t>(i)]; }
  /// rho_0 = chi(|z| / cut) with the given inner fraction; rho_1 = 1 - rho_0.
  Real rho(int i, const Point& p) const;
  FormField partition(int i) const;
  /// Largest |h_1(1/z) - |z|^2 h_0(z)| relative to h_1 on the overlap.
  Real transition_error(const MetricField& h0, const MetricField& h1, int samples, std::uint64_t seed) const;
  /// Sum over charts of the pairing of c_1 with rho_i.
  Complex integrate_c1(const MetricField& h0, const MetricField& h1) const;

 private:
  Real cut_, inner_;
  std::vector<Chart> charts_;
};

struct CohomologyReport {
  Complex smooth{};
  std::vector<Complex> smooth_by_partition;
  PairingReport singular;
  Real transition_error = 0;
  Outcome outcome = Outcome::Fail;
  nlohmann::json to_json() const;
};

/// c_1(O(1)) over P^1 for Fubini-Study and for the metric induced by the
/// section X1 alone, regularized by the sections {X1, eps X0}.
CohomologyReport cohomology_check(int k, int resolution, const std::vector<Real>& schedule,
                                  const std::vector<std::pair<Real, Real>>& partitions, Real tolerance);

// ---------------------------------------------------------------------------

/// Largest relative error of s_k against the class algebra applied to the
/// Chern forms, over nodes at least `margin` nodes from the boundary.
std::vector<Real> segre_cross_check(const MetricField& h, int up_to, const FiberAtlas& atlas, int margin = 2);

std::vector<RegularizationFamily> build_families(const ExperimentConfig& config, const CatalogMetric& metric);

struct ExperimentResult {
  nlohmann::json report;
  std::string csv;  // label,family,bump,eps,re,im
  Outcome outcome = Outcome::Fail;
};

ExperimentResult run_experiment(const ExperimentConfig& config);
/// Writes <out>/<name>.json and <out>/<name>.csv.
void write_result(const ExperimentConfig& config, const ExperimentResult& result);

}  // namespace chern
