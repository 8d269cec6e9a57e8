#include "chern/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace chern {

using nlohmann::json;

Pipeline parse_pipeline(const std::string& name) {
  if (name == "symbolic") return Pipeline::Symbolic;
  if (name == "chern-forms") return Pipeline::ChernForms;
  if (name == "segre") return Pipeline::Segre;
  if (name == "converge") return Pipeline::Converge;
  if (name == "iterated") return Pipeline::Iterated;
  if (name == "mass") return Pipeline::Mass;
  if (name == "cohomology") return Pipeline::Cohomology;
  throw ConfigError("unknown pipeline '" + name + "'");
}

std::string to_string(Pipeline p) {
  switch (p) {
    case Pipeline::Symbolic: return "symbolic";
    case Pipeline::ChernForms: return "chern-forms";
    case Pipeline::Segre: return "segre";
    case Pipeline::Converge: return "converge";
    case Pipeline::Iterated: return "iterated";
    case Pipeline::Mass: return "mass";
    case Pipeline::Cohomology: return "cohomology";
  }
  return "?";
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Pass: return "pass";
    case Outcome::Inconclusive: return "inconclusive";
    case Outcome::Fail: return "fail";
  }
  return "?";
}

int exit_code(Outcome o) { return o == Outcome::Pass ? 0 : (o == Outcome::Inconclusive ? 2 : 1); }

namespace {

json cx(Complex c) { return json::array({c.real(), c.imag()}); }

Outcome worst(Outcome a, Outcome b) {
  auto rank = [](Outcome o) { return o == Outcome::Pass ? 0 : (o == Outcome::Inconclusive ? 1 : 2); };
  return rank(a) >= rank(b) ? a : b;
}

std::vector<Real> read_schedule(const json& j) {
  if (j.is_string()) return parse_schedule(j.get<std::string>());
  auto s = j.get<std::vector<Real>>();
  if (!s.empty()) validate_schedule(s);  // empty: the pipeline default
  return s;
}

Complex read_complex(const json& j) {
  if (j.is_number()) return j.get<Real>();
  if (j.is_array() && j.size() == 2) return {j[0].get<Real>(), j[1].get<Real>()};
  throw ConfigError("complex numbers are given as x or [re, im]");
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown field '" + key + "' in " + where);
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::string> catalog_names() { return {"flat", "diag-exp", "fubini-study-o1", "sections"}; }

HoloPoly parse_entry(int n, const json& entry) {
  if (entry.is_string()) return HoloPoly::parse(n, entry.get<std::string>());
  if (entry.is_number()) return HoloPoly::constant(n, entry.get<Real>());
  if (!entry.is_array()) throw ConfigError("section entries are strings or term lists");
  HoloPoly p(n);
  for (const auto& term : entry) {
    if (!term.is_array() || static_cast<int>(term.size()) != 2 + n)
      throw ConfigError("a term is [re, im, e1, .., en]");
    Exponent e{};
    for (int a = 0; a < n; ++a) e[static_cast<std::size_t>(a)] = term[static_cast<std::size_t>(2 + a)].get<int>();
    p.add_term(e, Complex(term[0].get<Real>(), term[1].get<Real>()));
  }
  return p;
}

Degeneracy parse_degeneracy(int n, const json& spec) {
  Degeneracy v;
  if (spec.is_null()) return v;
  check_keys(spec, {"equations", "codim"}, "degeneracy");
  for (const auto& e : spec.at("equations")) v.equations.push_back(parse_entry(n, e));
  v.codim = spec.value("codim", static_cast<int>(v.equations.size()));
  if (v.codim < 0 || v.codim > n) throw ConfigError("degeneracy codimension out of range");
  return v;
}

CatalogMetric catalog_metric(const Chart& chart, const json& spec) {
  if (!spec.is_object() || !spec.contains("name")) throw ConfigError("metric needs a name");
  const std::string name = spec.at("name").get<std::string>();
  const int n = chart.dimension();
  CatalogMetric out{name, flat_metric(chart, 1), std::nullopt};
  if (name == "flat") {
    check_keys(spec, {"name", "rank", "dual"}, "metric");
    out.h = flat_metric(chart, spec.value("rank", 1));
  } else if (name == "diag-exp") {
    check_keys(spec, {"name", "weights", "dual"}, "metric");
    const auto w = spec.at("weights").get<std::vector<std::vector<Real>>>();
    for (const auto& row : w)
      if (static_cast<int>(row.size()) != n) throw ConfigError("diag-exp weights need one entry per coordinate");
    out.h = diag_exp_metric(chart, w);
  } else if (name == "fubini-study-o1") {
    check_keys(spec, {"name", "dual"}, "metric");
    out.h = fubini_study_metric(chart);
  } else if (name == "sections") {
    check_keys(spec, {"name", "rows", "degeneracy", "dual"}, "metric");
    std::vector<std::vector<HoloPoly>> rows;
    for (const auto& row : spec.at("rows")) {
      rows.emplace_back();
      for (const auto& e : row) rows.back().push_back(parse_entry(n, e));
    }
    out.sections = SectionMatrix(n, rows);
    out.h = from_sections(chart, *out.sections, parse_degeneracy(n, spec.value("degeneracy", json()))).h;
  } else {
    throw ConfigError("unknown catalog metric '" + name + "'");
  }
  if (spec.value("dual", false)) out.h = dual_metric(out.h);
  return out;
}

std::vector<SingularExample> singular_examples() {
  // rows as arrays; a braced pair of strings would read as a JSON object
  auto rows = [](std::vector<std::vector<std::string>> r) { return json(r); };
  auto sections = [](json r, std::vector<std::string> eqs) {
    json deg = {{"equations", json(eqs)}, {"codim", static_cast<int>(eqs.size())}};
    return json{{"name", "sections"}, {"rows", std::move(r)}, {"degeneracy", deg}};
  };
  return {
      {"point-mass", 1, sections(rows({{"z1"}}), {"z1"}), {1}},
      {"line-divisor", 2, sections(rows({{"z1"}}), {"z1"}), {1}},
      {"radial-line", 2, sections(rows({{"z1"}, {"z2"}}), {"z1", "z2"}), {1, 1}},
      {"l-plus-l", 2, sections(rows({{"z1", "0"}, {"z2", "0"}, {"0", "z1"}, {"0", "z2"}}), {"z1", "z2"}), {2}},
      {"o-plus-l", 2, sections(rows({{"1", "0"}, {"0", "z1"}, {"0", "z2"}}), {"z1", "z2"}), {2}},
  };
}

// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  check_keys(j, {"name", "pipeline", "chart", "metric", "regularization", "bumps", "current", "mass", "symbolic",
                 "cohomology", "tolerance", "seed", "max_refinements", "output"},
             "config");
  ExperimentConfig c = defaults(parse_pipeline(j.at("pipeline").get<std::string>()));
  c.name = j.value("name", c.name);
  if (j.contains("chart")) {
    const json& ch = j["chart"];
    check_keys(ch, {"dimension", "radius", "resolution"}, "chart");
    c.dimension = ch.value("dimension", c.dimension);
    c.radius = ch.value("radius", c.radius);
    c.resolution = ch.value("resolution", c.resolution);
  }
  if (j.contains("metric")) c.metric = j["metric"];
  if (j.contains("regularization")) {
    const json& r = j["regularization"];
    check_keys(r, {"families", "schedule", "matched"}, "regularization");
    if (r.contains("families")) c.families = r["families"].get<std::vector<std::string>>();
    if (r.contains("schedule")) c.schedule = read_schedule(r["schedule"]);
    c.matched = r.value("matched", c.matched);
  }
  if (j.contains("bumps")) {
    c.bumps.clear();
    for (const auto& b : j["bumps"]) {
      check_keys(b, {"center", "scale", "k_plus_q"}, "bump");
      BumpSpec s;
      if (b.contains("center"))
        for (const auto& z : b["center"]) s.center.push_back(read_complex(z));
      s.scale = b.value("scale", s.scale);
      s.k_plus_q = b.value("k_plus_q", s.k_plus_q);
      c.bumps.push_back(s);
    }
  }
  if (j.contains("current")) {
    const json& k = j["current"];
    check_keys(k, {"kind", "degrees", "tie", "tie_tolerance"}, "current");
    c.current = k.value("kind", c.current);
    if (k.contains("degrees")) c.degrees = k["degrees"].get<std::vector<int>>();
    c.tie = k.value("tie", c.tie);
    c.tie_tolerance = k.value("tie_tolerance", c.tie_tolerance);
  }
  if (j.contains("mass")) {
    check_keys(j["mass"], {"radii"}, "mass");
    c.radii = j["mass"].value("radii", c.radii);
  }
  if (j.contains("symbolic")) {
    check_keys(j["symbolic"], {"degree"}, "symbolic");
    c.symbolic_degree = j["symbolic"].value("degree", c.symbolic_degree);
  }
  if (j.contains("cohomology")) {
    check_keys(j["cohomology"], {"partitions"}, "cohomology");
    if (j["cohomology"].contains("partitions")) {
      c.partitions.clear();
      for (const auto& p : j["cohomology"]["partitions"]) c.partitions.emplace_back(p.at(0).get<Real>(), p.at(1).get<Real>());
    }
  }
  c.tolerance = j.value("tolerance", c.tolerance);
  c.seed = j.value("seed", c.seed);
  c.max_refinements = j.value("max_refinements", c.max_refinements);
  if (j.contains("output")) {
    check_keys(j["output"], {"dir"}, "output");
    c.out = j["output"].value("dir", c.out);
  }
  return c;
}

ExperimentConfig ExperimentConfig::defaults(Pipeline p) {
  ExperimentConfig c;
  c.pipeline = p;
  c.name = to_string(p);
  const json point_mass = singular_examples()[0].metric;
  const json l_plus_l = singular_examples()[3].metric;
  const json diag_exp = {{"name", "diag-exp"}, {"weights", {{1.0, 0.5}, {-0.3, 1.0}}}};
  switch (p) {
    case Pipeline::Symbolic:
      break;
    case Pipeline::ChernForms:
      c.dimension = 2;
      c.resolution = 24;
      c.metric = diag_exp;
      c.degrees = {2};
      break;
    case Pipeline::Segre:
      c.dimension = 2;
      c.resolution = 16;
      c.metric = diag_exp;
      c.degrees = {2};
      break;
    case Pipeline::Converge:
      c.resolution = 64;
      c.metric = point_mass;
      c.schedule = geometric_schedule(0.3, 0.7, 5);
      break;
    case Pipeline::Iterated:
      c.dimension = 2;
      c.resolution = 32;
      c.metric = l_plus_l;
      c.degrees = {2};
      c.families = {"analytic"};
      c.schedule = geometric_schedule(0.4, 0.75, 5);
      c.tolerance = 1e-2;  // desk-scale; nested limits at 1e-3 want res 48 and minutes
      break;
    case Pipeline::Mass:
      c.resolution = 64;
      c.metric = point_mass;
      c.families = {"analytic"};
      c.schedule = geometric_schedule(0.3, 0.7, 5);
      c.radii = {0.9, 0.8, 0.7, 0.6};
      break;
    case Pipeline::Cohomology:
      c.resolution = 128;
      c.schedule = geometric_schedule(0.4, 0.7, 5);
      break;
  }
  return c;
}

json ExperimentConfig::to_json() const {
  json bumps_j = json::array();
  for (const auto& b : bumps) {
    json center = json::array();
    for (Complex z : b.center) center.push_back(cx(z));
    bumps_j.push_back({{"center", center}, {"scale", b.scale}, {"k_plus_q", b.k_plus_q}});
  }
  json parts = json::array();
  for (const auto& [cut, inner] : partitions) parts.push_back({cut, inner});
  return {{"name", name},
          {"pipeline", to_string(pipeline)},
          {"chart", {{"dimension", dimension}, {"radius", radius}, {"resolution", resolution}}},
          {"metric", metric},
          {"regularization", {{"families", families}, {"schedule", schedule}, {"matched", matched}}},
          {"bumps", bumps_j},
          {"current", {{"kind", current}, {"degrees", degrees}, {"tie", tie}, {"tie_tolerance", tie_tolerance}}},
          {"mass", {{"radii", radii}}},
          {"symbolic", {{"degree", symbolic_degree}}},
          {"cohomology", {{"partitions", parts}}},
          {"tolerance", tolerance},
          {"seed", seed},
          {"max_refinements", max_refinements},
          {"output", {{"dir", out}}}};
}

Chart ExperimentConfig::chart() const { return Chart::cube(dimension, radius, resolution); }

int ExperimentConfig::total_degree() const {
  int k = 0;
  for (int d : degrees) k += d;
  return k;
}

void ExperimentConfig::validate() const {
  if (pipeline == Pipeline::Symbolic) {
    if (symbolic_degree < 1 || symbolic_degree > 10) throw ConfigError("symbolic degree must be in 1..10");
    return;
  }
  if (dimension < 1 || dimension > kMaxDim) throw ConfigError("chart dimension out of range");
  if (resolution < 8) throw ConfigError("resolution must be at least 8");
  if (!(tolerance > 0)) throw ConfigError("tolerance must be positive");
  for (int d : degrees)
    if (d < 1) throw ConfigError("current degrees must be positive");
  const int k = total_degree();
  if (pipeline == Pipeline::Cohomology) {
    if (k > 1) throw PreconditionError("k = " + std::to_string(k) + " > dim X = 1 on P^1");
    return;
  }
  if (k > dimension) throw ConfigError("current degree exceeds the chart dimension");
  if (!metric.is_object() || !metric.contains("name")) throw ConfigError("metric needs a name");
  const std::string name = metric["name"].get<std::string>();
  const auto names = catalog_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw ConfigError("unknown catalog metric '" + name + "'");
  for (const auto& f : families)
    if (f != "analytic" && f != "constant") Mollifier::parse(f);
  if (current != "chern" && current != "segre" && current != "character")
    throw ConfigError("current kind must be chern, segre or character");
  for (const auto& b : bumps)
    if (!b.center.empty() && static_cast<int>(b.center.size()) != dimension)
      throw ConfigError("bump center needs one coordinate per dimension");
  if (metric.contains("degeneracy")) {
    const Degeneracy v = parse_degeneracy(dimension, metric["degeneracy"]);
    if (!v.empty() && v.codim < k && pipeline != Pipeline::ChernForms && pipeline != Pipeline::Segre)
      throw PreconditionError("codim V = " + std::to_string(v.codim) + " < k = " + std::to_string(k) +
                              ": the codimension condition can not be relaxed in general");
  }
}

// ---------------------------------------------------------------------------

ProjectiveLine::ProjectiveLine(int resolution, Real cut, Real inner) : cut_(cut), inner_(inner) {
  if (!(cut > 0) || !(inner > 0 && inner < 1)) throw ConfigError("partition needs cut > 0 and inner in (0, 1)");
  charts_.push_back(Chart::cube(1, 1.05 * cut, resolution));
  charts_.push_back(Chart::cube(1, 1.05 / (cut * inner), resolution));
}

Real ProjectiveLine::rho(int i, const Point& p) const {
  const CutOff chi{inner_};
  if (i == 0) return chi(std::abs(p(0)) / cut_);
  if (p(0) == Complex{}) return 1.0;
  return 1.0 - chi(1.0 / (std::abs(p(0)) * cut_));
}

FormField ProjectiveLine::partition(int i) const {
  const Chart& c = chart(i);
  FormField f(c, 0, 0);
  for (std::size_t k = 0; k < c.node_count(); ++k) f.coeffs()(0, static_cast<Eigen::Index>(k)) = rho(i, c.point(k));
  return f;
}

Real ProjectiveLine::transition_error(const MetricField& h0, const MetricField& h1, int samples,
                                      std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> radius(inner_ * cut_, cut_), angle(0, 2 * M_PI);
  Real worst = 0;
  for (int s = 0; s < samples; ++s) {
    Point z(1), w(1);
    z(0) = std::polar(radius(rng), angle(rng));
    w(0) = 1.0 / z(0);
    const Real a = h1.matrix_at(w)(0, 0).real();
    const Real b = std::norm(z(0)) * h0.matrix_at(z)(0, 0).real();
    worst = std::max(worst, std::abs(a - b) / std::abs(a));
  }
  return worst;
}

Complex ProjectiveLine::integrate_c1(const MetricField& h0, const MetricField& h1) const {
  return pair(chern_forms(h0, 1)[1], partition(0)) + pair(chern_forms(h1, 1)[1], partition(1));
}

json CohomologyReport::to_json() const {
  json parts = json::array();
  for (Complex c : smooth_by_partition) parts.push_back(cx(c));
  return {{"smooth", cx(smooth)},
          {"smooth_by_partition", parts},
          {"singular", singular.to_json()},
          {"transition_error", transition_error},
          {"verdict", to_string(outcome)}};
}

CohomologyReport cohomology_check(int k, int resolution, const std::vector<Real>& schedule,
                                  const std::vector<std::pair<Real, Real>>& partitions, Real tolerance) {
  if (k != 1) throw PreconditionError("k = " + std::to_string(k) + (k > 1 ? " > dim X = 1" : " < 1") + " on P^1");
  if (partitions.empty()) throw ConfigError("cohomology needs at least one partition of unity");
  validate_schedule(schedule);
  CohomologyReport rep;
  const SectionMatrix x1_only = SectionMatrix::parse(1, {{"z1"}});
  for (const auto& [cut, inner] : partitions) {
    const ProjectiveLine p1(resolution, cut, inner);
    const MetricField h0 = fubini_study_metric(p1.chart(0)), h1 = fubini_study_metric(p1.chart(1));
    rep.transition_error = std::max(rep.transition_error, p1.transition_error(h0, h1, 200, 5));
    rep.smooth_by_partition.push_back(p1.integrate_c1(h0, h1));
  }
  rep.smooth = rep.smooth_by_partition.front();

  // The section X1 alone: h* = |z|^2 on the first chart, 1 on the second;
  // adding eps X0 gives |z|^2 + eps^2 and 1 + eps^2 |w|^2.
  const ProjectiveLine p1(resolution, partitions.front().first, partitions.front().second);
  rep.singular.label = "c1 on P1, section X1";
  for (Real e : schedule) {
    const MetricField g0 = analytic_eps(p1.chart(0), x1_only, e);
    std::ostringstream w;
    w.precision(17);
    w << e << "*z1";
    const MetricField g1 = from_sections(p1.chart(1), SectionMatrix::parse(1, {{"1"}, {w.str()}})).h;
    rep.transition_error = std::max(rep.transition_error, p1.transition_error(g0, g1, 200, 6));
    rep.singular.eps.push_back(e);
    rep.singular.pairings.push_back(p1.integrate_c1(g0, g1));
  }
  const Extrapolation ex = richardson(rep.singular.eps, rep.singular.pairings, tolerance);
  rep.singular.limit = ex.limit;
  rep.singular.error = ex.error;
  rep.singular.relative_change = ex.relative_change;
  rep.singular.verdict = ex.converged ? Verdict::Converged : Verdict::Inconclusive;

  bool ok = rep.transition_error <= 1e-8 && std::abs(rep.smooth - 1.0) <= 1e-4 &&
            std::abs(rep.singular.limit - 1.0) <= tolerance;
  for (Complex c : rep.smooth_by_partition) ok = ok && std::abs(c - rep.smooth) <= 1e-6;
  rep.outcome = !rep.singular.converged() ? Outcome::Inconclusive : (ok ? Outcome::Pass : Outcome::Fail);
  return rep;
}

// ---------------------------------------------------------------------------

std::vector<Real> segre_cross_check(const MetricField& h, int up_to, const FiberAtlas& atlas, int margin) {
  const int n = h.dimension();
  const int cmax = std::min(h.rank(), n);
  const CharClassAlgebra alg(std::max(1, up_to));
  std::vector<CharClassPoly> expected{CharClassPoly(1)};
  for (int k = 1; k <= up_to; ++k) expected.push_back(alg.segre_to_chern(k));
  std::vector<Real> diff(static_cast<std::size_t>(up_to) + 1, 0.0), size(diff.size(), 0.0);
  const Chart& chart = h.chart();
  for (std::size_t node = 0; node < chart.node_count(); ++node) {
    if (chart.boundary_layer(node) < margin) continue;
    // one model evaluation per node; the other side by inversion
    MetricJet j, dj;
    if (h.model_side() == MetricField::Side::Dual) {
      dj = h.dual_jet(node);
      j = dual_jet(dj);
    } else {
      j = h.jet(node);
      dj = dual_jet(j);
    }
    const auto c = chern_point_forms(j, cmax);
    const auto s = segre_point_forms(dj, atlas, up_to);
    for (int k = 0; k <= up_to; ++k) {
      const PointForm e = evaluate_class(expected[static_cast<std::size_t>(k)], n, [&](const Variable& v) {
        if (v.index <= cmax) return c[static_cast<std::size_t>(v.index)];
        PointForm zero(n, v.index, v.index);
        zero.c.setZero();
        return zero;
      });
      const auto i = static_cast<std::size_t>(k);
      diff[i] = std::max(diff[i], (s[i].c - e.c).cwiseAbs().maxCoeff());
      size[i] = std::max(size[i], e.c.cwiseAbs().maxCoeff());
    }
  }
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] /= std::max<Real>(size[i], 1e-12);
  return diff;
}

std::vector<RegularizationFamily> build_families(const ExperimentConfig& config, const CatalogMetric& metric) {
  const Chart chart = metric.h.chart();
  const std::vector<Real> schedule = config.schedule.empty() ? default_schedule(chart) : config.schedule;
  std::vector<RegularizationFamily> out;
  for (const auto& f : config.families) {
    if (f == "analytic") {
      if (!metric.sections) throw ConfigError("the analytic family needs a section-induced metric");
      out.push_back(RegularizationFamily::analytic(chart, *metric.sections, metric.h.degeneracy(), schedule));
    } else if (f == "constant") {
      if (metric.h.regularity() != Regularity::Smooth) throw ConfigError("the constant family needs a smooth metric");
      const MetricField h = metric.h;
      out.push_back(
          RegularizationFamily::custom(h, [h](Real) { return h; }, schedule, ConvergenceClaim::Both, "constant"));
    } else {
      const Mollifier k = Mollifier::parse(f);
      out.push_back(RegularizationFamily::mollified(
          metric.h, k, config.matched ? matched_schedule(k, chart.dimension(), schedule) : schedule));
    }
  }
  if (out.empty()) throw ConfigError("no regularization families");
  return out;
}

namespace {

struct Context {
  const ExperimentConfig& config;
  Chart chart;
  std::ostringstream csv;
  json pairings = json::array();
  json extrapolations = json::array();
  json calibration = json::object();
  Outcome outcome = Outcome::Pass;

  explicit Context(const ExperimentConfig& c) : config(c), chart(c.chart()) {
    csv.precision(17);
    csv << "label,family,bump,eps,re,im\n";
  }

  void record(const PairingReport& r, const std::string& family, std::size_t bump) {
    json j = r.to_json();
    j["family"] = family;
    j["bump"] = bump;
    pairings.push_back(j);
    extrapolations.push_back({{"label", r.label},
                              {"family", family},
                              {"bump", bump},
                              {"limit", cx(r.limit)},
                              {"error", r.error},
                              {"verdict", to_string(r.verdict)}});
    for (std::size_t i = 0; i < r.eps.size(); ++i)
      csv << r.label << "," << family << "," << bump << "," << r.eps[i] << "," << r.pairings[i].real() << ","
          << r.pairings[i].imag() << "\n";
    if (!r.converged()) outcome = worst(outcome, Outcome::Inconclusive);
  }

  std::vector<BumpForm> bumps(int k, const Degeneracy& v) const {
    std::vector<BumpSpec> specs = config.bumps;
    if (specs.empty()) specs.push_back(BumpSpec{{}, 0.9 * config.radius, -1});
    std::vector<BumpForm> out;
    BumpOptions opt;
    opt.seed = config.seed;
    for (const auto& s : specs) {
      Point c = Point::Zero(chart.dimension());
      for (std::size_t a = 0; a < s.center.size(); ++a) c(static_cast<Eigen::Index>(a)) = s.center[a];
      out.push_back(bump_form(chart, c, s.k_plus_q < 0 ? k : s.k_plus_q, s.scale, v, opt));
    }
    return out;
  }

  LimitOptions limit_options() const {
    LimitOptions o;
    o.tolerance = config.tolerance;
    o.max_refinements = config.max_refinements;
    return o;
  }
};

void run_symbolic(Context& ctx) {
  const int d = ctx.config.symbolic_degree;
  const CharClassAlgebra alg(d);
  std::ostringstream table;
  json rows = json::array();
  table << "# segre classes in chern classes\n";
  for (int k = 1; k <= d; ++k) table << "s" << k << " = " << alg.segre_to_chern(k).to_string() << "\n";
  table << "# chern classes in segre classes\n";
  for (int k = 1; k <= d; ++k) table << "c" << k << " = " << alg.chern_to_segre(k).to_string() << "\n";
  table << "# chern character in chern classes\n";
  for (int k = 1; k <= d; ++k) table << "ch" << k << " = " << alg.chern_character(k, 1).to_string() << "\n";
  bool ok = true;
  for (int k = 1; k <= d; ++k) {
    const bool round_trip =
        alg.segre_to_chern(k).substitute(Family::Chern, 0, [&](int i) { return alg.chern_to_segre(i); }) ==
        CharClassPoly::s(k);
    ok = ok && round_trip;
    rows.push_back({{"k", k},
                    {"segre_in_chern", alg.segre_to_chern(k).to_string()},
                    {"chern_in_segre", alg.chern_to_segre(k).to_string()},
                    {"character_in_chern", alg.chern_character(k, 1).to_string()},
                    {"round_trip", round_trip}});
  }
  CharClassPoly total_s(1);
  for (int k = 1; k <= d; ++k) total_s += alg.segre_to_chern(k);
  const bool inverse = (alg.total_chern() * total_s).truncate(d) == CharClassPoly(1);
  ok = ok && inverse;
  ctx.calibration["total_class_inverse"] = inverse;
  ctx.calibration["table"] = table.str();
  ctx.pairings = rows;
  ctx.csv.str("");
  ctx.csv << "k,segre_in_chern,chern_in_segre,character_in_chern\n";
  for (const auto& r : rows)
    ctx.csv << r["k"].get<int>() << ",\"" << r["segre_in_chern"].get<std::string>() << "\",\""
            << r["chern_in_segre"].get<std::string>() << "\",\"" << r["character_in_chern"].get<std::string>()
            << "\"\n";
  if (!ok) ctx.outcome = Outcome::Fail;
}

void run_chern_forms(Context& ctx, const CatalogMetric& m) {
  if (m.h.regularity() != Regularity::Smooth)
    throw ConfigError("chern-forms evaluates smooth metrics; use converge or iterated for singular ones");
  const int n = ctx.chart.dimension();
  const int top = std::min(n, m.h.rank());
  const auto c = chern_forms(m.h, top);
  const auto ch = chern_character_forms(m.h, n);
  json rows = json::array();
  ctx.csv.str("");
  ctx.csv << "k,class,max_abs,hermitian_residual,bump,re,im\n";
  for (int k = 0; k <= n; ++k) {
    for (const auto& [label, forms] : {std::pair<std::string, const std::vector<FormField>*>{"c", &c}, {"ch", &ch}}) {
      if (k >= static_cast<int>(forms->size())) continue;
      const FormField& f = (*forms)[static_cast<std::size_t>(k)];
      Real residual = 0, size = 0;
      for (std::size_t node = 0; node < ctx.chart.node_count(); ++node) {
        const PointForm p = f.point_form(node);
        PointForm q = p;
        const FormAlgebra& alg = form_algebra(n);
        const Real sign = (k * k) % 2 == 0 ? 1.0 : -1.0;
        for (IndexMask I : alg.subsets(k))
          for (IndexMask J : alg.subsets(k)) q.at(J, I) = sign * std::conj(p.at(I, J));
        residual = std::max(residual, (q.c - p.c).cwiseAbs().maxCoeff());
        size = std::max(size, p.c.cwiseAbs().maxCoeff());
      }
      json row = {{"k", k}, {"class", label}, {"max_abs", size}, {"hermitian_residual", residual}};
      json pairs = json::array();
      std::size_t bi = 0;
      for (const BumpForm& b : ctx.bumps(k, {})) {
        const Complex v = pair(f, b);
        pairs.push_back(cx(v));
        ctx.csv << k << "," << label << "," << size << "," << residual << "," << bi++ << "," << v.real() << ","
                << v.imag() << "\n";
      }
      row["pairings"] = pairs;
      rows.push_back(row);
      if (residual > ctx.config.tolerance * std::max<Real>(1.0, size)) ctx.outcome = Outcome::Fail;
    }
  }
  ctx.pairings = rows;
}

void run_segre(Context& ctx, const CatalogMetric& m) {
  if (m.h.regularity() != Regularity::Smooth) throw ConfigError("segre cross-check evaluates smooth metrics");
  const FiberAtlas atlas = FiberAtlas::build(m.h.rank());
  const auto& cal = atlas.calibration();
  ctx.calibration["fiber"] = {{"rule", cal.rule},
                              {"nodes", cal.nodes},
                              {"mass_error", cal.mass_error},
                              {"moment_error", cal.moment_error},
                              {"pass", cal.pass}};
  const int up_to = ctx.chart.dimension();
  const auto err = segre_cross_check(m.h, up_to, atlas);
  ctx.csv.str("");
  ctx.csv << "k,relative_error\n";
  json rows = json::array();
  for (int k = 0; k <= up_to; ++k) {
    const Real e = err[static_cast<std::size_t>(k)];
    rows.push_back({{"k", k}, {"relative_error", e}});
    ctx.csv << k << "," << e << "\n";
    if (e > ctx.config.tolerance) ctx.outcome = Outcome::Fail;
  }
  if (std::max(cal.mass_error, cal.moment_error) > 1e-4) ctx.outcome = Outcome::Fail;
  ctx.pairings = rows;
}

PairingReport current_report(const ExperimentConfig& cfg, const RegularizationFamily& fam, const BumpForm& b,
                             const LimitOptions& o) {
  const int k = cfg.total_degree();
  if (cfg.current == "segre") return iterated_segre_limit(cfg.degrees, fam, b, o);
  if (cfg.current == "character") return chern_character_current(k, fam, b, o);
  return chern_current(k, fam, b, o);
}

void run_converge(Context& ctx, const CatalogMetric& m) {
  const auto families = build_families(ctx.config, m);
  const auto bumps = ctx.bumps(ctx.config.total_degree(), m.h.degeneracy());
  CurrentProductSpec spec;
  for (int d : ctx.config.degrees) spec.factors.push_back({0, d});
  json independence = json::array();
  for (std::size_t bi = 0; bi < bumps.size(); ++bi) {
    std::vector<PairingReport> reps;
    for (const auto& f : families) {
      reps.push_back(simultaneous_limit(spec, {f}, bumps[bi], ctx.limit_options()));
      ctx.record(reps.back(), f.label(), bi);
    }
    Real spread = 0, err = 0;
    for (const auto& a : reps) {
      err = std::max(err, a.error);
      for (const auto& b : reps) spread = std::max(spread, std::abs(a.limit - b.limit));
    }
    const bool agree = spread <= 3 * err + ctx.config.tolerance * 1e-7;
    independence.push_back({{"bump", bi}, {"spread", spread}, {"max_error", err}, {"agree", agree}});
    if (!agree) ctx.outcome = worst(ctx.outcome, Outcome::Fail);
  }
  ctx.calibration["independence"] = independence;
}

void run_iterated(Context& ctx, const CatalogMetric& m) {
  const auto families = build_families(ctx.config, m);
  const int k = ctx.config.total_degree();
  const auto bumps = ctx.bumps(k, m.h.degeneracy());
  json ties = json::array();
  for (std::size_t bi = 0; bi < bumps.size(); ++bi)
    for (const auto& f : families) {
      const PairingReport it = current_report(ctx.config, f, bumps[bi], ctx.limit_options());
      ctx.record(it, f.label(), bi);
      if (ctx.config.tie && ctx.config.current == "chern") {
        const PairingReport sim = simultaneous_limit({{{0, k}}}, {f}, bumps[bi], ctx.limit_options());
        ctx.record(sim, f.label(), bi);
        const Real gap = std::abs(sim.limit - it.limit);
        const bool agree = gap <= ctx.config.tie_tolerance;
        ties.push_back({{"family", f.label()}, {"bump", bi}, {"gap", gap}, {"agree", agree}});
        if (!agree) ctx.outcome = worst(ctx.outcome, Outcome::Fail);
      }
    }
  ctx.calibration["tie"] = ties;
}

void run_mass(Context& ctx, const CatalogMetric& m) {
  const auto families = build_families(ctx.config, m);
  const int k = ctx.config.total_degree();
  std::vector<Real> radii = ctx.config.radii;
  if (radii.empty()) radii = {0.9 * ctx.config.radius, 0.7 * ctx.config.radius, 0.5 * ctx.config.radius};
  Point center = Point::Zero(ctx.chart.dimension());
  if (!ctx.config.bumps.empty())
    for (std::size_t a = 0; a < ctx.config.bumps[0].center.size(); ++a)
      center(static_cast<Eigen::Index>(a)) = ctx.config.bumps[0].center[a];
  json tables = json::array();
  for (const auto& f : families) {
    std::vector<std::pair<Real, PairingReport>> reps;
    for (std::size_t i = 0; i < radii.size(); ++i) {
      BumpOptions opt;
      opt.seed = ctx.config.seed;
      const BumpForm b = bump_form(ctx.chart, center, k, radii[i], m.h.degeneracy(), opt);
      reps.emplace_back(radii[i], current_report(ctx.config, f, b, ctx.limit_options()));
      ctx.record(reps.back().second, f.label(), i);
    }
    const MassTable t = mass_estimate(reps, ctx.config.tolerance);
    json rows = json::array();
    for (const auto& r : t.rows)
      rows.push_back({{"radius", r.radius}, {"mass", cx(r.mass)}, {"error", r.error}, {"converged", r.converged}});
    tables.push_back({{"family", f.label()}, {"rows", rows}, {"locally_finite", t.locally_finite}});
    if (!t.locally_finite) ctx.outcome = worst(ctx.outcome, Outcome::Fail);
  }
  ctx.calibration["mass"] = tables;
}

void run_cohomology(Context& ctx) {
  const std::vector<Real> schedule =
      ctx.config.schedule.empty() ? geometric_schedule(0.4, 0.7, 5) : ctx.config.schedule;
  const CohomologyReport r = cohomology_check(ctx.config.total_degree(), ctx.config.resolution, schedule,
                                              ctx.config.partitions, ctx.config.tolerance);
  ctx.record(r.singular, "sections {X1, eps X0}", 0);
  ctx.calibration["cohomology"] = r.to_json();
  ctx.outcome = worst(ctx.outcome, r.outcome);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  Context ctx(config);
  if (config.pipeline != Pipeline::Symbolic && config.pipeline != Pipeline::Cohomology) {
    ctx.calibration["kernels"] = json::object();
    for (const Mollifier& k : {Mollifier::bump(), Mollifier::truncated_gaussian()})
      ctx.calibration["kernels"][k.name()] = k.calibration_error(config.dimension);
  }
  switch (config.pipeline) {
    case Pipeline::Symbolic: run_symbolic(ctx); break;
    case Pipeline::Cohomology: run_cohomology(ctx); break;
    default: {
      const CatalogMetric m = catalog_metric(ctx.chart, config.metric);
      if (config.pipeline == Pipeline::ChernForms) run_chern_forms(ctx, m);
      if (config.pipeline == Pipeline::Segre) run_segre(ctx, m);
      if (config.pipeline == Pipeline::Converge) run_converge(ctx, m);
      if (config.pipeline == Pipeline::Iterated) run_iterated(ctx, m);
      if (config.pipeline == Pipeline::Mass) run_mass(ctx, m);
    }
  }
  const Real seconds = std::chrono::duration<Real>(std::chrono::steady_clock::now() - start).count();
  ExperimentResult r;
  r.outcome = ctx.outcome;
  r.csv = ctx.csv.str();
  r.report = {{"config", config.to_json()},
              {"calibration", ctx.calibration},
              {"pairings", ctx.pairings},
              {"extrapolation", ctx.extrapolations},
              {"verdict", to_string(ctx.outcome)},
              {"timings", {{"total_seconds", seconds}}}};
  return r;
}

void write_result(const ExperimentConfig& config, const ExperimentResult& result) {
  std::filesystem::create_directories(config.out);
  const std::filesystem::path base = std::filesystem::path(config.out) / config.name;
  std::ofstream js(base.string() + ".json");
  js << result.report.dump(2) << "\n";
  std::ofstream cs(base.string() + ".csv");
  cs << result.csv;
  if (!js || !cs) throw std::runtime_error("could not write reports under " + config.out);
}

}  // namespace chern
