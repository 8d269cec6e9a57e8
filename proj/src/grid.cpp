#include "chern/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace chern {

Chart::Chart(std::vector<Complex> center, std::vector<Real> radius, std::vector<int> resolution)
    : center_(std::move(center)), radius_(std::move(radius)), resolution_(std::move(resolution)) {
  const std::size_t n = center_.size();
  if (n == 0 || static_cast<int>(n) > kMaxDim) throw std::invalid_argument("chart dimension out of range");
  if (radius_.size() != n || resolution_.size() != n)
    throw std::invalid_argument("chart center, radius and resolution must have equal length");
  for (std::size_t a = 0; a < n; ++a) {
    if (!(radius_[a] > 0)) throw std::invalid_argument("chart radius must be positive");
    if (resolution_[a] < 8) throw std::invalid_argument("chart resolution must be at least 8 per axis");
    spacing_.push_back(2.0 * radius_[a] / (resolution_[a] - 1));
  }
  stride_.assign(2 * n, 1);
  for (int ax = static_cast<int>(2 * n) - 2; ax >= 0; --ax)
    stride_[static_cast<std::size_t>(ax)] =
        stride_[static_cast<std::size_t>(ax) + 1] * static_cast<std::size_t>(axis_points(ax + 1));
  node_count_ = stride_[0] * static_cast<std::size_t>(axis_points(0));
}

Chart Chart::cube(int n, Real radius, int resolution) {
  const auto un = static_cast<std::size_t>(n);
  return Chart(std::vector<Complex>(un, Complex(0)), std::vector<Real>(un, radius),
               std::vector<int>(un, resolution));
}

Real Chart::axis_coordinate(int real_axis, int i) const {
  const auto a = static_cast<std::size_t>(real_axis / 2);
  const Real c = (real_axis % 2 == 0) ? center_[a].real() : center_[a].imag();
  return c - radius_[a] + i * spacing_[a];
}

Point Chart::point(std::size_t node) const {
  const int n = dimension();
  Point z(n);
  for (int a = 0; a < n; ++a)
    z(a) = Complex(axis_coordinate(2 * a, index_along(node, 2 * a)),
                   axis_coordinate(2 * a + 1, index_along(node, 2 * a + 1)));
  return z;
}

int Chart::boundary_layer(std::size_t node) const {
  int layer = 1 << 30;
  for (int ax = 0; ax < real_axes(); ++ax) {
    const int i = index_along(node, ax);
    layer = std::min({layer, i, axis_points(ax) - 1 - i});
  }
  return layer;
}

Real Chart::cell_volume() const {
  Real v = 1;
  for (Real h : spacing_) v *= h * h;
  return v;
}

Chart Chart::sub_chart(const std::vector<int>& axes) const {
  std::vector<Complex> c;
  std::vector<Real> r;
  std::vector<int> res;
  for (int a : axes) {
    if (a < 0 || a >= dimension()) throw std::out_of_range("sub_chart: axis out of range");
    c.push_back(center_[static_cast<std::size_t>(a)]);
    r.push_back(radius_[static_cast<std::size_t>(a)]);
    res.push_back(resolution_[static_cast<std::size_t>(a)]);
  }
  return Chart(std::move(c), std::move(r), std::move(res));
}

// ---------------------------------------------------------------------------

Region Region::box(std::vector<int> lo, std::vector<int> hi) {
  if (lo.size() != hi.size()) throw std::invalid_argument("box bounds must have equal length");
  Region r(Kind::Box);
  r.lo_ = std::move(lo);
  r.hi_ = std::move(hi);
  return r;
}

Region Region::interior(const Chart& chart, int margin) {
  std::vector<int> lo, hi;
  for (int ax = 0; ax < chart.real_axes(); ++ax) {
    lo.push_back(margin);
    hi.push_back(chart.axis_points(ax) - 1 - margin);
    if (hi.back() <= lo.back()) throw std::invalid_argument("interior margin leaves no cells");
  }
  return box(std::move(lo), std::move(hi));
}

Region Region::ball(Point center, Real radius) {
  Region r(Kind::Ball);
  r.center_ = std::move(center);
  r.radius_ = radius;
  return r;
}

Region Region::exterior(Point center, Real radius) {
  Region r(Kind::Exterior);
  r.center_ = std::move(center);
  r.radius_ = radius;
  return r;
}

namespace {

std::vector<Real> axis_weights(int points, int lo, int hi, Real h, QuadratureRule rule) {
  std::vector<Real> w(static_cast<std::size_t>(points), 0.0);
  const int cells = hi - lo;
  if (rule == QuadratureRule::Simpson && cells % 2 == 0 && cells >= 2) {
    for (int i = lo; i <= hi; ++i) {
      const int k = i - lo;
      Real c = (k == 0 || k == cells) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      w[static_cast<std::size_t>(i)] = c * h / 3.0;
    }
    return w;
  }
  if (rule == QuadratureRule::Simpson)
    throw std::invalid_argument("Simpson rule needs an even number of cells per axis");
  for (int i = lo; i <= hi; ++i) w[static_cast<std::size_t>(i)] = (i == lo || i == hi) ? 0.5 * h : h;
  return w;
}

Real squared_distance(const Point& z, const Point& c) { return (z - c).squaredNorm(); }

// Fraction of the node's cell inside the ball, by 4 samples per real axis
// for cells cut by the sphere.
Real cell_fraction_in_ball(const Chart& chart, const Point& z, const Point& c, Real radius) {
  const int n = chart.dimension();
  Real half_diag2 = 0;
  for (int a = 0; a < n; ++a) half_diag2 += 0.5 * chart.spacing(a) * chart.spacing(a);
  const Real d = std::sqrt(squared_distance(z, c));
  const Real hd = std::sqrt(half_diag2);
  if (d + hd <= radius) return 1.0;
  if (d - hd >= radius) return 0.0;
  constexpr int kSub = 4;
  const int axes = 2 * n;
  std::size_t total = 1;
  for (int ax = 0; ax < axes; ++ax) total *= kSub;
  std::size_t inside = 0;
  Point p(n);
  for (std::size_t s = 0; s < total; ++s) {
    std::size_t rem = s;
    for (int a = 0; a < n; ++a) {
      const Real h = chart.spacing(a);
      const int ix = static_cast<int>(rem % kSub);
      rem /= kSub;
      const int iy = static_cast<int>(rem % kSub);
      rem /= kSub;
      p(a) = z(a) + Complex((ix + 0.5) / kSub - 0.5, (iy + 0.5) / kSub - 0.5) * h;
    }
    if (squared_distance(p, c) < radius * radius) ++inside;
  }
  return static_cast<Real>(inside) / static_cast<Real>(total);
}

}  // namespace

std::vector<Real> Region::weights(const Chart& chart, QuadratureRule rule) const {
  const std::size_t count = chart.node_count();
  std::vector<Real> w(count, 0.0);
  if (kind_ == Kind::Whole || kind_ == Kind::Box) {
    std::vector<std::vector<Real>> per_axis;
    for (int ax = 0; ax < chart.real_axes(); ++ax) {
      int lo = 0, hi = chart.axis_points(ax) - 1;
      if (kind_ == Kind::Box) {
        if (lo_.size() != static_cast<std::size_t>(chart.real_axes()))
          throw ChartMismatch("box region has wrong number of axes");
        lo = std::max(lo, lo_[static_cast<std::size_t>(ax)]);
        hi = std::min(hi, hi_[static_cast<std::size_t>(ax)]);
      }
      per_axis.push_back(axis_weights(chart.axis_points(ax), lo, hi, chart.spacing(ax / 2), rule));
    }
    for (std::size_t node = 0; node < count; ++node) {
      Real v = 1;
      for (int ax = 0; ax < chart.real_axes() && v != 0; ++ax)
        v *= per_axis[static_cast<std::size_t>(ax)][static_cast<std::size_t>(chart.index_along(node, ax))];
      w[node] = v;
    }
    return w;
  }
  if (rule != QuadratureRule::Trapezoid)
    throw std::invalid_argument("ball regions support only the trapezoid rule");
  if (center_.size() != chart.dimension()) throw ChartMismatch("region center has wrong dimension");
  const Real cell = chart.cell_volume();
  for (std::size_t node = 0; node < count; ++node) {
    const Real f = cell_fraction_in_ball(chart, chart.point(node), center_, radius_);
    w[node] = cell * (kind_ == Kind::Ball ? f : 1.0 - f);
  }
  return w;
}

bool Region::contains(const Chart& chart, std::size_t node) const {
  switch (kind_) {
    case Kind::Whole: return true;
    case Kind::Box:
      for (int ax = 0; ax < chart.real_axes(); ++ax) {
        const int i = chart.index_along(node, ax);
        if (i < lo_[static_cast<std::size_t>(ax)] || i > hi_[static_cast<std::size_t>(ax)]) return false;
      }
      return true;
    case Kind::Ball: return squared_distance(chart.point(node), center_) < radius_ * radius_;
    case Kind::Exterior: return squared_distance(chart.point(node), center_) > radius_ * radius_;
  }
  return false;
}

}  // namespace chern
