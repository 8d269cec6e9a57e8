// Rectangular grids over polydisc charts and the quadrature built on them.
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace chern {

using Real = double;
using Complex = std::complex<double>;

/// Largest complex dimension handled by the fixed-capacity small types.
/// Total spaces of projectivized bundles count here as well.
inline constexpr int kMaxDim = 5;

using Point = Eigen::Matrix<Complex, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

class ChartMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A polydisc chart sampled on a uniform grid.
///
/// Complex axis a carries two real grid axes (Re z_a, Im z_a), each with
/// resolution[a] points on [Re c_a - r_a, Re c_a + r_a] (resp. Im), so the
/// grid has prod(resolution[a]^2) nodes. Real axis 2a is Re z_a, 2a+1 is
/// Im z_a; the last real axis varies fastest.
class Chart {
 public:
  Chart(std::vector<Complex> center, std::vector<Real> radius, std::vector<int> resolution);
  /// Chart centred at 0 with the same radius and resolution on each axis.
  static Chart cube(int n, Real radius, int resolution);

  int dimension() const { return static_cast<int>(center_.size()); }
  int real_axes() const { return 2 * dimension(); }
  std::size_t node_count() const { return node_count_; }

  const std::vector<Complex>& center() const { return center_; }
  const std::vector<Real>& radius() const { return radius_; }
  const std::vector<int>& resolution() const { return resolution_; }

  Real spacing(int complex_axis) const { return spacing_[static_cast<std::size_t>(complex_axis)]; }
  int axis_points(int real_axis) const { return resolution_[static_cast<std::size_t>(real_axis / 2)]; }
  std::size_t stride(int real_axis) const { return stride_[static_cast<std::size_t>(real_axis)]; }
  /// Coordinate of grid index i along a real axis.
  Real axis_coordinate(int real_axis, int i) const;

  int index_along(std::size_t node, int real_axis) const {
    return static_cast<int>((node / stride(real_axis)) % static_cast<std::size_t>(axis_points(real_axis)));
  }
  Point point(std::size_t node) const;
  /// Smallest distance (in grid cells, over all real axes) to the boundary.
  int boundary_layer(std::size_t node) const;
  /// Product of real spacings: the volume of one grid cell.
  Real cell_volume() const;

  /// Chart on the complex axes listed in `axes`, with their parameters.
  Chart sub_chart(const std::vector<int>& axes) const;

  friend bool operator==(const Chart&, const Chart&) = default;

 private:
  std::vector<Complex> center_;
  std::vector<Real> radius_;
  std::vector<int> resolution_;
  std::vector<Real> spacing_;
  std::vector<std::size_t> stride_;
  std::size_t node_count_ = 0;
};

enum class QuadratureRule { Trapezoid, Simpson };

/// Integration region on a chart.
///
/// Box snaps to grid nodes and uses the product rule. Ball and Exterior
/// weight each node by the fraction of its cell inside the set, estimated by
/// sub-sampling boundary cells; interior cells carry full weight.
class Region {
 public:
  enum class Kind { Whole, Box, Ball, Exterior };

  static Region whole() { return Region(Kind::Whole); }
  /// Index range [lo, hi] per real axis (inclusive).
  static Region box(std::vector<int> lo, std::vector<int> hi);
  /// Sub-box leaving `margin` cells on every side.
  static Region interior(const Chart& chart, int margin);
  static Region ball(Point center, Real radius);
  static Region exterior(Point center, Real radius);

  Kind kind() const { return kind_; }
  const Point& center() const { return center_; }
  Real radius() const { return radius_; }

  /// Quadrature weights per node (zero outside). Includes the cell volume.
  std::vector<Real> weights(const Chart& chart, QuadratureRule rule = QuadratureRule::Trapezoid) const;
  /// Whether the node lies in the region (for sup-norm style diagnostics).
  bool contains(const Chart& chart, std::size_t node) const;

 private:
  explicit Region(Kind k) : kind_(k) {}
  Kind kind_;
  std::vector<int> lo_, hi_;
  Point center_;
  Real radius_ = 0;
};

/// Deterministic pairwise sum; identical on every run.
template <class T>
T pairwise_sum(std::span<const T> values) {
  constexpr std::size_t kLeaf = 256;
  if (values.size() <= kLeaf) {
    T acc{};
    for (const T& v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

/// Deterministic pairwise sum of f(i) for i in [0, count).
template <class T, class Fn>
T pairwise_sum_indexed(std::size_t count, Fn&& f) {
  constexpr std::size_t kBlock = 1024;
  std::vector<T> blocks;
  blocks.reserve(count / kBlock + 1);
  for (std::size_t start = 0; start < count; start += kBlock) {
    const std::size_t end = std::min(count, start + kBlock);
    T acc{};
    for (std::size_t i = start; i < end; ++i) acc += f(i);
    blocks.push_back(acc);
  }
  return pairwise_sum(std::span<const T>(blocks));
}

}  // namespace chern
