// Small fixed quadrature rules shared by fiber integration and mollification.
#pragma once

#include "chern/grid.hpp"

#include <utility>
#include <vector>

namespace chern {

/// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<std::vector<Real>, std::vector<Real>> gauss_legendre(int points);

/// Uniform probability on the unit sphere of C^{f+1}, written through
/// t_i = |v_i|^2 (uniform on the simplex) and the phases of the entries.
/// The simplex is collapsed onto a cube, t_1 = x_1, t_2 = (1 - x_1) x_2, ...,
/// with `radial` Gauss-Legendre points per cube axis and `angular` trapezoid
/// points per phase. With `phase_of_first` false, v_0 is real and positive,
/// which is the normalized Fubini-Study measure on P^f.
std::vector<std::pair<Point, Real>> simplex_torus_rule(int f, int radial, int angular, bool phase_of_first);

}  // namespace chern
