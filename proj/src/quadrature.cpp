#include "chern/quadrature.hpp"

#include "chern/forms.hpp"

#include <boost/math/special_functions/legendre.hpp>

#include <algorithm>
#include <cmath>

namespace chern {

std::pair<std::vector<Real>, std::vector<Real>> gauss_legendre(int points) {
  if (points < 1) throw std::invalid_argument("Gauss-Legendre rule needs at least one point");
  const auto positive = boost::math::legendre_p_zeros<Real>(points);
  std::vector<Real> x, w;
  for (Real z : positive) {
    const Real dp = boost::math::legendre_p_prime<Real>(points, z);
    const Real weight = 2.0 / ((1.0 - z * z) * dp * dp);
    x.push_back(z);
    w.push_back(weight);
    if (z != 0.0) {
      x.push_back(-z);
      w.push_back(weight);
    }
  }
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<Real> xs, ws;
  for (std::size_t i : order) {
    xs.push_back(x[i]);
    ws.push_back(w[i]);
  }
  return {xs, ws};
}

std::vector<std::pair<Point, Real>> simplex_torus_rule(int f, int radial, int angular, bool phase_of_first) {
  if (f < 0 || f + 1 > kMaxDim) throw std::invalid_argument("simplex-torus rule: dimension out of range");
  if (radial < 1 || angular < 1) throw std::invalid_argument("simplex-torus rule needs positive point counts");
  const auto [x, w] = gauss_legendre(radial);
  const int phases = phase_of_first ? angular : 1;
  std::vector<std::pair<Point, Real>> out;
  std::vector<int> ix(static_cast<std::size_t>(f), 0), it(static_cast<std::size_t>(f + 1), 0);
  Real simplex_volume = 1;
  for (int i = 2; i <= f; ++i) simplex_volume /= i;
  while (true) {
    Point v(f + 1);
    Real rest = 1, weight = 1 / (simplex_volume * phases);
    for (int i = 0; i < f; ++i) {
      const auto k = static_cast<std::size_t>(ix[static_cast<std::size_t>(i)]);
      const Real t = rest * 0.5 * (x[k] + 1);
      weight *= 0.5 * w[k] * rest / angular;
      v(i + 1) = std::polar(std::sqrt(t), 2 * kPi * it[static_cast<std::size_t>(i + 1)] / angular);
      rest -= t;
    }
    v(0) = std::polar(std::sqrt(std::max<Real>(rest, 0)), 2 * kPi * it[0] / angular);
    out.emplace_back(v, weight);
    // odometer over the cube indices, then the phases
    int i = 0;
    for (; i < 2 * f + 1; ++i) {
      if (i < f) {
        if (++ix[static_cast<std::size_t>(i)] < radial) break;
        ix[static_cast<std::size_t>(i)] = 0;
      } else {
        const int j = i - f == f ? 0 : i - f + 1;
        if (++it[static_cast<std::size_t>(j)] < (j == 0 ? phases : angular)) break;
        it[static_cast<std::size_t>(j)] = 0;
      }
    }
    if (i == 2 * f + 1) break;
  }
  return out;
}

}  // namespace chern
