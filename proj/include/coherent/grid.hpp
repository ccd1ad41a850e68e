#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "coherent/errors.hpp"

namespace coherent {

inline double normal_pdf(double y, double mean, double variance) {
  const double d = y - mean;
  return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

inline double normal_cdf(double y, double mean, double variance) {
  return 0.5 * std::erfc(-(y - mean) / std::sqrt(2.0 * variance));
}

/// Smallest y in [lo, hi] with cdf(y) >= q, by bisection to round-off.
template <typename Cdf>
double invert_cdf(Cdf&& cdf, double q, double lo, double hi) {
  while (cdf(lo) > q) lo -= 2.0 * (hi - lo);
  while (cdf(hi) < q) hi += 2.0 * (hi - lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (cdf(mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double normal_quantile(double q, double mean, double variance) {
  const double sd = std::sqrt(variance);
  return invert_cdf([&](double y) { return normal_cdf(y, mean, variance); }, q, mean - 10.0 * sd,
                    mean + 10.0 * sd);
}

/// Throws unless the abscissae are finite and strictly increasing.
inline void validate_grid(std::span<const double> grid) {
  if (grid.empty()) throw shape_error("empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw shape_error("grid abscissa is not finite");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw shape_error("grid is not strictly increasing");
  }
}

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t points) {
  if (points < 2 || !(hi > lo)) throw config_error("grid needs at least 2 points and hi > lo");
  std::vector<double> g(points);
  const double h = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = lo + h * static_cast<double>(i);
  g.back() = hi;
  return g;
}

inline double trapezoid(std::span<const double> x, std::span<const double> f) {
  if (x.size() != f.size()) throw shape_error("trapezoid: size mismatch");
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (f[i] + f[i - 1]);
  return s;
}

/// p(y) tabulated on strictly increasing abscissae.
struct DensityGrid {
  std::vector<double> grid;
  std::vector<double> density;

  std::size_t size() const noexcept { return grid.size(); }
  double integral() const { return trapezoid(grid, density); }

  bool same_grid(const DensityGrid& other) const { return grid == other.grid; }

  /// Non-negative and integrating to 1 within `tol`.
  bool is_valid(double tol = 1e-3) const {
    for (double d : density)
      if (!(d >= 0.0) || !std::isfinite(d)) return false;
    return std::abs(integral() - 1.0) <= tol;
  }
};

}  // namespace coherent
