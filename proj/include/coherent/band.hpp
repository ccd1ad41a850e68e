#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "coherent/errors.hpp"
#include "coherent/grid.hpp"

namespace coherent {

/// Quantile of sorted data by linear interpolation between order
/// statistics at position q (M - 1).
inline double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw shape_error("quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double empirical_quantile(std::vector<double> data, double q) {
  std::sort(data.begin(), data.end());
  return sorted_quantile(data, q);
}

inline void validate_level(double level) {
  if (!(level > 0.0 && level <= 1.0)) throw domain_error("credible level must lie in (0,1]");
}

struct CredibleInterval {
  double lower;
  double mean;
  double upper;
  double level;
};

inline CredibleInterval credible_interval(std::span<const double> draws, double level) {
  validate_level(level);
  std::vector<double> v(draws.begin(), draws.end());
  if (v.empty()) throw shape_error("credible interval of empty ensemble");
  std::sort(v.begin(), v.end());
  double mean = 0.0;
  for (double x : draws) mean += x;
  mean /= static_cast<double>(v.size());
  return {sorted_quantile(v, 0.5 * (1.0 - level)), mean, sorted_quantile(v, 0.5 * (1.0 + level)),
          level};
}

/// Point-wise envelope of an ensemble of densities on a common grid.
struct CredibleBand {
  std::vector<double> grid;
  std::vector<double> lower;
  std::vector<double> mean;
  std::vector<double> upper;
  /// Monte Carlo standard error of `mean` at each abscissa.
  std::vector<double> mean_se;
  double level = 0.0;
  std::size_t paths = 0;
  std::vector<std::string> warnings;

  DensityGrid mean_density() const { return {grid, mean}; }
};

inline CredibleBand credible_band(std::span<const DensityGrid> draws, double level) {
  validate_level(level);
  if (draws.empty()) throw shape_error("credible band of empty ensemble");
  const auto& grid = draws.front().grid;
  for (const auto& d : draws)
    if (d.grid != grid || d.density.size() != grid.size())
      throw shape_error("ensemble densities are on different grids");

  const std::size_t M = draws.size(), G = grid.size();
  CredibleBand band{grid, std::vector<double>(G), std::vector<double>(G), std::vector<double>(G),
                    std::vector<double>(G), level, M, {}};
  if (M < 20)
    band.warnings.push_back("only " + std::to_string(M) + " paths; band quantiles are unstable");

  std::vector<double> column(M);
  for (std::size_t i = 0; i < G; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      column[j] = draws[j].density[i];
      sum += column[j];
    }
    const double mean = sum / static_cast<double>(M);
    double ss = 0.0;
    for (double x : column) ss += (x - mean) * (x - mean);
    std::sort(column.begin(), column.end());
    band.lower[i] = sorted_quantile(column, 0.5 * (1.0 - level));
    band.upper[i] = sorted_quantile(column, 0.5 * (1.0 + level));
    band.mean[i] = mean;
    band.mean_se[i] = M > 1 ? std::sqrt(ss / static_cast<double>(M - 1) / static_cast<double>(M)) : 0.0;
  }
  return band;
}

}  // namespace coherent
