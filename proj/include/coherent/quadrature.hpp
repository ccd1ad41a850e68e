#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "coherent/errors.hpp"

namespace coherent {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [lo, hi]; nodes by Newton iteration on P_n.
inline QuadratureRule gauss_legendre(std::size_t n, double lo = -1.0, double hi = 1.0) {
  if (n == 0) throw config_error("gauss_legendre: zero nodes");
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  if (n == 1) return QuadratureRule{{mid}, {2.0 * half}};
  QuadratureRule rule{std::vector<double>(n), std::vector<double>(n)};
  const auto nd = static_cast<double>(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const auto kd = static_cast<double>(k);
        const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
        p0 = p1;
        p1 = p2;
      }
      dp = nd * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = mid - half * x;
    rule.nodes[n - 1 - i] = mid + half * x;
    rule.weights[i] = rule.weights[n - 1 - i] = half * w;
  }
  return rule;
}

/// Nodes and normalized weights for E f(Z), Z ~ N(0,1), truncated to
/// [-span, span] and integrated with Gauss-Legendre.
inline QuadratureRule truncated_normal_rule(std::size_t n, double span = 8.0) {
  QuadratureRule rule = gauss_legendre(n, -span, span);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rule.weights[i] *= std::exp(-0.5 * rule.nodes[i] * rule.nodes[i]);
    total += rule.weights[i];
  }
  for (double& w : rule.weights) w /= total;
  return rule;
}

}  // namespace coherent
