#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coherent/errors.hpp"
#include "coherent/grid.hpp"
#include "coherent/model.hpp"

namespace coherent {

// ---------------------------------------------------------------------------
// Sequential coherence: p_t(y) = int p_{t+1}(y | x) p_t(x) dx.
// ---------------------------------------------------------------------------

enum class IntegrationKind { binary_sum, trapezoid };

struct IntegrationSpec {
  IntegrationKind kind = IntegrationKind::trapezoid;
  /// Abscissae for x when kind == trapezoid.
  std::vector<double> nodes;

  static IntegrationSpec binary() { return {IntegrationKind::binary_sum, {}}; }
  static IntegrationSpec trapezoid_on(double lo, double hi, std::size_t count) {
    return {IntegrationKind::trapezoid, uniform_grid(lo, hi, count)};
  }
};

struct CoherenceReport {
  std::vector<double> grid;
  std::vector<double> lhs;
  std::vector<double> rhs;
  std::vector<double> residual;
  double sup_residual = 0.0;
  std::string quadrature_rule;
  std::size_t quadrature_nodes = 0;
  /// Richardson estimate of the quadrature error in rhs (sup over grid).
  double quadrature_error = 0.0;
  std::optional<std::size_t> mc_paths;
};

/// Anything whose predictive can be evaluated before and after one more
/// observation.
template <typename M>
concept CoherenceCheckable = requires(const M& model, const typename M::state_type& s,
                                      std::span<const double> grid) {
  typename M::state_type;
  { M::support } -> std::convertible_to<Support>;
  { model.density_on_grid(s, grid) } -> std::same_as<DensityGrid>;
};

/// Callable x -> p_{t+1}(. | x) on `grid`. Uses the model's own
/// next_density_given when it has one, else copies the state and appends.
template <CoherenceCheckable Model>
auto next_density_family(const Model& model, const typename Model::state_type& state,
                         std::span<const double> grid) {
  if constexpr (requires { model.next_density_given(state, grid); }) {
    return model.next_density_given(state, grid);
  } else {
    return [&model, &state, g = std::vector<double>(grid.begin(), grid.end())](double x) {
      auto next = state;
      model.append(next, x);
      return model.density_on_grid(next, g);
    };
  }
}

template <CoherenceCheckable Model>
CoherenceReport check_coherence(const Model& model, const typename Model::state_type& state,
                                std::span<const double> grid, const IntegrationSpec& spec) {
  CoherenceReport report;
  const bool binary = Model::support == Support::binary;
  if (binary != (spec.kind == IntegrationKind::binary_sum))
    throw capability_error(binary ? "binary-support model needs binary_sum integration"
                                  : "continuous-support model needs quadrature integration");

  std::vector<double> nodes;
  std::vector<double> weights;
  if (binary) {
    nodes = {0.0, 1.0};
    weights = {1.0, 1.0};
    report.quadrature_rule = "exact two-point sum";
  } else {
    nodes = spec.nodes;
    validate_grid(nodes);
    if (nodes.size() < 3) throw config_error("trapezoid needs at least 3 nodes");
    weights.assign(nodes.size(), 0.0);
    for (std::size_t j = 1; j < nodes.size(); ++j) {
      const double h = 0.5 * (nodes[j] - nodes[j - 1]);
      weights[j - 1] += h;
      weights[j] += h;
    }
    report.quadrature_rule = "composite trapezoid";
  }
  report.quadrature_nodes = nodes.size();

  const DensityGrid lhs = model.density_on_grid(state, grid);
  const DensityGrid at_nodes = model.density_on_grid(state, nodes);
  auto next = next_density_family(model, state, grid);

  const std::size_t G = lhs.size();
  std::vector<double> fine(G, 0.0), coarse(G, 0.0);
  // Coarse rule: every other node, trapezoid on the odd-length prefix.
  const std::size_t coarse_last = nodes.size() % 2 == 1 ? nodes.size() - 1 : nodes.size() - 2;
  auto coarse_weight = [&](std::size_t j) {
    if (j % 2 == 1 || j > coarse_last) return 0.0;
    double w = 0.0;
    if (j >= 2) w += 0.5 * (nodes[j] - nodes[j - 2]);
    if (j + 2 <= coarse_last) w += 0.5 * (nodes[j + 2] - nodes[j]);
    return w;
  };

  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const double px = at_nodes.density[j];
    if (px == 0.0) continue;
    const DensityGrid given = next(nodes[j]);
    const double wf = weights[j] * px;
    const double wc = binary ? 0.0 : coarse_weight(j) * px;
    for (std::size_t i = 0; i < G; ++i) {
      fine[i] += wf * given.density[i];
      coarse[i] += wc * given.density[i];
    }
  }

  report.grid = lhs.grid;
  report.lhs = lhs.density;
  report.rhs = fine;
  report.residual.resize(G);
  for (std::size_t i = 0; i < G; ++i) {
    report.residual[i] = std::abs(lhs.density[i] - fine[i]);
    report.sup_residual = std::max(report.sup_residual, report.residual[i]);
    if (!binary)
      report.quadrature_error = std::max(report.quadrature_error, std::abs(fine[i] - coarse[i]) / 3.0);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Concentration.
// ---------------------------------------------------------------------------

/// psi^(1)(x), x > 0: recurrence up to x >= 10, then the asymptotic series.
inline double trigamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw domain_error("trigamma needs x > 0");
  double acc = 0.0;
  while (x < 10.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double r = 1.0 / x, r2 = r * r;
  // 1/x + 1/(2x^2) + sum_k B_2k / x^(2k+1)
  const double series =
      r * (1.0 + r * 0.5 +
           r * r * (1.0 / 6.0 + r2 * (-1.0 / 30.0 + r2 * (1.0 / 42.0 + r2 * (-1.0 / 30.0 +
           r2 * (5.0 / 66.0 + r2 * (-691.0 / 2730.0 + r2 * (7.0 / 6.0))))))));
  return acc + series;
}

/// phi(0 | 0, tau) = (2 pi tau)^(-1/2), the peak of the narrowest kernel.
inline double kernel_peak(double tau) {
  if (!(tau > 0.0)) throw domain_error("tau must be positive");
  return 1.0 / std::sqrt(2.0 * std::numbers::pi * tau);
}

/// Envelope on one predictive increment: |p_t(y) - p_{t+1}(y)| <= c/(t+1).
inline double step_bound(std::size_t t, double tau) {
  return kernel_peak(tau) / (static_cast<double>(t) + 1.0);
}

struct ConcentrationQuery {
  std::size_t n = 0;
  std::size_t m = 0;
  double tau = 1.0;
  double epsilon = 1.0;

  double c() const { return kernel_peak(tau); }

  void validate() const {
    if (n < 1) throw config_error("concentration query needs n >= 1");
    if (!(tau > 0.0)) throw domain_error("tau must be positive");
    if (!(epsilon > 0.0)) throw domain_error("epsilon must be positive");
  }
};

/// sum_{j=n+1}^{n+m} (j+1)^-2 as psi1(n+2) - psi1(n+m+2).
inline double increment_sum(std::size_t n, std::size_t m) {
  if (m == 0) return 0.0;
  return trigamma(static_cast<double>(n) + 2.0) - trigamma(static_cast<double>(n + m) + 2.0);
}

inline double increment_sum_direct(std::size_t n, std::size_t m) {
  double s = 0.0;
  // Smallest terms first.
  for (std::size_t j = n + m; j > n; --j) {
    const double d = static_cast<double>(j) + 1.0;
    s += 1.0 / (d * d);
  }
  return s;
}

namespace detail {
inline double log_azuma(double epsilon, double c, double sum) {
  if (sum <= 0.0) return 0.0;
  return std::min(0.0, std::numbers::ln2 - epsilon * epsilon / (2.0 * c * c * sum));
}
inline double azuma(double epsilon, double c, double sum) { return std::exp(log_azuma(epsilon, c, sum)); }
}  // namespace detail

/// Pr{|p_N(y) - p_n(y)| >= eps} <= 2 exp(-eps^2 / (2 c^2 sum (j+1)^-2)), capped at 1.
inline double concentration_bound(const ConcentrationQuery& q) {
  q.validate();
  return detail::azuma(q.epsilon, q.c(), increment_sum(q.n, q.m));
}

/// Natural log of concentration_bound; stays finite where the bound underflows.
inline double log_concentration_bound(const ConcentrationQuery& q) {
  q.validate();
  return detail::log_azuma(q.epsilon, q.c(), increment_sum(q.n, q.m));
}

inline double concentration_bound_direct(const ConcentrationQuery& q) {
  q.validate();
  return detail::azuma(q.epsilon, q.c(), increment_sum_direct(q.n, q.m));
}

/// Deviation eps at which the bound equals alpha.
inline double concentration_half_width(std::size_t n, std::size_t m, double tau, double alpha = 0.05) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw domain_error("alpha must lie in (0, 2)");
  const double c = kernel_peak(tau);
  return std::sqrt(2.0 * c * c * increment_sum(n, m) * std::log(2.0 / alpha));
}

struct ConeRow {
  std::size_t n;
  std::size_t m;
  double bound;
  double half_width;
};

/// Bound at fixed eps and the alpha-level half-width for each n, fixed m.
inline std::vector<ConeRow> uncertainty_cone(std::span<const std::size_t> ns, std::size_t m, double tau,
                                             double epsilon, double alpha = 0.05) {
  std::vector<ConeRow> rows;
  rows.reserve(ns.size());
  for (std::size_t n : ns)
    rows.push_back({n, m, concentration_bound({n, m, tau, epsilon}),
                    concentration_half_width(n, m, tau, alpha)});
  return rows;
}

}  // namespace coherent
