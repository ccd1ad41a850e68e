#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coherent/band.hpp"
#include "coherent/errors.hpp"
#include "coherent/grid.hpp"
#include "coherent/model.hpp"
#include "coherent/quadrature.hpp"

namespace coherent {

// ---------------------------------------------------------------------------
// Mixing law of the kernel scale chi after k backward steps from N_eff.
// ---------------------------------------------------------------------------

/// Below this, eta - 1 is treated as zero and chi as the constant eta.
inline constexpr double kEtaFloor = 1e-10;

struct MixingMoments {
  double eta;
  double nu;
};

/// Moments of chi = Z_1 ... Z_k with independent Z_h ~ Geometric(rho_h) on
/// {1, 2, ...}, rho_h = (N_eff - h) / (N_eff - h + 1):
///   eta = prod 1/rho_h,   nu = prod (2 - rho_h)/rho_h^2 - prod 1/rho_h^2.
/// nu is evaluated as eta^2 expm1(sum log1p(1 - rho_h)), which is the same
/// product without the cancellation.
inline MixingMoments chi_moments(std::size_t n_eff, std::size_t k) {
  if (k < 1 || k >= n_eff) throw domain_error("chi_moments needs 1 <= k < N_eff");
  double inv_rho = 1.0, log_second = 0.0;
  for (std::size_t h = 1; h <= k; ++h) {
    const double rest = static_cast<double>(n_eff - h);
    inv_rho *= (rest + 1.0) / rest;
    log_second += std::log1p(1.0 / (rest + 1.0));
  }
  return {inv_rho, inv_rho * inv_rho * std::expm1(log_second)};
}

/// Moments of chi ~ Geometric(rho) on {1, 2, ...}, rho = (N_eff - k)/N_eff.
/// This single geometric solves the coherence equation exactly at every
/// step (k = 1 is the one-step series); its mean coincides with chi_moments.
inline MixingMoments geometric_mixing_moments(std::size_t n_eff, std::size_t k) {
  if (k >= n_eff) throw domain_error("geometric mixing needs k < N_eff");
  const double rho = static_cast<double>(n_eff - k) / static_cast<double>(n_eff);
  return {1.0 / rho, (1.0 - rho) / (rho * rho)};
}

struct LognormalParams {
  double mu;
  double sigma;
};

/// Log-normal xi with E xi = eta - 1 and V xi = nu; chi is approximated by xi + 1.
inline LognormalParams lognormal_surrogate(double eta, double nu) {
  const double shift = eta - 1.0;
  if (!(shift > kEtaFloor))
    throw domain_error("degenerate mixing: eta - 1 <= " + std::to_string(kEtaFloor) +
                       "; increase the padding so more factors remain");
  if (!(nu >= 0.0)) throw domain_error("mixing variance must be non-negative");
  const double s2 = shift * shift;
  return {2.0 * std::log(shift) - 0.5 * std::log(nu + s2), std::sqrt(std::log1p(nu / s2))};
}

struct MixingLaw {
  std::size_t k = 0;
  double eta = 1.0;
  double nu = 0.0;
  double mu_ln = 0.0;
  double sigma_ln = 0.0;
  /// chi is the constant eta (k = 0, or eta - 1 under the floor).
  bool degenerate = true;
};

/// Product-of-geometrics moments with their shifted log-normal surrogate.
inline MixingLaw mixing_law(std::size_t n_eff, std::size_t k) {
  if (k == 0) return {};
  const auto [eta, nu] = chi_moments(n_eff, k);
  MixingLaw law{k, eta, nu, 0.0, 0.0, true};
  if (eta - 1.0 > kEtaFloor && nu > 0.0) {
    const auto [mu, sigma] = lognormal_surrogate(eta, nu);
    law.mu_ln = mu;
    law.sigma_ln = sigma;
    law.degenerate = false;
  }
  return law;
}

// ---------------------------------------------------------------------------
// Discrete scale mixtures: chi takes value `chi` with probability `weight`.
// ---------------------------------------------------------------------------

struct ScaleComponent {
  double chi;
  double weight;
};
using ScaleMixture = std::vector<ScaleComponent>;

inline double mixture_mean(const ScaleMixture& mix) {
  double m = 0.0;
  for (const auto& c : mix) m += c.weight * c.chi;
  return m;
}

/// Fixed-node rule for chi = 1 + exp(mu + sigma Z): Gauss-Legendre over
/// Z in [-span, span] against the normal weight.
inline ScaleMixture lognormal_components(const MixingLaw& law, std::size_t nodes = 64,
                                         double span = 8.0) {
  if (law.degenerate) return {{law.eta, 1.0}};
  const QuadratureRule rule = truncated_normal_rule(nodes, span);
  ScaleMixture mix(nodes);
  for (std::size_t i = 0; i < nodes; ++i)
    mix[i] = {1.0 + std::exp(law.mu_ln + law.sigma_ln * rule.nodes[i]), rule.weights[i]};
  return mix;
}

/// chi ~ Geometric((N_eff - k)/N_eff), truncated once the tail mass drops
/// below tail_tol and renormalized.
inline ScaleMixture geometric_components(std::size_t n_eff, std::size_t k, double tail_tol = 1e-12) {
  if (k == 0) return {{1.0, 1.0}};
  if (k >= n_eff) throw domain_error("geometric mixing needs k < N_eff");
  const double rho = static_cast<double>(n_eff - k) / static_cast<double>(n_eff);
  const double fail = 1.0 - rho;
  ScaleMixture mix;
  double tail = 1.0, total = 0.0;
  for (std::size_t j = 1; tail >= tail_tol; ++j) {
    const double w = rho * std::pow(fail, static_cast<double>(j - 1));
    mix.push_back({static_cast<double>(j), w});
    total += w;
    tail = std::pow(fail, static_cast<double>(j));
  }
  for (auto& c : mix) c.weight /= total;
  return mix;
}

/// Exact law of prod_{h=1..k} Z_h, Z_h ~ Geometric(rho_h), by convolution on
/// the multiplicative lattice {1..cap}. Probability beyond cap is reported
/// in `lost_mass`; components below `min_weight` are dropped.
struct ProductPmf {
  ScaleMixture mixture;
  double lost_mass = 0.0;
};

inline ProductPmf product_components(std::size_t n_eff, std::size_t k, std::size_t cap = 1u << 18,
                                     double min_weight = 1e-16) {
  if (k >= n_eff) throw domain_error("product mixing needs k < N_eff");
  std::vector<double> pmf(cap + 1, 0.0), next(cap + 1, 0.0);
  pmf[1] = 1.0;
  double lost = 0.0;
  for (std::size_t h = 1; h <= k; ++h) {
    const double rho =
        static_cast<double>(n_eff - h) / static_cast<double>(n_eff - h + 1);
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t v = 1; v <= cap; ++v) {
      const double pv = pmf[v];
      if (pv == 0.0) continue;
      double term = rho, placed = 0.0;
      for (std::size_t j = 1; v * j <= cap && pv * term > 1e-300; ++j) {
        next[v * j] += pv * term;
        placed += term;
        term *= 1.0 - rho;
      }
      lost += pv * std::max(0.0, 1.0 - placed);
    }
    pmf.swap(next);
  }
  ProductPmf out;
  out.lost_mass = lost;
  for (std::size_t v = 1; v <= cap; ++v)
    if (pmf[v] > min_weight) out.mixture.push_back({static_cast<double>(v), pmf[v]});
  return out;
}

// ---------------------------------------------------------------------------
// Density evaluation.
// ---------------------------------------------------------------------------

namespace detail {
// Gaussian bumps are negligible (< 1e-18 of the peak) beyond 9.3 sd.
inline constexpr double kKernelReach = 9.3;
}  // namespace detail

/// p(y) = (1/n) sum_i sum_c w_c phi(y | y_i, tau chi_c).
inline DensityGrid kde_mixture_density(std::span<const double> points, double tau,
                                       const ScaleMixture& mix, std::span<const double> grid) {
  validate_grid(grid);
  if (points.empty()) throw config_error("kernel density of an empty point set");
  DensityGrid out{{grid.begin(), grid.end()}, std::vector<double>(grid.size(), 0.0)};
  const double inv_n = 1.0 / static_cast<double>(points.size());
  for (const auto& c : mix) {
    const double var = tau * c.chi;
    const double sd = std::sqrt(var);
    const double scale = c.weight * inv_n / std::sqrt(2.0 * std::numbers::pi * var);
    const double inv2var = 0.5 / var;
    const double reach = detail::kKernelReach * sd;
    for (double p : points) {
      auto it = std::lower_bound(grid.begin(), grid.end(), p - reach);
      for (auto i = static_cast<std::size_t>(it - grid.begin()); i < grid.size(); ++i) {
        const double d = grid[i] - p;
        if (d > reach) break;
        out.density[i] += scale * std::exp(-d * d * inv2var);
      }
    }
  }
  return out;
}

inline double kde_mixture_cdf(std::span<const double> points, double tau, const ScaleMixture& mix,
                              double y) {
  double s = 0.0, total = 0.0;
  for (const auto& c : mix) {
    double inner = 0.0;
    for (double p : points) inner += normal_cdf(y, p, tau * c.chi);
    s += c.weight * inner;
    total += c.weight;
  }
  return s / (total * static_cast<double>(points.size()));
}

/// Truncated series p(y) = sum_{j=1}^J (N-1)/N^j Kbar^{j tau}(y), Kbar the
/// normalized kernel average over `points`; J is the first index with
/// tail mass N^-J < tail_tol. Evaluated term by term without windows.
inline DensityGrid series_density_one_step(std::span<const double> points, double tau,
                                           std::size_t n_eff, std::span<const double> grid,
                                           double tail_tol = 1e-12) {
  if (n_eff < 2) throw domain_error("series density needs N_eff >= 2");
  validate_grid(grid);
  if (points.empty()) throw config_error("kernel density of an empty point set");
  const double n = static_cast<double>(n_eff);
  const auto terms = static_cast<std::size_t>(std::ceil(-std::log(tail_tol) / std::log(n)));
  DensityGrid out{{grid.begin(), grid.end()}, std::vector<double>(grid.size(), 0.0)};
  for (std::size_t j = 1; j <= std::max<std::size_t>(terms, 1); ++j) {
    const double coef = (n - 1.0) / std::pow(n, static_cast<double>(j));
    const double var = static_cast<double>(j) * tau;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double k = 0.0;
      for (double p : points) k += normal_pdf(grid[i], p, var);
      out.density[i] += coef * k / static_cast<double>(points.size());
    }
  }
  return out;
}

/// Rule-of-thumb variance (0.9 min(sd, IQR/1.34) n^-1/5)^2.
inline double silverman_tau(std::span<const double> values) {
  if (values.size() < 2) throw config_error("rule-of-thumb bandwidth needs at least 2 values");
  const auto n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  if (!(spread > 0.0)) throw config_error("rule-of-thumb bandwidth of constant data");
  const double h = 0.9 * spread * std::pow(n, -0.2);
  return h * h;
}

// ---------------------------------------------------------------------------
// Backward-induced kernel density model.
// ---------------------------------------------------------------------------

enum class MixingRule {
  /// chi ~ Geometric((N_eff - k)/N_eff): exactly coherent.
  geometric,
  /// chi ~ 1 + log-normal matched to the product-of-geometrics moments.
  lognormal,
  /// chi = exact product of k independent geometrics.
  product,
};

inline std::string to_string(MixingRule rule) {
  switch (rule) {
    case MixingRule::geometric: return "geometric";
    case MixingRule::lognormal: return "lognormal";
    case MixingRule::product: return "product";
  }
  return "unknown";
}

inline MixingRule parse_mixing_rule(const std::string& name) {
  if (name == "geometric") return MixingRule::geometric;
  if (name == "lognormal") return MixingRule::lognormal;
  if (name == "product") return MixingRule::product;
  throw config_error("unknown mixing rule '" + name + "'");
}

struct KdeOptions {
  MixingRule rule = MixingRule::geometric;
  std::size_t quadrature_nodes = 64;
  double quadrature_span = 8.0;
  double tail_tol = 1e-12;
};

/// Conditioning multiset; observed values sorted, then simulated values in
/// draw order.
struct KdeState {
  std::vector<double> points;

  std::size_t time_index() const noexcept { return points.size(); }
};

class KdeModel {
public:
  using state_type = KdeState;
  static constexpr Support support = Support::continuous;

  KdeModel(const HorizonConfig& config, KdeOptions options = {})
      : tau_(config.tau), horizon_(config.N), padding_(config.padding), options_(options) {
    if (!(tau_ > 0.0)) throw config_error("tau must be positive");
    if (horizon_ < 1) throw config_error("horizon N must be positive");
    const std::size_t n_eff = backward_start();
    // Sampling laws indexed by factor count k = N_eff - |points|.
    laws_.resize(n_eff);
    if (options_.rule == MixingRule::lognormal) {
      double inv_rho = 1.0, log_second = 0.0;
      for (std::size_t k = 1; k < n_eff; ++k) {
        const double rest = static_cast<double>(n_eff - k);
        inv_rho *= (rest + 1.0) / rest;
        log_second += std::log1p(1.0 / (rest + 1.0));
        MixingLaw law{k, inv_rho, inv_rho * inv_rho * std::expm1(log_second), 0.0, 0.0, true};
        if (law.eta - 1.0 > kEtaFloor && law.nu > 0.0) {
          const auto ln = lognormal_surrogate(law.eta, law.nu);
          law.mu_ln = ln.mu;
          law.sigma_ln = ln.sigma;
          law.degenerate = false;
        }
        laws_[k] = law;
      }
    }
  }

  double tau() const noexcept { return tau_; }
  std::size_t horizon() const noexcept { return horizon_; }
  std::size_t padding() const noexcept { return padding_; }
  std::size_t backward_start() const noexcept { return horizon_ + padding_; }
  const KdeOptions& options() const noexcept { return options_; }

  /// Remaining factor count for a history of the given size.
  std::size_t factor_count(std::size_t history) const {
    if (history > backward_start()) throw domain_error("history longer than N + a");
    return backward_start() - history;
  }

  state_type init_state(const ObservedSample& sample, const HorizonConfig& config) const {
    if (config.N != horizon_ || config.padding != padding_ || config.tau != tau_)
      throw config_error("horizon config does not match the kernel model");
    if (sample.empty()) throw config_error("empty sample");
    state_type s{sample.canonical()};
    s.points.reserve(horizon_);
    return s;
  }

  /// The log-normal surrogate law used at factor count k.
  MixingLaw law_at(std::size_t k) const {
    if (k == 0) return {};
    if (options_.rule == MixingRule::lognormal) return laws_.at(k);
    return mixing_law(backward_start(), k);
  }

  /// Scale mixture of the predictive kernel at factor count k.
  ScaleMixture mixture_at(std::size_t k) const {
    switch (options_.rule) {
      case MixingRule::geometric: return geometric_components(backward_start(), k, options_.tail_tol);
      case MixingRule::lognormal:
        return lognormal_components(law_at(k), options_.quadrature_nodes, options_.quadrature_span);
      case MixingRule::product:
        return k == 0 ? ScaleMixture{{1.0, 1.0}} : product_components(backward_start(), k).mixture;
    }
    return {};
  }

  /// Draw chi for a step with k remaining factors under the model's rule.
  double draw_scale(std::size_t k, Rng& rng) const {
    switch (options_.rule) {
      case MixingRule::geometric: return draw_scale_geometric(k, rng);
      case MixingRule::lognormal: return draw_scale_lognormal(k, rng);
      case MixingRule::product: return draw_scale_product(k, rng);
    }
    return 1.0;
  }

  double draw_scale_lognormal(std::size_t k, Rng& rng) const {
    const MixingLaw law = law_at(k);
    if (law.degenerate) return law.eta;
    return 1.0 + std::exp(law.mu_ln + law.sigma_ln * standard_normal(rng));
  }

  double draw_scale_product(std::size_t k, Rng& rng) const {
    const std::size_t n_eff = backward_start();
    double chi = 1.0;
    for (std::size_t h = 1; h <= k; ++h) {
      const double rho = static_cast<double>(n_eff - h) / static_cast<double>(n_eff - h + 1);
      chi *= static_cast<double>(geometric_from_one(rng, rho));
    }
    return chi;
  }

  double draw_scale_geometric(std::size_t k, Rng& rng) const {
    const double rho =
        static_cast<double>(backward_start() - k) / static_cast<double>(backward_start());
    return static_cast<double>(geometric_from_one(rng, rho));
  }

  /// Pick u uniformly among the current points, draw chi with `scale`,
  /// then y ~ N(u, tau chi).
  template <typename ScaleDraw>
  double draw_kernel(const state_type& s, ScaleDraw&& scale, Rng& rng) const {
    if (s.points.empty()) throw config_error("cannot sample from an empty state");
    const std::size_t k = factor_count(s.points.size());
    if (k < 1) throw domain_error("horizon exhausted: no mixing factors remain");
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, s.points.size() - 1)(rng);
    const double chi = scale(k, rng);
    return s.points[i] + std::sqrt(tau_ * chi) * standard_normal(rng);
  }

  double draw(const state_type& s, Rng& rng) const {
    return draw_kernel(s, [this](std::size_t k, Rng& r) { return draw_scale(k, r); }, rng);
  }

  void append(state_type& s, double y) const {
    if (s.points.size() >= backward_start()) throw domain_error("horizon exhausted");
    s.points.push_back(y);
  }

  double mean(const state_type& s) const {
    double m = 0.0;
    for (double p : s.points) m += p;
    return m / static_cast<double>(s.points.size());
  }

  double variance(const state_type& s) const {
    const double m = mean(s);
    double ss = 0.0;
    for (double p : s.points) ss += (p - m) * (p - m);
    return ss / static_cast<double>(s.points.size()) +
           tau_ * mixture_mean(mixture_at(factor_count(s.points.size())));
  }

  double quantile(const state_type& s, double q) const {
    const ScaleMixture mix = mixture_at(factor_count(s.points.size()));
    const auto [lo, hi] = std::minmax_element(s.points.begin(), s.points.end());
    return invert_cdf([&](double y) { return kde_mixture_cdf(s.points, tau_, mix, y); }, q,
                      *lo - 1.0, *hi + 1.0);
  }

  /// Deterministic evaluation of p_t on the grid; k = 0 is the plain KDE.
  DensityGrid density_on_grid(const state_type& s, std::span<const double> grid) const {
    return kde_mixture_density(s.points, tau_, mixture_at(factor_count(s.points.size())), grid);
  }

  /// p_{t+1}(. | x) for every x, sharing the part that does not depend on x.
  auto next_density_given(const state_type& s, std::span<const double> grid) const {
    const std::size_t t = s.points.size();
    const ScaleMixture mix = mixture_at(factor_count(t + 1));
    DensityGrid base = kde_mixture_density(s.points, tau_, mix, grid);
    const double keep = static_cast<double>(t) / static_cast<double>(t + 1);
    for (double& d : base.density) d *= keep;
    return [base = std::move(base), mix, tau = tau_, t](double x) {
      const double single[] = {x};
      DensityGrid out = kde_mixture_density(single, tau, mix, base.grid);
      for (std::size_t i = 0; i < out.density.size(); ++i)
        out.density[i] = base.density[i] + out.density[i] / static_cast<double>(t + 1);
      return out;
    };
  }

  /// Mean kernel variance tau E chi of the predictive after `history` points.
  double effective_tau(std::size_t history) const {
    const std::size_t k = factor_count(history);
    if (k == 0) return tau_;
    return tau_ * static_cast<double>(backward_start()) / static_cast<double>(backward_start() - k);
  }

private:
  double tau_;
  std::size_t horizon_;
  std::size_t padding_;
  KdeOptions options_;
  std::vector<MixingLaw> laws_;
};

/// One forward step with the log-normal surrogate for chi.
inline std::pair<double, KdeState> sample_next(const KdeModel& model, KdeState state, Rng& rng) {
  const double y = model.draw_kernel(
      state, [&](std::size_t k, Rng& r) { return model.draw_scale_lognormal(k, r); }, rng);
  model.append(state, y);
  return {y, std::move(state)};
}

/// One forward step with chi the exact product of geometric factors.
inline std::pair<double, KdeState> sample_next_exact(const KdeModel& model, KdeState state, Rng& rng) {
  const double y = model.draw_kernel(
      state, [&](std::size_t k, Rng& r) { return model.draw_scale_product(k, r); }, rng);
  model.append(state, y);
  return {y, std::move(state)};
}

inline DensityGrid predictive_density(const KdeModel& model, const KdeState& state,
                                      std::span<const double> grid) {
  return model.density_on_grid(state, grid);
}

/// The one-step series p_{N-1} read as a model: the point set stands for
/// N_eff - 1 equally weighted observations, and conditioning on x gives the
/// plain terminal estimate ((N-1)/N) Kbar^tau + (1/N) phi(. | x, tau).
class OneStepSeriesModel {
public:
  struct state_type {
    std::vector<double> points;
  };
  static constexpr Support support = Support::continuous;

  OneStepSeriesModel(double tau, std::size_t n_eff, double tail_tol = 1e-12)
      : tau_(tau), n_eff_(n_eff), tail_tol_(tail_tol) {
    if (!(tau > 0.0)) throw config_error("tau must be positive");
    if (n_eff < 2) throw domain_error("series density needs N_eff >= 2");
  }

  DensityGrid density_on_grid(const state_type& s, std::span<const double> grid) const {
    return series_density_one_step(s.points, tau_, n_eff_, grid, tail_tol_);
  }

  auto next_density_given(const state_type& s, std::span<const double> grid) const {
    const double n = static_cast<double>(n_eff_);
    DensityGrid base = kde_mixture_density(s.points, tau_, {{1.0, 1.0}}, grid);
    for (double& d : base.density) d *= (n - 1.0) / n;
    return [base = std::move(base), tau = tau_, n](double x) {
      DensityGrid out = base;
      for (std::size_t i = 0; i < out.size(); ++i) out.density[i] += normal_pdf(out.grid[i], x, tau) / n;
      return out;
    };
  }

private:
  double tau_;
  std::size_t n_eff_;
  double tail_tol_;
};

/// `points` equally spaced abscissae over [min - 4 sd, max + 4 sd] with
/// sd = sqrt(tau_eff).
inline std::vector<double> default_grid(std::span<const double> values, double tau_eff,
                                        std::size_t points = 512) {
  if (values.empty()) throw config_error("default grid of an empty sample");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double pad = 4.0 * std::sqrt(tau_eff);
  return uniform_grid(*lo - pad, *hi + pad, points);
}

}  // namespace coherent
