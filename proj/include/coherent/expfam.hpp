#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "coherent/errors.hpp"
#include "coherent/grid.hpp"
#include "coherent/model.hpp"

namespace coherent {

// ---------------------------------------------------------------------------
// Bernoulli: prior-integrated (Beta) updates and the backward-induced
// sample-average rule.
// ---------------------------------------------------------------------------

struct BetaBernoulliState {
  double alpha = 1.0;
  double beta = 1.0;
  std::size_t t = 0;

  double probability() const noexcept { return alpha / (alpha + beta); }
};

inline void require_binary(double y) {
  if (y != 0.0 && y != 1.0) throw domain_error("Bernoulli observation must be 0 or 1");
}

inline BetaBernoulliState beta_bernoulli_update(BetaBernoulliState s, double y) {
  require_binary(y);
  s.alpha += y;
  s.beta += 1.0 - y;
  ++s.t;
  return s;
}

/// Running mean of everything conditioned on so far. Sums are kept instead
/// of the mean itself so that binary histories stay exact.
struct BackwardMeanState {
  double sum = 0.0;
  std::size_t t = 0;
  std::size_t N = 0;

  double running_mean() const {
    if (t == 0) throw config_error("improper start: no observations or pseudo-observations");
    return sum / static_cast<double>(t);
  }
};

inline BackwardMeanState backward_mean_update(BackwardMeanState s, double y) {
  s.sum += y;
  ++s.t;
  return s;
}

/// Pr(Y_{t+1} = 1 | y_{1:t}) = ybar_t under the backward-induced rule.
inline double backward_bernoulli_prob(const BackwardMeanState& s) { return s.running_mean(); }

namespace detail {

inline double bernoulli_quantile(double p, double q) { return q <= 1.0 - p ? 0.0 : 1.0; }

inline DensityGrid bernoulli_mass_on_grid(double p, std::span<const double> grid) {
  validate_grid(grid);
  DensityGrid out{{grid.begin(), grid.end()}, std::vector<double>(grid.size(), 0.0)};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] == 0.0) out.density[i] = 1.0 - p;
    if (grid[i] == 1.0) out.density[i] = p;
  }
  return out;
}

inline double draw_bernoulli(double p, Rng& rng) { return uniform01(rng) < p ? 1.0 : 0.0; }

}  // namespace detail

/// Bernoulli(theta) likelihood integrated over a Beta(alpha0, beta0) prior.
class BetaBernoulliModel {
public:
  using state_type = BetaBernoulliState;
  static constexpr Support support = Support::binary;

  explicit BetaBernoulliModel(double alpha0 = 1.0, double beta0 = 1.0) : alpha0_(alpha0), beta0_(beta0) {
    if (!(alpha0 > 0.0 && beta0 > 0.0)) throw config_error("Beta prior parameters must be positive");
  }

  state_type init_state(const ObservedSample& sample, const HorizonConfig&) const {
    state_type s{alpha0_, beta0_, 0};
    for (double y : sample.canonical()) s = beta_bernoulli_update(s, y);
    return s;
  }

  double draw(const state_type& s, Rng& rng) const { return detail::draw_bernoulli(s.probability(), rng); }
  void append(state_type& s, double y) const { s = beta_bernoulli_update(s, y); }

  double mean(const state_type& s) const { return s.probability(); }
  double variance(const state_type& s) const { return s.probability() * (1.0 - s.probability()); }
  double quantile(const state_type& s, double q) const { return detail::bernoulli_quantile(s.probability(), q); }
  DensityGrid density_on_grid(const state_type& s, std::span<const double> grid) const {
    return detail::bernoulli_mass_on_grid(s.probability(), grid);
  }

private:
  double alpha0_, beta0_;
};

/// Backward-induced Bernoulli: the prediction probability is the current
/// sample average. Seed with pseudo-observations {1, 0} to reproduce the
/// uniform-prior Bayes predictive.
class BackwardBernoulliModel {
public:
  using state_type = BackwardMeanState;
  static constexpr Support support = Support::binary;

  state_type init_state(const ObservedSample& sample, const HorizonConfig& config) const {
    state_type s{0.0, 0, config.N};
    for (double y : sample.canonical()) {
      require_binary(y);
      s = backward_mean_update(s, y);
    }
    return s;
  }

  double draw(const state_type& s, Rng& rng) const { return detail::draw_bernoulli(backward_bernoulli_prob(s), rng); }
  void append(state_type& s, double y) const {
    require_binary(y);
    s = backward_mean_update(s, y);
  }

  double mean(const state_type& s) const { return backward_bernoulli_prob(s); }
  double variance(const state_type& s) const {
    const double p = backward_bernoulli_prob(s);
    return p * (1.0 - p);
  }
  double quantile(const state_type& s, double q) const {
    return detail::bernoulli_quantile(backward_bernoulli_prob(s), q);
  }
  DensityGrid density_on_grid(const state_type& s, std::span<const double> grid) const {
    return detail::bernoulli_mass_on_grid(backward_bernoulli_prob(s), grid);
  }
};

// ---------------------------------------------------------------------------
// Gaussian with unit known variance.
// ---------------------------------------------------------------------------

/// Posterior N(mu, 1/phi) for the mean; predictive N(mu, 1 + 1/phi).
struct GaussianKnownVarState {
  double mu = 0.0;
  double phi = 0.0;
  std::size_t t = 0;

  double predictive_variance() const {
    if (!(phi > 0.0)) throw config_error("improper start: Gaussian prior precision is zero and no data seen");
    return 1.0 + 1.0 / phi;
  }
};

inline GaussianKnownVarState gaussian_update(GaussianKnownVarState s, double y) {
  s.mu = (y + s.mu * s.phi) / (1.0 + s.phi);
  s.phi += 1.0;
  ++s.t;
  return s;
}

/// Variance of the backward-induced predictive for Y_{t+1} given y_{1:t}:
/// V_t = prod_{j=t+1}^{N} j^2 / (j^2 - 1), so V_N = 1.
inline double backward_gaussian_variance(std::size_t t, std::size_t N) {
  if (t < 1) throw domain_error("backward Gaussian variance needs t >= 1");
  if (t > N) throw domain_error("backward Gaussian variance needs t <= N");
  double v = 1.0;
  for (std::size_t j = t + 1; j <= N; ++j) {
    const auto jd = static_cast<double>(j);
    v *= jd * jd / ((jd - 1.0) * (jd + 1.0));
  }
  return v;
}

/// Bayes predictive variance (t+1)/t under the flat start phi_0 = 0.
inline double bayes_gaussian_variance(std::size_t t) {
  if (t < 1) throw domain_error("Bayes predictive variance needs t >= 1 when phi_0 = 0");
  return (static_cast<double>(t) + 1.0) / static_cast<double>(t);
}

class GaussianKnownVarModel {
public:
  using state_type = GaussianKnownVarState;
  static constexpr Support support = Support::continuous;

  /// phi0 = 0 is the improper flat start; it needs at least one observation.
  explicit GaussianKnownVarModel(double mu0 = 0.0, double phi0 = 0.0) : mu0_(mu0), phi0_(phi0) {
    if (!(phi0 >= 0.0)) throw config_error("prior precision must be non-negative");
  }

  state_type init_state(const ObservedSample& sample, const HorizonConfig&) const {
    state_type s{mu0_, phi0_, 0};
    for (double y : sample.canonical()) s = gaussian_update(s, y);
    s.predictive_variance();
    return s;
  }

  double draw(const state_type& s, Rng& rng) const {
    return s.mu + std::sqrt(s.predictive_variance()) * standard_normal(rng);
  }
  void append(state_type& s, double y) const { s = gaussian_update(s, y); }

  double mean(const state_type& s) const { return s.mu; }
  double variance(const state_type& s) const { return s.predictive_variance(); }
  double quantile(const state_type& s, double q) const { return normal_quantile(q, s.mu, s.predictive_variance()); }
  DensityGrid density_on_grid(const state_type& s, std::span<const double> grid) const {
    return normal_on_grid(s.mu, s.predictive_variance(), grid);
  }

  static DensityGrid normal_on_grid(double mean, double var, std::span<const double> grid) {
    validate_grid(grid);
    DensityGrid out{{grid.begin(), grid.end()}, std::vector<double>(grid.size())};
    for (std::size_t i = 0; i < grid.size(); ++i) out.density[i] = normal_pdf(grid[i], mean, var);
    return out;
  }

private:
  double mu0_, phi0_;
};

struct BackwardGaussianState {
  BackwardMeanState mean;
  /// V_t for the current t, carried forward by V_{t+1} = V_t (1 - (t+1)^-2).
  double variance = 1.0;
};

/// Backward-induced Gaussian from p_N = N(ybar_N, 1): predictive for
/// Y_{t+1} is N(ybar_t, V_t).
class BackwardGaussianModel {
public:
  using state_type = BackwardGaussianState;
  static constexpr Support support = Support::continuous;

  state_type init_state(const ObservedSample& sample, const HorizonConfig& config) const {
    BackwardMeanState m{0.0, 0, config.N};
    for (double y : sample.canonical()) m = backward_mean_update(m, y);
    return {m, backward_gaussian_variance(m.t, m.N)};
  }

  double draw(const state_type& s, Rng& rng) const {
    return s.mean.running_mean() + std::sqrt(s.variance) * standard_normal(rng);
  }
  void append(state_type& s, double y) const {
    s.mean = backward_mean_update(s.mean, y);
    if (s.mean.t > s.mean.N) throw domain_error("backward Gaussian simulated past its horizon");
    const auto j = static_cast<double>(s.mean.t);
    s.variance *= (j - 1.0) * (j + 1.0) / (j * j);
  }

  double mean(const state_type& s) const { return s.mean.running_mean(); }
  double variance(const state_type& s) const { return s.variance; }
  double quantile(const state_type& s, double q) const {
    return normal_quantile(q, s.mean.running_mean(), s.variance);
  }
  DensityGrid density_on_grid(const state_type& s, std::span<const double> grid) const {
    return GaussianKnownVarModel::normal_on_grid(s.mean.running_mean(), s.variance, grid);
  }
};

}  // namespace coherent
