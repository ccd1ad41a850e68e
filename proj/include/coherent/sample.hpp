#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coherent/errors.hpp"

namespace coherent {

/// Observed data y_{1:n}. The first `pseudo_count` entries are
/// pseudo-observations; every model conditions on them exactly like data.
class ObservedSample {
public:
  ObservedSample() = default;

  explicit ObservedSample(std::vector<double> values, std::size_t pseudo_count = 0)
      : values_(std::move(values)), pseudo_count_(pseudo_count) {
    if (pseudo_count_ > values_.size())
      throw config_error("pseudo_count exceeds sample size");
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!std::isfinite(values_[i]))
        throw config_error("sample value " + std::to_string(i) + " is not finite");
  }

  /// Prepends pseudo-observations to observed data.
  static ObservedSample with_pseudo(std::span<const double> pseudo, std::span<const double> data) {
    std::vector<double> all(pseudo.begin(), pseudo.end());
    all.insert(all.end(), data.begin(), data.end());
    return ObservedSample(std::move(all), pseudo.size());
  }

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::size_t pseudo_count() const noexcept { return pseudo_count_; }

  /// The conditioning multiset in canonical (sorted) order. Models build
  /// their state from this so that results do not depend on input order.
  std::vector<double> canonical() const {
    std::vector<double> v = values_;
    std::sort(v.begin(), v.end());
    return v;
  }

private:
  std::vector<double> values_;
  std::size_t pseudo_count_ = 0;
};

/// Forward-simulation horizon. `n` counts every conditioning value,
/// pseudo-observations included; the simulator draws m = N - n values.
struct HorizonConfig {
  std::size_t n = 0;
  std::size_t N = 0;
  std::size_t padding = 0;
  double tau = 1.0;

  std::size_t steps() const noexcept { return N - n; }
  std::size_t backward_start() const noexcept { return N + padding; }

  /// Checks N >= n >= 1 and tau > 0. m = 0 is accepted as the identity run.
  void validate() const {
    if (n < 1) throw config_error("n must be at least 1");
    if (N < n) throw config_error("N must be at least n");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw config_error("tau must be positive");
  }

  void validate_for(const ObservedSample& sample) const {
    if (sample.empty()) throw config_error("empty sample");
    if (sample.size() != n)
      throw config_error("config n=" + std::to_string(n) + " does not match sample size " +
                         std::to_string(sample.size()));
    validate();
  }
};

inline HorizonConfig make_horizon(const ObservedSample& sample, std::size_t N,
                                  std::size_t padding = 0, double tau = 1.0) {
  HorizonConfig cfg{sample.size(), N, padding, tau};
  cfg.validate_for(sample);
  return cfg;
}

}  // namespace coherent
