#pragma once

#include <concepts>
#include <span>

#include "coherent/grid.hpp"
#include "coherent/rng.hpp"
#include "coherent/sample.hpp"

namespace coherent {

enum class Support { binary, continuous };

/// A sequence of predictive distributions p_t, indexed by its conditioning
/// state. `draw` samples y_{t+1} ~ p_t and must depend only on (state, rng);
/// `append` conditions the state on one more value.
template <typename M>
concept PredictiveModel = requires(const M& model, typename M::state_type& state,
                                   const typename M::state_type& cstate, const ObservedSample& sample,
                                   const HorizonConfig& config, Rng& rng, double y,
                                   std::span<const double> grid) {
  typename M::state_type;
  { M::support } -> std::convertible_to<Support>;
  { model.init_state(sample, config) } -> std::same_as<typename M::state_type>;
  { model.draw(cstate, rng) } -> std::convertible_to<double>;
  { model.append(state, y) };
  { model.mean(cstate) } -> std::convertible_to<double>;
  { model.variance(cstate) } -> std::convertible_to<double>;
  { model.quantile(cstate, y) } -> std::convertible_to<double>;
  { model.density_on_grid(cstate, grid) } -> std::same_as<DensityGrid>;
};

}  // namespace coherent
