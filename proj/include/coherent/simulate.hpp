#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "coherent/errors.hpp"
#include "coherent/model.hpp"

namespace coherent {

namespace functional {
struct Mean {};
struct Variance {};
struct Quantile {
  double q;
};
struct Density {
  std::vector<double> grid;
};
}  // namespace functional

using FunctionalSpec =
    std::variant<functional::Mean, functional::Variance, functional::Quantile, functional::Density>;
using FunctionalValue = std::variant<double, DensityGrid>;

template <PredictiveModel Model>
struct SimulationPath {
  std::uint64_t master_seed = 0;
  std::size_t path_index = 0;
  std::vector<double> simulated;
  typename Model::state_type terminal_state;
};

/// Draws y*_{n+1..N} one at a time, conditioning on each draw before the next.
template <PredictiveModel Model>
SimulationPath<Model> simulate_path(const Model& model, const ObservedSample& sample,
                                    const HorizonConfig& config, Rng& rng,
                                    std::uint64_t master_seed = 0, std::size_t path_index = 0) {
  config.validate_for(sample);
  SimulationPath<Model> path{master_seed, path_index, {}, model.init_state(sample, config)};
  const std::size_t m = config.steps();
  path.simulated.reserve(m);
  for (std::size_t step = 0; step < m; ++step) {
    const double y = model.draw(path.terminal_state, rng);
    if (!std::isfinite(y))
      throw numeric_error("non-finite draw at step " + std::to_string(step), path_index);
    model.append(path.terminal_state, y);
    path.simulated.push_back(y);
  }
  return path;
}

template <PredictiveModel Model>
FunctionalValue extract_functional(const Model& model, const typename Model::state_type& state,
                                   const FunctionalSpec& spec) {
  return std::visit(
      [&](const auto& f) -> FunctionalValue {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, functional::Mean>) {
          return model.mean(state);
        } else if constexpr (std::is_same_v<F, functional::Variance>) {
          return model.variance(state);
        } else if constexpr (std::is_same_v<F, functional::Quantile>) {
          if (!(f.q > 0.0 && f.q < 1.0)) throw domain_error("quantile level must lie in (0,1)");
          return model.quantile(state, f.q);
        } else {
          return model.density_on_grid(state, f.grid);
        }
      },
      spec);
}

struct EnsembleOptions {
  /// 0 picks std::thread::hardware_concurrency().
  unsigned workers = 0;
  /// Number of leading paths whose simulated values are kept.
  std::size_t keep_paths = 0;
};

struct Ensemble {
  std::uint64_t master_seed = 0;
  std::vector<FunctionalValue> values;
  std::vector<std::vector<double>> kept_paths;

  std::size_t size() const noexcept { return values.size(); }

  std::vector<double> scalars() const {
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& v : values) {
      if (!std::holds_alternative<double>(v)) throw shape_error("ensemble holds densities");
      out.push_back(std::get<double>(v));
    }
    return out;
  }

  std::vector<DensityGrid> densities() const {
    std::vector<DensityGrid> out;
    out.reserve(values.size());
    for (const auto& v : values) {
      if (!std::holds_alternative<DensityGrid>(v)) throw shape_error("ensemble holds scalars");
      out.push_back(std::get<DensityGrid>(v));
    }
    return out;
  }
};

/// Runs M independent paths, path j driven by path_stream(master_seed, j),
/// and hands each finished path to `visit(path)` on the worker that ran it.
/// `visit` must only touch per-index storage. The lowest failing index is
/// rethrown after all workers join.
template <PredictiveModel Model, typename Visit>
void for_each_path(const Model& model, const ObservedSample& sample, const HorizonConfig& config,
                   std::size_t paths, std::uint64_t master_seed, unsigned workers, Visit&& visit) {
  if (paths == 0) throw config_error("ensemble needs at least one path");
  config.validate_for(sample);
  std::vector<std::exception_ptr> errors(paths);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t j = next++; j < paths; j = next++) {
      try {
        Rng rng = path_stream(master_seed, j);
        visit(simulate_path(model, sample, config, rng, master_seed, j));
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };

  if (!workers) workers = std::thread::hardware_concurrency();
  workers = static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, paths));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  for (std::size_t j = 0; j < paths; ++j) {
    if (!errors[j]) continue;
    try {
      std::rethrow_exception(errors[j]);
    } catch (const numeric_error&) {
      throw;
    } catch (const std::exception& e) {
      std::throw_with_nested(path_error(e.what(), j));
    }
  }
}

/// Terminal functional of every path. Output is identical for any number
/// of workers.
template <PredictiveModel Model>
Ensemble run_ensemble(const Model& model, const ObservedSample& sample, const HorizonConfig& config,
                      std::size_t paths, std::uint64_t master_seed, const FunctionalSpec& spec,
                      EnsembleOptions options = {}) {
  Ensemble ensemble;
  ensemble.master_seed = master_seed;
  ensemble.values.resize(paths);
  ensemble.kept_paths.resize(std::min(options.keep_paths, paths));
  for_each_path(model, sample, config, paths, master_seed, options.workers, [&](SimulationPath<Model>&& path) {
    const std::size_t j = path.path_index;
    ensemble.values[j] = extract_functional(model, path.terminal_state, spec);
    if (j < ensemble.kept_paths.size()) ensemble.kept_paths[j] = std::move(path.simulated);
  });
  return ensemble;
}

}  // namespace coherent
