#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "coherent/band.hpp"
#include "coherent/expfam.hpp"
#include "coherent/io.hpp"
#include "coherent/kde.hpp"
#include "coherent/simulate.hpp"

using namespace coherent;

namespace {

ObservedSample seven_of_ten() {
  return ObservedSample({1, 1, 0, 1, 1, 0, 1, 1, 0, 1});
}

// Draws NaN on its third step.
struct BrokenModel {
  using state_type = std::size_t;
  static constexpr Support support = Support::continuous;
  state_type init_state(const ObservedSample& s, const HorizonConfig&) const { return s.size(); }
  double draw(const state_type& s, Rng&) const {
    return s >= 3 + 1 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  }
  void append(state_type& s, double) const { ++s; }
  double mean(const state_type&) const { return 0.0; }
  double variance(const state_type&) const { return 1.0; }
  double quantile(const state_type&, double) const { return 0.0; }
  DensityGrid density_on_grid(const state_type&, std::span<const double> g) const {
    return {{g.begin(), g.end()}, std::vector<double>(g.size(), 0.0)};
  }
};

double sample_variance(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST(SimulatePath, ZeroStepsIsIdentity) {
  const auto sample = seven_of_ten();
  const BetaBernoulliModel model;
  Rng rng = path_stream(1, 0);
  const auto path = simulate_path(model, sample, make_horizon(sample, 10), rng);
  EXPECT_TRUE(path.simulated.empty());
  EXPECT_EQ(path.terminal_state.alpha, 8.0);
  EXPECT_EQ(path.terminal_state.beta, 4.0);
}

TEST(SimulatePath, AllOnesIsAbsorbing) {
  const ObservedSample sample(std::vector<double>(6, 1.0));
  const BackwardBernoulliModel model;
  Rng rng = path_stream(3, 0);
  const auto path = simulate_path(model, sample, make_horizon(sample, 206), rng);
  ASSERT_EQ(path.simulated.size(), 200u);
  for (double y : path.simulated) EXPECT_EQ(y, 1.0);
  EXPECT_EQ(model.mean(path.terminal_state), 1.0);
}

TEST(SimulatePath, LengthAndTerminalCount) {
  const auto sample = seven_of_ten();
  const BetaBernoulliModel model;
  Rng rng = path_stream(9, 2);
  const auto path = simulate_path(model, sample, make_horizon(sample, 60), rng, 9, 2);
  EXPECT_EQ(path.simulated.size(), 50u);
  EXPECT_EQ(path.terminal_state.t, 60u);
  EXPECT_DOUBLE_EQ(path.terminal_state.alpha + path.terminal_state.beta, 62.0);
  EXPECT_EQ(path.path_index, 2u);
}

TEST(SimulatePath, NonFiniteDrawIsNumericError) {
  const ObservedSample sample({0.0});
  const BrokenModel model;
  try {
    run_ensemble(model, sample, make_horizon(sample, 10), 3, 1, functional::Mean{}, {1, 0});
    FAIL() << "expected numeric_error";
  } catch (const numeric_error& e) {
    EXPECT_EQ(e.path_index(), 0u);
  }
}

TEST(SimulatePath, ModelErrorsCarryPathIndex) {
  // Non-binary pseudo-data is rejected while initialising every path.
  const ObservedSample sample({0.5});
  const BetaBernoulliModel model;
  EXPECT_THROW(run_ensemble(model, sample, make_horizon(sample, 4), 2, 1, functional::Mean{}), path_error);
}

TEST(RunEnsemble, RejectsZeroPaths) {
  const auto sample = seven_of_ten();
  EXPECT_THROW(run_ensemble(BetaBernoulliModel{}, sample, make_horizon(sample, 20), 0, 1, functional::Mean{}),
               config_error);
}

TEST(RunEnsemble, SingletonMatchesDirectPath) {
  const auto sample = seven_of_ten();
  const BetaBernoulliModel model;
  const auto cfg = make_horizon(sample, 110);
  const auto ens = run_ensemble(model, sample, cfg, 1, 42, functional::Mean{});
  Rng rng = path_stream(42, 0);
  const auto path = simulate_path(model, sample, cfg, rng);
  EXPECT_EQ(ens.scalars().at(0), std::get<double>(extract_functional(model, path.terminal_state, functional::Mean{})));
}

TEST(RunEnsemble, ScheduleIndependent) {
  const auto sample = io::builtin_sample("two-gaussians");
  HorizonConfig cfg = make_horizon(sample, 120, 10, 0.25);
  const KdeModel model(cfg);
  const auto grid = uniform_grid(-5.0, 15.0, 64);
  const auto one = run_ensemble(model, sample, cfg, 24, 7, functional::Density{grid}, {1, 3});
  const auto four = run_ensemble(model, sample, cfg, 24, 7, functional::Density{grid}, {4, 3});
  const auto d1 = one.densities(), d4 = four.densities();
  for (std::size_t j = 0; j < d1.size(); ++j) EXPECT_EQ(d1[j].density, d4[j].density);
  EXPECT_EQ(one.kept_paths, four.kept_paths);
  EXPECT_EQ(one.kept_paths.size(), 3u);
  EXPECT_EQ(one.kept_paths[0].size(), 70u);
}

TEST(RunEnsemble, BetaBernoulliRecoversBetaPosterior) {
  const auto sample = seven_of_ten();
  const BetaBernoulliModel model(1.0, 1.0);
  const auto ens = run_ensemble(model, sample, make_horizon(sample, 1010), 5000, 2024, functional::Mean{});
  const auto theta = ens.scalars();
  const double mean = std::accumulate(theta.begin(), theta.end(), 0.0) / 5000.0;
  const double var = sample_variance(theta);
  // Beta(8, 4): mean 2/3, variance 8*4/(12^2*13).
  const double beta_var = 32.0 / (144.0 * 13.0);
  EXPECT_NEAR(mean, 2.0 / 3.0, 3.0 * std::sqrt(beta_var / 5000.0));
  // Standard error of a sample variance, from the fourth central moment.
  double m4 = 0.0;
  for (double x : theta) m4 += std::pow(x - mean, 4);
  m4 /= 5000.0;
  const double se_var = std::sqrt((m4 - var * var) / 5000.0);
  EXPECT_NEAR(var, beta_var, 4.0 * se_var);
  EXPECT_NEAR(var, 0.01709, 0.0015);
}

TEST(ExtractFunctional, GaussianSymmetry) {
  const ObservedSample sample({-1.5, 1.5, -0.5, 0.5});
  const BackwardGaussianModel model;
  const auto state = model.init_state(sample, make_horizon(sample, 10));
  EXPECT_NEAR(std::get<double>(extract_functional(model, state, functional::Mean{})), 0.0, 1e-15);
  EXPECT_NEAR(std::get<double>(extract_functional(model, state, functional::Quantile{0.5})), 0.0, 1e-12);
  EXPECT_THROW(extract_functional(model, state, functional::Quantile{1.0}), domain_error);
  EXPECT_THROW(extract_functional(model, state, functional::Quantile{0.0}), domain_error);
}

TEST(ExtractFunctional, KdeMedianOfSymmetricPoints) {
  const ObservedSample sample({2.0, 3.0, 4.0});
  const auto cfg = make_horizon(sample, 20, 5, 0.3);
  for (auto rule : {MixingRule::geometric, MixingRule::lognormal}) {
    const KdeModel model(cfg, {rule});
    const auto state = model.init_state(sample, cfg);
    EXPECT_NEAR(std::get<double>(extract_functional(model, state, functional::Quantile{0.5})), 3.0, 1e-9);
    EXPECT_NEAR(std::get<double>(extract_functional(model, state, functional::Mean{})), 3.0, 1e-15);
  }
}

TEST(ExtractFunctional, KdeGalaxyTerminalDensityIntegrates) {
  const auto sample = io::builtin_sample("galaxy");
  const auto cfg = make_horizon(sample, 1000, 30, 0.04);
  const KdeModel model(cfg);
  Rng rng = path_stream(1, 0);
  const auto path = simulate_path(model, sample, cfg, rng);
  const auto grid = default_grid(sample.values(), model.effective_tau(sample.size()));
  const auto d = std::get<DensityGrid>(extract_functional(model, path.terminal_state, functional::Density{grid}));
  EXPECT_NEAR(d.integral(), 1.0, 1e-3);
  EXPECT_TRUE(d.is_valid());
}

TEST(Invariants, LearningSymmetryBitIdentical) {
  auto sample = io::builtin_sample("two-gaussians");
  std::vector<double> shuffled(sample.values().begin(), sample.values().end());
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(11));
  const ObservedSample permuted(shuffled);
  const auto cfg = make_horizon(sample, 90, 10, 0.2);
  const auto grid = uniform_grid(-4.0, 14.0, 50);

  const KdeModel kde(cfg);
  const auto a = run_ensemble(kde, sample, cfg, 10, 5, functional::Density{grid}).densities();
  const auto b = run_ensemble(kde, permuted, cfg, 10, 5, functional::Density{grid}).densities();
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a[j].density, b[j].density);

  const BackwardGaussianModel gauss;
  EXPECT_EQ(run_ensemble(gauss, sample, cfg, 10, 5, functional::Mean{}).scalars(),
            run_ensemble(gauss, permuted, cfg, 10, 5, functional::Mean{}).scalars());
}

TEST(Invariants, MartingaleConsistencyBackwardGaussian) {
  const ObservedSample sample({-0.4, 0.3, 1.2, 0.8, -1.1});
  const auto cfg = make_horizon(sample, 60);
  const BackwardGaussianModel model;
  const auto grid = uniform_grid(-5.0, 5.0, 41);
  const auto ens = run_ensemble(model, sample, cfg, 2000, 99, functional::Density{grid});
  const auto band = credible_band(ens.densities(), 0.9);
  const auto p_n = model.density_on_grid(model.init_state(sample, cfg), grid);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    worst = std::max(worst, std::abs(band.mean[i] - p_n.density[i]) / band.mean_se[i]);
  EXPECT_LT(worst, 3.0);
}
