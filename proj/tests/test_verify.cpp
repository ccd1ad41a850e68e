#include <gtest/gtest.h>

#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "coherent/expfam.hpp"
#include "coherent/io.hpp"
#include "coherent/kde.hpp"
#include "coherent/verify.hpp"

using namespace coherent;

TEST(CheckCoherence, BackwardBernoulliExact) {
  const auto grid = std::vector<double>{0.0, 1.0};
  const BackwardBernoulliModel model;
  for (double sum : {0.0, 1.0, 3.0, 7.0, 10.0}) {
    const BackwardMeanState s{sum, 10, 100};
    const auto r = check_coherence(model, s, grid, IntegrationSpec::binary());
    EXPECT_LT(r.sup_residual, 1e-14);
    EXPECT_EQ(r.quadrature_nodes, 2u);
  }
}

TEST(CheckCoherence, BetaBernoulliExact) {
  const auto grid = std::vector<double>{0.0, 1.0};
  const BetaBernoulliModel model;
  for (double a : {0.3, 1.0, 8.0})
    for (double b : {0.7, 4.0}) {
      const auto r = check_coherence(model, BetaBernoulliState{a, b, 3}, grid, IntegrationSpec::binary());
      EXPECT_LT(r.sup_residual, 1e-14);
    }
}

TEST(CheckCoherence, Gaussians) {
  const auto grid = uniform_grid(-4.0, 4.0, 41);
  const auto spec = IntegrationSpec::trapezoid_on(-20.0, 20.0, 4001);
  {
    const BackwardGaussianModel model;
    const BackwardGaussianState s{{1.5, 5, 40}, backward_gaussian_variance(5, 40)};
    const auto r = check_coherence(model, s, grid, spec);
    EXPECT_LT(r.sup_residual, 1e-9);
    EXPECT_LT(r.quadrature_error, 1e-9);
  }
  {
    const GaussianKnownVarModel model;
    const auto r = check_coherence(model, GaussianKnownVarState{0.2, 3.0, 3}, grid, spec);
    EXPECT_LT(r.sup_residual, 1e-9);
  }
}

TEST(CheckCoherence, FixedVarianceBreaksRunningMean) {
  // Running-mean predictive with variance held at 1 is not coherent:
  // mixing over x inflates the variance to 1 + (t+1)^-2.
  struct Fixed : BackwardGaussianModel {
    void append(state_type& s, double y) const { s.mean = backward_mean_update(s.mean, y); }
    auto next_density_given(const state_type& s, std::span<const double> grid) const {
      return [this, s, g = std::vector<double>(grid.begin(), grid.end())](double x) {
        auto n = s;
        append(n, x);
        return density_on_grid(n, g);
      };
    }
  };
  const Fixed model;
  const BackwardGaussianState s{{0.0, 2, 10}, 1.0};
  const auto r = check_coherence(model, s, uniform_grid(-3.0, 3.0, 31), IntegrationSpec::trapezoid_on(-20, 20, 2001));
  EXPECT_GT(r.sup_residual, 1e-3);
  EXPECT_LT(r.quadrature_error, 1e-9);
}

TEST(CheckCoherence, CapabilityMismatch) {
  const auto grid = std::vector<double>{0.0, 1.0};
  EXPECT_THROW(check_coherence(BetaBernoulliModel{}, BetaBernoulliState{}, grid,
                               IntegrationSpec::trapezoid_on(0.0, 1.0, 5)),
               capability_error);
  EXPECT_THROW(check_coherence(GaussianKnownVarModel{}, GaussianKnownVarState{0.0, 1.0, 1}, grid,
                               IntegrationSpec::binary()),
               capability_error);
}

TEST(CheckCoherence, ReportInvariants) {
  const OneStepSeriesModel model(0.25, 20, 1e-10);
  const OneStepSeriesModel::state_type s{{-1.0, 0.0, 2.0}};
  const auto r = check_coherence(model, s, uniform_grid(-3.0, 4.0, 29), IntegrationSpec::trapezoid_on(-10, 12, 500));
  EXPECT_EQ(r.residual.size(), 29u);
  EXPECT_EQ(r.sup_residual, *std::max_element(r.residual.begin(), r.residual.end()));
  for (double v : r.residual) EXPECT_GE(v, 0.0);
  EXPECT_EQ(r.quadrature_rule, "composite trapezoid");
  EXPECT_FALSE(r.mc_paths.has_value());
}

TEST(Trigamma, Examples) {
  EXPECT_NEAR(trigamma(1.0), std::numbers::pi * std::numbers::pi / 6.0, 1e-14);
  EXPECT_NEAR(trigamma(1.0), 1.6449340668482266, 1e-14);
  EXPECT_NEAR(trigamma(2.0), 0.6449340668482266, 1e-14);
  EXPECT_NEAR(trigamma(1e4), 1.0000500016666666e-4, 1e-17);
  EXPECT_THROW(trigamma(0.0), domain_error);
  EXPECT_THROW(trigamma(-1.0), domain_error);
}

TEST(Trigamma, AgainstBoost) {
  for (double x = 1.0; x <= 1e6; x *= 1.37)
    EXPECT_NEAR(trigamma(x), boost::math::trigamma(x), 1e-12) << "x=" << x;
  for (double x : {0.01, 0.5, 3.25, 9.999, 10.0, 10.001})
    EXPECT_NEAR(trigamma(x), boost::math::trigamma(x), 1e-12 * boost::math::trigamma(x));
}

TEST(Trigamma, DifferenceEqualsDirectSum) {
  for (std::size_t n : {1u, 9u, 50u, 777u, 10000u})
    for (std::size_t m : {1u, 2u, 13u, 950u, 10000u}) {
      const double direct = increment_sum_direct(n, m);
      EXPECT_NEAR(increment_sum(n, m), direct, 1e-10 * direct) << n << ' ' << m;
    }
  EXPECT_EQ(increment_sum(5, 0), 0.0);
  EXPECT_NEAR(increment_sum(50, 950), 0.01841836355053131, 1e-14);
}

TEST(StepBound, Examples) {
  EXPECT_NEAR(step_bound(0, 1.0 / (2.0 * std::numbers::pi)), 1.0, 1e-15);
  EXPECT_NEAR(step_bound(0, 0.04), 1.9947114020071632, 1e-14);
  EXPECT_NEAR(step_bound(9, 0.3), 0.5 * step_bound(4, 0.3), 1e-16);
  EXPECT_THROW(step_bound(3, 0.0), domain_error);
}

TEST(Concentration, Examples) {
  EXPECT_EQ(concentration_bound({50, 0, 0.04, 0.5}), 1.0);
  const ConcentrationQuery q{50, 950, 0.04, 0.5};
  EXPECT_NEAR(q.c() * q.c(), 3.9788735772973833, 1e-13);
  EXPECT_NEAR(concentration_bound(q), 0.3632958274185709, 1e-12);
  EXPECT_NEAR(concentration_bound(q), concentration_bound_direct(q), 1e-10 * concentration_bound(q));
  EXPECT_THROW(concentration_bound({0, 10, 0.04, 0.5}), config_error);
  EXPECT_THROW(concentration_bound({5, 10, 0.04, 0.0}), domain_error);
  EXPECT_THROW(concentration_bound({5, 10, -1.0, 0.5}), domain_error);
}

TEST(Concentration, MonotoneInN) {
  // The bound itself underflows to 0 near n = 10^4 here; its log does not.
  double prev = 2.0, prev_log = 1.0;
  for (std::size_t n : {10u, 100u, 1000u, 10000u, 100000u}) {
    const ConcentrationQuery q{n, 950, 0.04, 0.5};
    const double b = concentration_bound(q), lb = log_concentration_bound(q);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 1.0);
    EXPECT_LE(b, prev);
    EXPECT_LT(lb, prev_log) << "n=" << n;
    EXPECT_NEAR(std::exp(lb), b, 1e-15);
    prev = b;
    prev_log = lb;
  }
  EXPECT_LT(prev, 0.01);
  // Strictly inside (0, 1] where representable.
  const double mid = concentration_bound({200, 950, 0.04, 0.5});
  EXPECT_GT(mid, 0.0);
  EXPECT_LT(mid, 1.0);
}

TEST(Concentration, HalfWidthInvertsBound) {
  for (std::size_t n : {20u, 200u, 2000u}) {
    const double eps = concentration_half_width(n, 500, 0.04, 0.05);
    EXPECT_NEAR(concentration_bound({n, 500, 0.04, eps}), 0.05, 1e-12);
  }
  const std::size_t ns[] = {10, 100, 1000};
  const auto cone = uncertainty_cone(ns, 900, 0.04, 0.5);
  ASSERT_EQ(cone.size(), 3u);
  EXPECT_GT(cone[0].half_width, cone[1].half_width);
  EXPECT_GT(cone[1].half_width, cone[2].half_width);
}

TEST(StepBound, EmpiricalEnvelopeOnSimulatedSteps) {
  // 10^4 one-step increments across many short horizons.
  const auto full = io::builtin_sample("two-gaussians");
  const ObservedSample base(std::vector<double>(full.values().begin(), full.values().begin() + 10));
  const double tau = 0.25;
  const auto cfg = make_horizon(base, 40, 10, tau);
  const KdeModel model(cfg, {MixingRule::geometric, 64, 8.0, 1e-7});
  const auto grid = default_grid(base.values(), 4.0 * tau, 64);
  std::size_t steps = 0, violations = 0;
  double worst_ratio = 0.0;
  for (std::uint64_t run = 0; steps < 10'000; ++run) {
    auto state = model.init_state(base, cfg);
    Rng rng = path_stream(run, 0);
    auto before = model.density_on_grid(state, grid);
    for (std::size_t t = base.size(); t < cfg.N && steps < 10'000; ++t, ++steps) {
      model.append(state, model.draw(state, rng));
      const auto after = model.density_on_grid(state, grid);
      double gap = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i)
        gap = std::max(gap, std::abs(after.density[i] - before.density[i]));
      const double bound = step_bound(t, tau);
      worst_ratio = std::max(worst_ratio, gap / bound);
      if (gap > bound) ++violations;
      before = after;
    }
  }
  EXPECT_EQ(violations, 0u) << "worst gap/bound = " << worst_ratio;
  RecordProperty("worst_ratio", std::to_string(worst_ratio));
}
