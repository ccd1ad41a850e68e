#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "coherent/expfam.hpp"
#include "coherent/simulate.hpp"

using namespace coherent;

TEST(BetaBernoulli, UpdateExamples) {
  BetaBernoulliState s{1.0, 1.0, 0};
  s = beta_bernoulli_update(s, 1.0);
  EXPECT_EQ(s.alpha, 2.0);
  EXPECT_EQ(s.beta, 1.0);
  EXPECT_DOUBLE_EQ(s.probability(), 2.0 / 3.0);
  s = beta_bernoulli_update(s, 0.0);
  EXPECT_DOUBLE_EQ(s.probability(), 0.5);
  EXPECT_THROW(beta_bernoulli_update(s, 0.5), domain_error);
}

TEST(BetaBernoulli, PredictiveIsConvexCombination) {
  // (alpha+y)/(alpha+beta+1) = w * alpha/(alpha+beta) + (1-w) y,  w = (alpha+beta)/(alpha+beta+1)
  for (double a : {0.5, 1.0, 3.0, 8.0})
    for (double b : {0.5, 2.0, 4.0})
      for (double y : {0.0, 1.0}) {
        const BetaBernoulliState s{a, b, 0};
        const double w = (a + b) / (a + b + 1.0);
        EXPECT_NEAR(beta_bernoulli_update(s, y).probability(), w * s.probability() + (1.0 - w) * y, 1e-15);
      }
}

TEST(BetaBernoulli, RejectsBadPrior) {
  EXPECT_THROW(BetaBernoulliModel(0.0, 1.0), config_error);
  EXPECT_THROW(BetaBernoulliModel(1.0, -1.0), config_error);
}

TEST(BackwardBernoulli, CoherenceIdentity) {
  // ybar_10 = 0.7: 0.7 * 8/11 + 0.3 * 7/11 = 0.7.
  BackwardMeanState s{7.0, 10, 100};
  const double p = backward_bernoulli_prob(s);
  EXPECT_DOUBLE_EQ(p, 0.7);
  const double after_one = backward_bernoulli_prob(backward_mean_update(s, 1.0));
  const double after_zero = backward_bernoulli_prob(backward_mean_update(s, 0.0));
  EXPECT_DOUBLE_EQ(after_one, 8.0 / 11.0);
  EXPECT_DOUBLE_EQ(after_zero, 7.0 / 11.0);
  EXPECT_NEAR(p * after_one + (1.0 - p) * after_zero, p, 1e-15);
}

TEST(BackwardBernoulli, ImproperStartRejected) {
  const BackwardMeanState s{0.0, 0, 10};
  EXPECT_THROW(s.running_mean(), config_error);
}

TEST(BackwardBernoulli, SeededMatchesUniformPriorBayes) {
  const std::vector<double> data = {1, 0, 0, 1, 1, 1, 0};
  const double pseudo[] = {1.0, 0.0};
  const auto seeded = ObservedSample::with_pseudo(pseudo, data);
  const ObservedSample plain(data);
  const BackwardBernoulliModel backward;
  const BetaBernoulliModel bayes(1.0, 1.0);
  auto b = backward.init_state(seeded, make_horizon(seeded, 40));
  auto a = bayes.init_state(plain, make_horizon(plain, 40));
  EXPECT_DOUBLE_EQ(backward.mean(b), bayes.mean(a));
  for (double y : {1.0, 1.0, 0.0, 1.0, 0.0, 0.0}) {
    backward.append(b, y);
    bayes.append(a, y);
    EXPECT_NEAR(backward.mean(b), bayes.mean(a), 1e-15);
  }
}

TEST(Gaussian, UpdateExamples) {
  GaussianKnownVarState s{0.0, 1.0, 0};
  s = gaussian_update(s, 2.0);
  EXPECT_DOUBLE_EQ(s.mu, 1.0);
  EXPECT_DOUBLE_EQ(s.phi, 2.0);
  EXPECT_DOUBLE_EQ(s.predictive_variance(), 1.5);
  s = gaussian_update(s, 4.0);
  EXPECT_DOUBLE_EQ(s.mu, 2.0);
  EXPECT_DOUBLE_EQ(s.phi, 3.0);
}

TEST(Gaussian, FlatStartNeedsData) {
  const GaussianKnownVarModel model;
  const GaussianKnownVarState empty{};
  EXPECT_THROW(empty.predictive_variance(), config_error);
  EXPECT_THROW(GaussianKnownVarModel(0.0, -1.0), config_error);
  const ObservedSample one({3.0});
  const auto s = model.init_state(one, make_horizon(one, 5));
  EXPECT_DOUBLE_EQ(s.mu, 3.0);
  EXPECT_DOUBLE_EQ(model.variance(s), 2.0);
}

TEST(BackwardGaussian, VarianceClosedForm) {
  for (std::size_t N : {20u, 100u, 1000u})
    for (std::size_t t = 1; t <= N; t += (t < 10 ? 1 : 37)) {
      const double closed = static_cast<double>(N * (t + 1)) / static_cast<double>((N + 1) * t);
      EXPECT_NEAR(backward_gaussian_variance(t, N), closed, 1e-13 * closed) << "t=" << t << " N=" << N;
    }
  EXPECT_EQ(backward_gaussian_variance(7, 7), 1.0);
}

TEST(BackwardGaussian, RatioToBayesIsNOverNPlusOne) {
  for (std::size_t N : {20u, 100u, 1000u}) {
    const double expect = static_cast<double>(N) / static_cast<double>(N + 1);
    for (std::size_t t : {1u, 5u, 19u})
      EXPECT_NEAR(backward_gaussian_variance(t, N) / bayes_gaussian_variance(t), expect, 1e-13);
  }
}

TEST(BackwardGaussian, DomainErrors) {
  EXPECT_THROW(backward_gaussian_variance(0, 10), domain_error);
  EXPECT_THROW(backward_gaussian_variance(11, 10), domain_error);
  EXPECT_THROW(bayes_gaussian_variance(0), domain_error);
}

TEST(BackwardGaussian, RecursiveVarianceMatchesProduct) {
  const ObservedSample sample({0.1, -0.2, 0.4});
  const auto cfg = make_horizon(sample, 50);
  const BackwardGaussianModel model;
  auto s = model.init_state(sample, cfg);
  for (std::size_t t = 3; t < 50; ++t) {
    EXPECT_NEAR(model.variance(s), backward_gaussian_variance(t, 50), 1e-13);
    model.append(s, 0.3);
  }
  EXPECT_NEAR(model.variance(s), 1.0, 1e-13);
  EXPECT_THROW(model.append(s, 0.0), domain_error);
}

TEST(BackwardGaussian, MeanIsRunningAverage) {
  const ObservedSample sample({1.0, 2.0, 6.0});
  const BackwardGaussianModel model;
  auto s = model.init_state(sample, make_horizon(sample, 10));
  EXPECT_DOUBLE_EQ(model.mean(s), 3.0);
  model.append(s, 7.0);
  EXPECT_DOUBLE_EQ(model.mean(s), 4.0);
}
