#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "psconrl/posterior.hpp"

namespace psconrl {
namespace {

TEST(DirichletPosterior, FreshPriorHasAlphaZeroEverywhere) {
  DirichletPosterior post(2, 2, 0.1);
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a)
      for (int n = 0; n < 2; ++n) EXPECT_DOUBLE_EQ(post.alpha(s, a, n), 0.1);
}

TEST(DirichletPosterior, RejectsNonPositivePrior) {
  EXPECT_THROW(DirichletPosterior(2, 2, 0.0), InputError);
  EXPECT_THROW(DirichletPosterior(2, 2, -1.0), InputError);
}

TEST(DirichletPosterior, ObserveIncrementsOneEntry) {
  DirichletPosterior post(2, 2, 0.1);
  post.observe(0, 1, 1);
  EXPECT_DOUBLE_EQ(post.alpha(0, 1, 1), 1.1);
  EXPECT_DOUBLE_EQ(post.alpha(0, 1, 0), 0.1);
  EXPECT_DOUBLE_EQ(post.alpha(1, 1, 1), 0.1);
  for (int i = 0; i < 9; ++i) post.observe(0, 1, 1);
  EXPECT_DOUBLE_EQ(post.alpha(0, 1, 1), 10.1);
  EXPECT_EQ(post.visits(0, 1), 10);
}

TEST(DirichletPosterior, ObserveRejectsOutOfRange) {
  DirichletPosterior post(2, 2, 0.1);
  EXPECT_THROW(post.observe(2, 0, 0), InputError);
  EXPECT_THROW(post.observe(0, 0, 5), InputError);
}

TEST(DirichletPosterior, FreshMeanIsUniform) {
  DirichletPosterior post(3, 2, 0.1);
  const Transitions m = post.mean();
  for (double x : m.data()) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
}

// Simpson's rule on [0, 1].
double simpson(const std::function<double(double)>& f, int n) {
  const double h = 1.0 / n;
  double acc = f(0.0) + f(1.0);
  for (int i = 1; i < n; ++i) acc += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Integral of theta^power * theta^(a-1) (1-theta)^(b-1) over [0, 1], split at
// 1/2 with theta = w^10 on the left and theta = 1 - v^10 on the right so
// both endpoint singularities become smooth.
double beta_integral(double a, double b, double power) {
  auto f = [&](double theta) {
    return std::pow(theta, power + a - 1.0) * std::pow(1.0 - theta, b - 1.0);
  };
  const double edge = std::pow(0.5, 0.1);
  const double left = simpson(
      [&](double x) {
        const double w = x * edge;
        return w == 0.0 ? 0.0
                        : edge * 10.0 * std::pow(w, 9.0) * f(std::pow(w, 10.0));
      },
      20000);
  const double right = simpson(
      [&](double x) {
        const double v = x * edge;
        // 10 v^9 (v^10)^(b-1) = 10 v^(10b - 1)
        return edge * 10.0 * std::pow(v, 10.0 * b - 1.0) *
               std::pow(1.0 - std::pow(v, 10.0), power + a - 1.0);
      },
      20000);
  return left + right;
}

// With alpha = [0.1, 0.1 + k] the marginal of p(1) is Beta(0.1 + k, 0.1).
TEST(DirichletPosterior, MeanMatchesNumericalIntegration) {
  for (int k = 1; k <= 6; ++k) {
    DirichletPosterior post(2, 1, 0.1);
    for (int i = 0; i < k; ++i) post.observe(0, 0, 1);
    const double a = 0.1 + k;
    const double b = 0.1;
    const double mean = beta_integral(a, b, 1.0) / beta_integral(a, b, 0.0);
    EXPECT_NEAR(post.mean()(0, 0, 1), mean, 1e-8) << "k=" << k;
    EXPECT_NEAR(post.mean()(0, 0, 1), (0.1 + k) / (0.2 + k), 1e-15);
  }
}

TEST(DirichletPosterior, MeanMatchesEmpiricalFrequenciesWhenPriorIsSmall) {
  DirichletPosterior post(2, 1, 1e-9);
  for (int i = 0; i < 9; ++i) post.observe(0, 0, 0);
  post.observe(0, 0, 1);
  EXPECT_NEAR(post.mean()(0, 0, 0), 0.9, 1e-9);
  EXPECT_NEAR(post.mean()(0, 0, 1), 0.1, 1e-9);
}

TEST(DirichletPosterior, SamplerConcentratesOnHugeConcentration) {
  Rng rng(11);
  const double alpha[2] = {1e9, 0.1};
  double out[2];
  for (int i = 0; i < 100; ++i) {
    rng.dirichlet(alpha, out);
    EXPECT_NEAR(out[0], 1.0, 1e-3);
  }
}

TEST(DirichletPosterior, SampleMeanMatchesDirichletMean) {
  DirichletPosterior post(2, 1, 1.0);
  for (int i = 0; i < 2; ++i) post.observe(0, 0, 1);  // alpha = [1, 3]
  Rng rng(12);
  double acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += post.sample(rng)(0, 0, 0);
  EXPECT_NEAR(acc / n, 0.25, 0.01);
}

TEST(DirichletPosterior, SamplesAreDeterministicGivenTheGenerator) {
  DirichletPosterior post(4, 3, 0.1);
  post.observe(1, 2, 3);
  Rng a(99), b(99);
  EXPECT_EQ(post.sample(a), post.sample(b));
}

TEST(DirichletPosterior, MeanConvergesToTheSamplingRow) {
  const std::vector<double> truth = {0.5, 0.3, 0.2, 0.0};
  DirichletPosterior post(4, 1, 0.1);
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) post.observe(0, 0, rng.categorical(truth));
  double l1 = 0.0;
  for (int n = 0; n < 4; ++n) l1 += std::abs(post.mean()(0, 0, n) - truth[n]);
  EXPECT_LT(l1, 0.05);
}

TEST(DirichletPosterior, VisitCountsAreRecoveredExactly) {
  DirichletPosterior post(3, 2, 0.1);
  Rng rng(18);
  std::int64_t expected[3][2] = {};
  for (int i = 0; i < 5000; ++i) {
    const int s = rng.uniform_int(3);
    const int a = rng.uniform_int(2);
    post.observe(s, a, rng.uniform_int(3));
    ++expected[s][a];
  }
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) EXPECT_EQ(post.visits(s, a), expected[s][a]);
  }
}

TEST(DirichletPosterior, SparseSamplesAreProbabilityVectors) {
  DirichletPosterior post(8, 2, 0.1);
  Rng rng(19);
  for (int k = 0; k < 200; ++k) {
    const Transitions p = post.sample(rng);
    for (int s = 0; s < 8; ++s) {
      for (int a = 0; a < 2; ++a) {
        double total = 0.0;
        for (double x : p.row(s, a)) {
          EXPECT_GE(x, 0.0);
          total += x;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
    }
  }
}

}  // namespace
}  // namespace psconrl
