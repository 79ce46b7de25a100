#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "htbandit/environment.hpp"
#include "htbandit/rng.hpp"

using namespace htbandit;
using htbandit::testing::Gen;
using htbandit::testing::stochastic;

TEST(ThreePointArm, AlphaMomentOracles) {
  EXPECT_NEAR(alpha_moment(ThreePointArm{0.0, 10.0, 0.01}, 1.5), 0.31622776601683794, 1e-15);
  EXPECT_NEAR(alpha_moment(ThreePointArm{0.5, 2.0, 0.1}, 2.0), 0.65, 1e-15);
  EXPECT_NEAR(alpha_moment(ThreePointArm{-0.3, 1.0, 0.5}, 1.2), 0.6233607324011696, 1e-15);
  EXPECT_THROW(alpha_moment(ThreePointArm{}, 1.0), DomainError);
  EXPECT_THROW(alpha_moment(ThreePointArm{}, 2.1), DomainError);
}

TEST(ThreePointArm, MaxTailProbSaturatesMomentBound) {
  const double p = max_tail_prob(0.5, 10.0, 1.5, 1.0);
  ASSERT_GT(p, 0.0);
  ASSERT_LT(p, 1.0);
  EXPECT_NEAR(alpha_moment(ThreePointArm{0.5, 10.0, p}, 1.5), 1.0, 1e-12);
  EXPECT_LT(max_tail_prob(2.0, 1.0, 1.5, 1.0), 0.0);
  EXPECT_EQ(max_tail_prob(0.0, 0.5, 2.0, 1.0), 1.0);
}

TEST(ThreePointArm, InverseCdf) {
  const ThreePointArm a{0.5, 10.0, 0.02};
  EXPECT_EQ(a.sample(0.0), -9.5);
  EXPECT_EQ(a.sample(0.0099), -9.5);
  EXPECT_EQ(a.sample(0.01), 0.5);
  EXPECT_EQ(a.sample(0.9899), 0.5);
  EXPECT_EQ(a.sample(0.99), 10.5);
}

TEST(ThreePointArm, Validation) {
  EXPECT_THROW((ThreePointArm{0.0, 0.0, 0.1}.validate()), DomainError);
  EXPECT_THROW((ThreePointArm{0.0, 1.0, 1.5}.validate()), DomainError);
  EXPECT_THROW((ThreePointArm{NAN, 1.0, 0.5}.validate()), NonFiniteInput);
}

TEST(TruncatedNonNegativity, Examples) {
  EXPECT_TRUE(check_truncated_nonneg(ThreePointArm{0.0, 10.0, 0.01}).non_negative);
  EXPECT_TRUE(check_truncated_nonneg(ThreePointArm{0.2, 10.0, 0.01}).non_negative);
  const auto bad = check_truncated_nonneg(ThreePointArm{-0.1, 1.0, 0.5});
  EXPECT_FALSE(bad.non_negative);
  ASSERT_TRUE(bad.witness.has_value());
  EXPECT_EQ(*bad.witness, 0.0);
  EXPECT_NEAR(bad.value_at_witness, -0.1, 1e-15);
  EXPECT_LT(truncated_expectation(ThreePointArm{-0.1, 1.0, 0.5}, 0.2), 0.0);
}

TEST(TruncatedNonNegativityProperty, AgreesWithDenseGrid) {
  Gen g(21);
  for (int i = 0; i < 300; ++i) {
    // Lattice parameters so breakpoints land on the grid.
    const ThreePointArm a{0.05 * static_cast<double>(g.index(0, 40)) - 1.0, 0.05 * static_cast<double>(g.index(1, 60)),
                          0.1 * static_cast<double>(g.index(0, 10))};
    bool grid_ok = true;
    const double top = std::abs(a.mean) + a.spread + 1.0;
    for (double m = 0.0; m <= top; m += 0.025) grid_ok = grid_ok && truncated_expectation(a, m) >= -1e-15;
    const auto check = check_truncated_nonneg(a);
    EXPECT_EQ(check.non_negative, grid_ok) << a.mean << " " << a.spread << " " << a.tail_prob;
    if (!check.non_negative) {
      EXPECT_LT(truncated_expectation(a, *check.witness), 0.0);
    }
  }
}

TEST(Environment, GapVector) {
  const auto g = gap_vector(stochastic({0.3, 0.0, 0.5}));
  EXPECT_EQ(g.best_arm, 1u);
  EXPECT_EQ(g.gaps, (std::vector<double>{0.3, 0.0, 0.5}));
  EXPECT_EQ(g.min_gap, 0.3);
  EXPECT_THROW(gap_vector(stochastic({0.2, 0.2, 0.5})), NonUniqueBestArm);
}

TEST(Environment, MomentReport) {
  const auto ok = check_moment_bound(stochastic({0.0, 0.5}));
  EXPECT_TRUE(ok.all_ok);
  ASSERT_EQ(ok.entries.size(), 2u);
  EXPECT_NEAR(ok.entries[0].margin, 1.0 - 0.31622776601683794, 1e-15);
  const auto bad = check_moment_bound(stochastic({0.0, 0.5}, 10.0, 0.1));
  EXPECT_FALSE(bad.all_ok);
}

TEST(Environment, SwitchingAdversaryShape) {
  const auto env = make_switching_adversary(2, 1001, 2, 0.5, 0.5, 10.0, 0.01, 1.5, 1.0);
  ASSERT_FALSE(env.is_stochastic());
  EXPECT_EQ(env.length(), 1001u);
  EXPECT_EQ(env.arms_at(1)[0].mean, 0.0);
  EXPECT_EQ(env.arms_at(500)[1].mean, 0.5);
  EXPECT_EQ(env.arms_at(501)[1].mean, 0.0);
  EXPECT_EQ(env.arms_at(1001)[0].mean, 0.5);
  // Arm 0 leads for 500 rounds, arm 1 for 501.
  EXPECT_EQ(benchmark_arm(env, 1001), 1u);
  EXPECT_EQ(benchmark_arm(env, 1000), 0u);

  const auto single = make_switching_adversary(3, 100, 1, 0.5, 0.5, 10.0, 0.01, 1.5, 1.0);
  EXPECT_TRUE(single.is_stochastic());
  EXPECT_THROW(make_switching_adversary(2, 100, 2, 0.5, 0.5, 10.0, 0.5, 1.5, 1.0), DomainError);
  EXPECT_THROW(make_switching_adversary(2, 100, 2, 0.0, 0.5, 10.0, 0.01, 1.5, 1.0), DomainError);
}

TEST(Environment, AssessmentFlagsEachAssumption) {
  EXPECT_TRUE(assess_environment(stochastic({0.0, 0.5}), 100).passes());
  EXPECT_FALSE(assess_environment(stochastic({0.0, 0.0}), 100).passes());
  EXPECT_FALSE(assess_environment(stochastic({-0.1, 0.5}, 1.0, 0.5), 100).truncation_ok());
  EXPECT_FALSE(assess_environment(stochastic({0.0, 0.5}, 10.0, 0.5), 100).moments.all_ok);
  const auto env = make_switching_adversary(2, 100, 2, 0.5, 0.5, 10.0, 0.01, 1.5, 1.0);
  EXPECT_FALSE(assess_environment(env, 200).covers_horizon);
}

TEST(Environment, LossVectorSampling) {
  const auto env = stochastic({0.0, 0.5}, 10.0, 0.02);
  const double u[] = {0.001, 0.995};
  EXPECT_EQ(sample_loss_vector(env, 1, u), (std::vector<double>{-10.0, 10.5}));
  EXPECT_THROW(sample_loss_vector(env, 0, u), DomainError);
}

TEST(CounterStream, DeterministicAndInRange) {
  const CounterStream a(42), b(42), c(43);
  for (std::uint64_t n = 0; n < 1000; ++n) {
    EXPECT_EQ(a.bits(n), b.bits(n));
    const double u = a.uniform(n);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_NE(a.bits(0), c.bits(0));
  const RoundDraws d{&a, 3, 5};
  EXPECT_EQ(d.base(), 16u);
  EXPECT_EQ(d.arm_uniform(), a.uniform(19));
}

TEST(ThreePointArmProperty, EmpiricalMomentMatches) {
  Gen g(22);
  const CounterStream s(5);
  for (int i = 0; i < 5; ++i) {
    const ThreePointArm a{g.real(-1.0, 1.0), g.real(0.5, 5.0), g.real(0.01, 0.3)};
    const double alpha = g.real(1.1, 2.0);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < n; ++k) {
      const double v = std::pow(std::abs(a.sample(s.uniform(i * n + k))), alpha);
      sum += v;
      sq += v * v;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    EXPECT_LE(std::abs(mean - alpha_moment(a, alpha)), 4.0 * se);
  }
}
