#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "htbandit/ftrl.hpp"

using namespace htbandit;
using htbandit::testing::Gen;

namespace {

double closed_form_x1(double l1, double l2, double s) {
  const double d = l2 - l1;
  const double u = ((2.0 * s - d) + std::sqrt(d * d + 4.0 * s * s)) / 2.0;
  return s / u;
}

// Minimizes <L, x> - S sum log x over a shrinking grid of the simplex interior.
std::vector<double> grid_minimize(const std::vector<double>& L, double s) {
  auto objective = [&](const std::vector<double>& x) {
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) v += L[i] * x[i] - s * std::log(x[i]);
    return v;
  };
  const std::size_t k = L.size();
  std::vector<double> center(k, 1.0 / static_cast<double>(k));
  double radius = 0.5;
  for (int level = 0; level < 40; ++level) {
    std::vector<double> best = center;
    double best_value = objective(center);
    const int n = 10;
    for (int a = -n; a <= n; ++a) {
      for (int b = (k == 3 ? -n : 0); b <= (k == 3 ? n : 0); ++b) {
        std::vector<double> x = center;
        x[0] += radius * a / n;
        if (k == 3) x[1] += radius * b / n;
        double rest = 1.0;
        for (std::size_t i = 0; i + 1 < k; ++i) rest -= x[i];
        x[k - 1] = rest;
        bool ok = true;
        for (double p : x) ok = ok && p > 0.0;
        if (!ok) continue;
        const double v = objective(x);
        if (v < best_value) {
          best_value = v;
          best = x;
        }
      }
    }
    center = best;
    radius *= 0.5;
  }
  return center;
}

}  // namespace

TEST(LogBarrierSolver, TwoArmOracle) {
  const double L[] = {0.0, 10.0};
  const auto sol = solve_log_barrier(L, 4.0);
  EXPECT_NEAR(sol.point[0], 0.7403124237432849, 1e-12);
  EXPECT_NEAR(sol.point[1], 0.2596875762567151, 1e-12);
  EXPECT_NEAR(sol.multiplier, -5.4031242374328485, 1e-10);
  EXPECT_LE(sol.residual, 1e-12);
}

TEST(LogBarrierSolver, ThreeAndFiveArmOracles) {
  const double L3[] = {1.5, -2.0, 0.25};
  const auto s3 = solve_log_barrier(L3, 0.7);
  EXPECT_NEAR(s3.point[0], 0.15229670385730992, 1e-12);
  EXPECT_NEAR(s3.point[1], 0.6385164807134505, 1e-12);
  EXPECT_NEAR(s3.point[2], 0.20918681542923967, 1e-12);
  EXPECT_NEAR(s3.multiplier, -3.0962912017836257, 1e-10);

  const double L5[] = {3, 1, 4, 1, 5};
  const auto s5 = solve_log_barrier(L5, 2.0);
  const double expected[] = {0.19137408639696238, 0.2366657847313434, 0.17466126626660805, 0.2366657847313434,
                             0.16063307787374276};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(s5.point[i], expected[i], 1e-12);
  EXPECT_EQ(s5.point[1], s5.point[3]);
}

TEST(LogBarrierSolver, ZeroLossIsUniform) {
  const auto sol = solve_log_barrier(CumulativeLoss::zeros(4), 4.0);
  for (double p : sol.point.probs) EXPECT_NEAR(p, 0.25, 1e-15);
}

TEST(LogBarrierSolver, RejectsBadInput) {
  const double nan_loss[] = {0.0, std::numeric_limits<double>::quiet_NaN()};
  EXPECT_THROW(solve_log_barrier(nan_loss, 1.0), NonFiniteInput);
  const double inf_loss[] = {0.0, std::numeric_limits<double>::infinity()};
  EXPECT_THROW(solve_log_barrier(inf_loss, 1.0), NonFiniteInput);
  const double ok[] = {0.0, 1.0};
  EXPECT_THROW(solve_log_barrier(ok, 0.0), DomainError);
  EXPECT_THROW(solve_log_barrier(ok, -1.0), DomainError);
  const double single[] = {0.0};
  EXPECT_THROW(solve_log_barrier(single, 1.0), DomainError);
}

TEST(LogBarrierSolver, ExtremeSpreadStaysInterior) {
  const double L[] = {0.0, 1e12, -1e12};
  const auto sol = solve_log_barrier(L, 4.0);
  EXPECT_TRUE(sol.point.is_interior());
  EXPECT_GT(sol.point[2], 1.0 - 1e-10);
  EXPECT_GT(sol.point[1], 0.0);
}

TEST(LogBarrierSolverProperty, MatchesTwoArmClosedForm) {
  Gen g(1);
  for (int i = 0; i < 500; ++i) {
    const auto L = g.losses(2, 50.0);
    const double s = g.real(0.1, 20.0);
    const auto sol = solve_log_barrier(L, s);
    EXPECT_NEAR(sol.point[0], closed_form_x1(L[0], L[1], s), 1e-9);
    EXPECT_LE(sol.residual, 1e-12);
  }
}

TEST(LogBarrierSolverProperty, MatchesGridMinimizer) {
  Gen g(2);
  for (int i = 0; i < 40; ++i) {
    const std::size_t k = g.index(2, 3);
    const auto L = g.losses(k, 5.0);
    const double s = g.real(0.5, 5.0);
    const auto sol = solve_log_barrier(L, s);
    const auto brute = grid_minimize(L, s);
    for (std::size_t j = 0; j < k; ++j) EXPECT_NEAR(sol.point[j], brute[j], 1e-4);
  }
}

TEST(LogBarrierSolverProperty, KktFormAndBracket) {
  Gen g(3);
  for (int i = 0; i < 300; ++i) {
    const std::size_t k = g.index(2, 12);
    const auto L = g.losses(k, 100.0);
    const double s = g.real(0.01, 50.0);
    const auto sol = solve_log_barrier(L, s);
    const double min_l = *std::min_element(L.begin(), L.end());
    const double gap = min_l - sol.multiplier;
    EXPECT_GE(gap, s * (1.0 - 1e-12));
    EXPECT_LE(gap, static_cast<double>(k) * s * (1.0 + 1e-12));
    EXPECT_TRUE(sol.point.is_interior(1e-12));
    for (std::size_t j = 0; j < k; ++j) {
      EXPECT_NEAR(sol.point[j], s / (L[j] - sol.multiplier), 1e-12);
    }
  }
}

TEST(LogBarrierSolverProperty, TranslationInvariant) {
  Gen g(4);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = g.index(2, 6);
    auto L = g.losses(k, 10.0);
    const double s = g.real(0.5, 10.0);
    const auto a = solve_log_barrier(L, s);
    const double c = g.real(-1000.0, 1000.0);
    for (auto& l : L) l += c;
    const auto b = solve_log_barrier(L, s);
    for (std::size_t j = 0; j < k; ++j) EXPECT_NEAR(a.point[j], b.point[j], 1e-9);
    EXPECT_NEAR(b.multiplier - a.multiplier, c, 1e-9 * (1.0 + std::abs(c)));
  }
}

TEST(LogBarrierSolverProperty, LowerLossGetsMoreMass) {
  Gen g(5);
  for (int i = 0; i < 200; ++i) {
    const auto L = g.losses(5, 10.0);
    const auto sol = solve_log_barrier(L, 2.0);
    for (std::size_t a = 0; a < 5; ++a) {
      for (std::size_t b = 0; b < 5; ++b) {
        if (L[a] < L[b]) {
          EXPECT_GE(sol.point[a], sol.point[b]);
        }
      }
    }
  }
}

TEST(BregmanDivergence, Oracles) {
  EXPECT_NEAR(bregman_divergence_log_barrier(2.0, SimplexPoint{{0.5, 0.5}}, SimplexPoint{{0.25, 0.75}}),
              0.7579691884297715, 1e-14);
  EXPECT_NEAR(bregman_divergence_log_barrier(4.0, SimplexPoint{{0.2, 0.3, 0.5}}, SimplexPoint{{0.3, 0.3, 0.4}}),
              0.395952893842485, 1e-14);
  const SimplexPoint x{{0.1, 0.9}};
  EXPECT_EQ(bregman_divergence_log_barrier(3.0, x, x), 0.0);
}

TEST(BregmanDivergence, SmallRatioSeriesIsAccurate) {
  // x/z - 1 = 1e-6 per arm: divergence is S * sum w^2/2 to leading order.
  const SimplexPoint z{{0.5, 0.5}};
  const SimplexPoint x{{0.5 * (1 + 1e-6), 0.5 * (1 - 1e-6)}};
  const double d = bregman_divergence_log_barrier(1.0, x, z);
  EXPECT_NEAR(d, 1e-12, 1e-17);
}

TEST(BregmanDivergence, RejectsBoundary) {
  EXPECT_THROW(bregman_divergence_log_barrier(1.0, SimplexPoint{{1.0, 0.0}}, SimplexPoint{{0.5, 0.5}}),
               DomainError);
  EXPECT_THROW(bregman_divergence_log_barrier(1.0, SimplexPoint{{0.5, 0.5}}, SimplexPoint{{1.0, 0.0}}),
               DomainError);
  EXPECT_THROW(bregman_divergence_log_barrier(1.0, SimplexPoint{{0.5, 0.5}}, SimplexPoint{{0.2, 0.3, 0.5}}),
               DomainError);
}

TEST(BregmanDivergenceProperty, NonNegative) {
  Gen g(6);
  for (int i = 0; i < 500; ++i) {
    const std::size_t k = g.index(2, 8);
    const SimplexPoint x{g.simplex(k)};
    const SimplexPoint z{g.simplex(k)};
    EXPECT_GE(bregman_divergence_log_barrier(g.real(0.1, 10.0), x, z), 0.0);
  }
}

TEST(Psi, Oracles) {
  EXPECT_NEAR(psi_value(1.0, SimplexPoint{{0.5, 0.5}}), 1.3862943611198906, 1e-15);
  EXPECT_NEAR(psi_value(4.0, SimplexPoint{{0.7, 0.2, 0.1}}), 17.074791797467512, 1e-13);
  EXPECT_THROW(psi_value(1.0, SimplexPoint{{1.0, 0.0}}), DomainError);
}

TEST(Psi, ShiftOracle) {
  const SimplexPoint y{{1.0 - 1.0 / 1000.0, 1.0 / 1000.0}};
  const SimplexPoint x_next{{0.6, 0.4}};
  EXPECT_NEAR(psi_shift(4.0, 4.5, y, x_next), 2.7408197118377875, 1e-13);
  EXPECT_NEAR(psi_shift_bound(4.0, 4.5, 2, 1000.0), 6.907755278982137, 1e-13);
  EXPECT_EQ(psi_shift(4.0, 4.0, y, x_next), 0.0);
  EXPECT_THROW(psi_shift(4.0, 3.0, y, x_next), DomainError);
}

TEST(PsiProperty, ShiftBelowBoundWhenBenchmarkAdjusted) {
  Gen g(7);
  for (int i = 0; i < 300; ++i) {
    const std::size_t k = g.index(2, 6);
    const double T = static_cast<double>(g.index(k + 1, 100000));
    std::vector<double> y(k, 1.0 / T);
    y[g.index(0, k - 1)] = 1.0 - static_cast<double>(k - 1) / T;
    const SimplexPoint x{g.simplex(k)};
    const double s = g.real(1.0, 10.0);
    const double s2 = s + g.real(0.0, 2.0);
    EXPECT_LE(psi_shift(s, s2, SimplexPoint{y}, x), psi_shift_bound(s, s2, k, T) * (1 + 1e-12));
  }
}
