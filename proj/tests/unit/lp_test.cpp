#include "zen/lp.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace zen::lp {
namespace {

BoundedLp fixture() {
  BoundedLp lp;
  lp.rows = 1;
  lp.cols = 3;  // a1, a2, d
  lp.a = {30, 20, 10};
  lp.b = {40};
  lp.c = {6, 2, 0.5};
  lp.lower = {0, 0, 0};
  lp.upper = {1, 1, 1};
  return lp;
}

// Best objective over every basic solution: pick m basic columns, put the rest at
// either bound, solve the m x m system (m <= 2) and keep feasible points.
double enumerate_optimum(const BoundedLp& lp) {
  const std::size_t n = lp.cols, m = lp.rows;
  double best = -INFINITY;
  auto consider = [&](const std::vector<std::size_t>& basic) {
    std::vector<std::size_t> rest;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::find(basic.begin(), basic.end(), j) == basic.end()) rest.push_back(j);
    }
    for (std::size_t mask = 0; mask < (1u << rest.size()); ++mask) {
      std::vector<double> x(n, 0.0);
      std::vector<double> r = lp.b;
      for (std::size_t k = 0; k < rest.size(); ++k) {
        const std::size_t j = rest[k];
        x[j] = (mask >> k) & 1u ? lp.upper[j] : lp.lower[j];
        for (std::size_t i = 0; i < m; ++i) r[i] -= lp.at(i, j) * x[j];
      }
      if (m == 1) {
        const double a = lp.at(0, basic[0]);
        if (std::abs(a) < 1e-12) continue;
        x[basic[0]] = r[0] / a;
      } else {
        const double a = lp.at(0, basic[0]), b = lp.at(0, basic[1]);
        const double c = lp.at(1, basic[0]), d = lp.at(1, basic[1]);
        const double det = a * d - b * c;
        if (std::abs(det) < 1e-12) continue;
        x[basic[0]] = (r[0] * d - b * r[1]) / det;
        x[basic[1]] = (a * r[1] - c * r[0]) / det;
      }
      bool ok = true;
      for (std::size_t j : basic) ok = ok && x[j] >= lp.lower[j] - 1e-9 && x[j] <= lp.upper[j] + 1e-9;
      if (!ok) continue;
      double obj = 0.0;
      for (std::size_t j = 0; j < n; ++j) obj += lp.c[j] * x[j];
      best = std::max(best, obj);
    }
  };
  if (m == 1) {
    for (std::size_t j = 0; j < n; ++j) consider({j});
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) consider({i, j});
  }
  return best;
}

TEST(Tableau, FixtureOptimum) {
  Tableau t(fixture(), {-1.0});
  t.dual_simplex();
  EXPECT_TRUE(t.primal_feasible());
  EXPECT_TRUE(t.dual_feasible());
  const auto x = t.solution();
  EXPECT_DOUBLE_EQ(x[0], 1.0);
  EXPECT_DOUBLE_EQ(x[1], 0.5);
  EXPECT_DOUBLE_EQ(x[2], 0.0);
  EXPECT_DOUBLE_EQ(t.objective(), 7.0);
  EXPECT_EQ(t.basis(), (std::vector<std::size_t>{1}));
}

TEST(Tableau, RatioStepFindsFirstBreakpoint) {
  Tableau t(fixture(), {-1.0});
  t.dual_simplex();
  const auto step = t.ratio_step();
  ASSERT_TRUE(step.row.has_value());
  EXPECT_NEAR(step.lambda, 10.0, 1e-12);
  EXPECT_TRUE(step.toward_lower);
}

TEST(Tableau, ReoptimizeWithoutBreakpointOnlyShifts) {
  // d is the only variable; moving b up keeps the same basis.
  BoundedLp lp;
  lp.rows = 1;
  lp.cols = 1;
  lp.a = {10};
  lp.b = {2};
  lp.c = {0};
  lp.lower = {0};
  lp.upper = {1};
  Tableau t(lp, {1.0});
  t.dual_simplex();
  const auto basis = t.basis();
  Tableau same = dual_simplex_reoptimize(t, 0.0);
  EXPECT_EQ(same.basis(), basis);
  EXPECT_EQ(same.solution(), t.solution());

  Tableau flipped(lp, {0.0});
  flipped.dual_simplex();
  EXPECT_FALSE(flipped.ratio_step().row.has_value());
  Tableau moved = dual_simplex_reoptimize(flipped, 1e6);
  EXPECT_EQ(moved.basis(), flipped.basis());
}

TEST(Tableau, BasisChangeAtFixtureBreakpoint) {
  Tableau t(fixture(), {-1.0});
  t.dual_simplex();
  Tableau after = dual_simplex_reoptimize(t, 15.0);  // budget 25
  EXPECT_EQ(after.basis(), (std::vector<std::size_t>{0}));
  EXPECT_TRUE(after.primal_feasible());
  EXPECT_TRUE(after.dual_feasible());
  const auto x = after.solution();
  EXPECT_NEAR(x[0], 25.0 / 30.0, 1e-12);
  EXPECT_DOUBLE_EQ(x[1], 0.0);
  EXPECT_DOUBLE_EQ(x[2], 0.0);
  EXPECT_NEAR(after.objective(), 5.0, 1e-12);

  auto lp = fixture();
  lp.b = {25};
  EXPECT_NEAR(after.objective(), enumerate_optimum(lp), 1e-12);
}

TEST(Tableau, ReoptimizePastFeasibleRange) {
  auto lp = fixture();
  lp.lower[2] = 0.5;  // forces at least 5 uJ of spend
  Tableau t(lp, {-1.0});
  t.dual_simplex();
  EXPECT_THROW(dual_simplex_reoptimize(t, 36.0), PrimalInfeasible);
}

TEST(Tableau, InfeasibleRightHandSide) {
  auto lp = fixture();
  lp.b = {61};  // more than every column at its upper bound
  Tableau t(lp, {-1.0});
  EXPECT_THROW(t.dual_simplex(), PrimalInfeasible);
}

TEST(Tableau, DegenerateTiesAreDeterministic) {
  // Two identical columns tie in every ratio test.
  BoundedLp lp;
  lp.rows = 1;
  lp.cols = 3;
  lp.a = {10, 10, 5};
  lp.b = {5};
  lp.c = {1, 1, 0.1};
  lp.lower = {0, 0, 0};
  lp.upper = {1, 1, 1};
  Tableau t(lp, {-1.0});
  t.dual_simplex();
  EXPECT_NEAR(t.objective(), 0.5, 1e-12);
  for (int i = 0; i < 5; ++i) {
    Tableau again(lp, {-1.0});
    again.dual_simplex();
    EXPECT_EQ(again.basis(), t.basis());
    EXPECT_EQ(again.solution(), t.solution());
  }
}

TEST(Tableau, RejectsBadShapes) {
  auto lp = fixture();
  lp.c.pop_back();
  EXPECT_THROW(Tableau(lp, {-1.0}), DimensionMismatch);
  EXPECT_THROW(Tableau(fixture(), {}), DimensionMismatch);
  auto inverted = fixture();
  inverted.lower[0] = 2.0;
  EXPECT_THROW(Tableau(inverted, {-1.0}), InvalidArgument);
}

TEST(Tableau, MatchesVertexEnumerationOnRandomInstances) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> coef(1.0, 100.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> cols(1, 6);
  int solved = 0;
  for (int trial = 0; trial < 400; ++trial) {
    BoundedLp lp;
    lp.rows = trial % 2 == 0 ? 1 : 2;
    lp.cols = static_cast<std::size_t>(cols(rng)) + lp.rows;
    for (std::size_t k = 0; k < lp.rows * lp.cols; ++k) lp.a.push_back(coef(rng));
    for (std::size_t j = 0; j < lp.cols; ++j) {
      lp.c.push_back(coef(rng) - 30.0);
      lp.lower.push_back(0.0);
      lp.upper.push_back(1.0);
    }
    // a random point of the box guarantees feasibility
    std::vector<double> x0;
    for (std::size_t j = 0; j < lp.cols; ++j) x0.push_back(unit(rng));
    for (std::size_t i = 0; i < lp.rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < lp.cols; ++j) s += lp.at(i, j) * x0[j];
      lp.b.push_back(s);
    }
    Tableau t(lp, std::vector<double>(lp.rows, 0.0));
    t.dual_simplex();
    ASSERT_TRUE(t.primal_feasible());
    ASSERT_TRUE(t.dual_feasible(1e-7));
    const double expect = enumerate_optimum(lp);
    EXPECT_NEAR(t.objective(), expect, 1e-8 * std::max(1.0, std::abs(expect)));
    ++solved;
  }
  EXPECT_EQ(solved, 400);
}

}  // namespace
}  // namespace zen::lp
