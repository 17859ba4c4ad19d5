#include "zen/forecast.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace zen::forecast {
namespace {

constexpr double kPi = 3.14159265358979323846;

TEST(Ewma, ConstantSeriesIsFixedPoint) {
  auto s = make_ewma(0.3);
  for (int i = 0; i < 20; ++i) {
    auto [pred, next] = ewma_step(s, 42.0);
    EXPECT_DOUBLE_EQ(pred, 42.0);
    s = next;
  }
}

TEST(Ewma, HandStep) {
  EwmaState s{10.0, 0.5, true};
  EXPECT_DOUBLE_EQ(ewma_step(s, 20.0).first, 15.0);
  EXPECT_DOUBLE_EQ(EwmaState{}.epsilon, 0.5);
  EXPECT_THROW(make_ewma(0.0), InvalidArgument);
  EXPECT_THROW(make_ewma(1.0), InvalidArgument);
}

TEST(Ewma, PredictionStaysInsideObservedRange) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 500.0);
  std::uniform_real_distribution<double> e(0.01, 0.99);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = make_ewma(e(rng));
    double lo = INFINITY, hi = -INFINITY;
    for (int i = 0; i < 100; ++i) {
      const double y = u(rng);
      lo = std::min(lo, y);
      hi = std::max(hi, y);
      auto [pred, next] = ewma_step(s, y);
      EXPECT_GE(pred, lo - 1e-9);
      EXPECT_LE(pred, hi + 1e-9);
      s = next;
    }
  }
}

TEST(Ewma, HorizonRepeats) {
  EwmaState s{15.0, 0.5, true};
  EXPECT_EQ(predict_horizon(s, 2), (std::vector<double>{15.0, 15.0}));
}

TEST(HoltWinters, DefaultParameters) {
  const HwParams p;
  EXPECT_DOUBLE_EQ(p.epsilon, 0.906);
  EXPECT_DOUBLE_EQ(p.beta, 0.1);
  EXPECT_DOUBLE_EQ(p.gamma, 0.650);
}

HwState flat_state(double level, double trend, std::size_t l, HwParams p) {
  HwState s;
  s.level = level;
  s.trend = trend;
  s.seasonal.assign(l, 1.0);
  s.params = p;
  return s;
}

TEST(HoltWinters, FixedPoint) {
  auto s = flat_state(7.0, 0.0, 4, {});
  for (int i = 0; i < 10; ++i) {
    auto [pred, next] = hw_step(s, 7.0);
    EXPECT_NEAR(pred, 7.0, 1e-12);
    EXPECT_NEAR(next.level, 7.0, 1e-12);
    EXPECT_NEAR(next.trend, 0.0, 1e-12);
    for (double idx : next.seasonal) EXPECT_NEAR(idx, 1.0, 1e-12);
    s = next;
  }
}

TEST(HoltWinters, HandStepWithFrozenTrendAndSeason) {
  // Level 9 + trend 1 expects 10; feeding exactly that leaves level 10, trend 1.
  auto s = flat_state(9.0, 1.0, 3, {0.4, 0.0, 0.0});
  auto [pred, next] = hw_step(s, 10.0);
  EXPECT_DOUBLE_EQ(next.level, 10.0);
  EXPECT_DOUBLE_EQ(next.trend, 1.0);
  EXPECT_DOUBLE_EQ(pred, 11.0);
}

TEST(HoltWinters, ZeroMeasurementFreezesState) {
  auto s = flat_state(5.0, 0.5, 3, {});
  s.seasonal = {0.5, 1.0, 1.5};
  auto [pred, next] = hw_step(s, 0.0);
  EXPECT_EQ(next.level, s.level);
  EXPECT_EQ(next.trend, s.trend);
  EXPECT_EQ(next.seasonal, s.seasonal);
  EXPECT_EQ(next.position, 1u);
  EXPECT_DOUBLE_EQ(pred, 5.5 * 1.0);
}

TEST(HoltWinters, DegenerateSeasonalThrows) {
  auto s = flat_state(5.0, 0.0, 2, {});
  s.seasonal = {1e-12, 1.0};
  EXPECT_THROW(hw_step(s, 3.0), DivisionDegenerate);
}

TEST(HoltWinters, HorizonExtrapolatesTrend) {
  auto s = flat_state(10.0, 1.0, 5, {});
  EXPECT_EQ(predict_horizon(s, 3), (std::vector<double>{11.0, 12.0, 13.0}));
  // h = 1 matches the single-step forecast after a consistent update.
  auto t = flat_state(9.0, 1.0, 5, {0.5, 0.0, 0.0});
  auto [pred, next] = hw_step(t, 10.0);
  EXPECT_DOUBLE_EQ(predict_horizon(next, 1).at(0), pred);
}

TEST(HoltWinters, InitFlatHistory) {
  std::vector<double> h(8, 3.0);
  auto s = hw_init(h, 4);
  EXPECT_DOUBLE_EQ(s.level, 3.0);
  EXPECT_DOUBLE_EQ(s.trend, 0.0);
  for (double idx : s.seasonal) EXPECT_DOUBLE_EQ(idx, 1.0);
  EXPECT_EQ(s.position, 0u);
}

TEST(HoltWinters, InitSeasonalIndices) {
  std::vector<double> h{2, 4, 2, 4};
  auto s = hw_init(h, 2);
  EXPECT_NEAR(s.seasonal[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.seasonal[1], 4.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(s.trend, 0.0);
  EXPECT_DOUBLE_EQ(s.level, 3.0);
}

TEST(HoltWinters, InitNeedsTwoPeriods) {
  std::vector<double> h{1, 2, 3};
  EXPECT_THROW(hw_init(h, 2), HistoryTooShort);
}

TEST(HoltWinters, ReducesToExponentialSmoothing) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1.0, 100.0);
  for (double eps : {0.1, 0.5, 0.906}) {
    auto hw = flat_state(50.0, 0.0, 6, {eps, 0.0, 0.0});
    EwmaState ew{50.0, eps, true};
    for (int i = 0; i < 200; ++i) {
      const double y = u(rng);
      auto [hp, hn] = hw_step(hw, y);
      auto [ep, en] = ewma_step(ew, y);
      EXPECT_NEAR(hp, ep, 1e-12 * std::max(1.0, ep));
      hw = hn;
      ew = en;
    }
  }
}

TEST(HoltWinters, ConvergesOnNoiselessSeasonalTrend) {
  const std::size_t l = 24;
  std::vector<double> series;
  for (std::size_t t = 0; t < 10 * l; ++t) {
    const double s = 1.0 + 0.6 * std::sin(2.0 * kPi * static_cast<double>(t % l) / l);
    series.push_back((100.0 + 0.5 * static_cast<double>(t)) * s);
  }
  const auto hw = one_step_hw(series, l, {});
  const auto ew = one_step_ewma(series, 0.5, 1);
  // three periods after the two-period initialisation window
  double hw_worst = 0.0, ew_worst = 0.0;
  for (std::size_t t = 5 * l; t < series.size(); ++t) {
    hw_worst = std::max(hw_worst, std::abs(hw.predictions[t] - series[t]) / series[t]);
    ew_worst = std::max(ew_worst, std::abs(ew.predictions[t] - series[t]) / series[t]);
  }
  EXPECT_LT(hw_worst, 0.01);
  EXPECT_GT(ew_worst, 0.01);
}

TEST(OneStep, EwmaScoringStartsAfterSeed) {
  std::vector<double> y{10, 20, 10};
  auto os = one_step_ewma(y, 0.5);
  EXPECT_EQ(os.first_scored, 1u);
  EXPECT_TRUE(std::isnan(os.predictions[0]));
  EXPECT_DOUBLE_EQ(os.predictions[1], 10.0);
  EXPECT_DOUBLE_EQ(os.predictions[2], 15.0);
}

TEST(Mape, SkipsDarkSlotsAndClampsNegatives) {
  std::vector<double> y{0, 10, 0, 20};
  OneStep os{{NAN, 12.0, 5.0, -3.0}, 1};
  // |10-12|/10 = 0.2 and |20-0|/20 = 1.0
  EXPECT_NEAR(mape(y, os), 60.0, 1e-12);
}

double ewma_lmse_by_hand(const std::vector<double>& y, double eps) {
  double pred = y[0], sum = 0.0;
  for (std::size_t t = 1; t < y.size(); ++t) {
    sum += (y[t] - pred) * (y[t] - pred);
    pred = eps * y[t] + (1.0 - eps) * pred;
  }
  return sum / static_cast<double>(y.size() - 1);
}

TEST(FitLmse, EwmaMatchesHandEvaluation) {
  std::vector<double> y;
  for (int i = 0; i < 40; ++i) y.push_back(i % 2 == 0 ? 10.0 : 20.0);
  ParameterGrid g{{0.9, 0.1, 0.5}, {}, {}};
  const auto fit = fit_lmse(Model::Ewma, y, g);
  double best = INFINITY, arg = 0.0;
  for (double e : {0.1, 0.5, 0.9}) {
    const double v = ewma_lmse_by_hand(y, e);
    if (v < best) {
      best = v;
      arg = e;
    }
  }
  ASSERT_EQ(fit.parameters.size(), 1u);
  EXPECT_DOUBLE_EQ(fit.parameters[0], arg);
  EXPECT_NEAR(fit.lmse, best, 1e-12);
  EXPECT_DOUBLE_EQ(arg, 0.1);
}

TEST(FitLmse, ConstantSeriesPicksSmallestTuple) {
  std::vector<double> y(30, 4.0);
  const auto g = ParameterGrid::uniform(0.25);
  auto ew = fit_lmse(Model::Ewma, y, g);
  EXPECT_DOUBLE_EQ(ew.parameters[0], 0.25);
  EXPECT_DOUBLE_EQ(ew.lmse, 0.0);
  auto hw = fit_lmse(Model::HoltWinters, y, g, 3);
  EXPECT_EQ(hw.parameters, (std::vector<double>{0.25, 0.25, 0.25}));
  EXPECT_NEAR(hw.lmse, 0.0, 1e-20);
}

TEST(FitLmse, HoltWintersMatchesBruteForce) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0.0, 2.0);
  const std::size_t l = 6;
  std::vector<double> y;
  for (std::size_t t = 0; t < 8 * l; ++t) {
    y.push_back(std::max(1.0, 30.0 + 10.0 * std::sin(2.0 * kPi * (t % l) / l) + noise(rng)));
  }
  ParameterGrid g{{0.2, 0.6}, {0.1, 0.3}, {0.05, 0.5}};
  const auto fit = fit_lmse(Model::HoltWinters, y, g, l);
  double best = INFINITY;
  std::vector<double> arg;
  for (double e : g.epsilon)
    for (double b : g.beta)
      for (double c : g.gamma) {
        const double v = mean_squared_error(y, one_step_hw(y, l, {e, b, c}));
        if (v < best) {
          best = v;
          arg = {e, b, c};
        }
      }
  EXPECT_EQ(fit.parameters, arg);
  EXPECT_DOUBLE_EQ(fit.lmse, best);
}

TEST(FitLmse, EmptyInputs) {
  std::vector<double> none;
  EXPECT_THROW(fit_lmse(Model::Ewma, none, ParameterGrid::uniform()), EmptyInput);
  std::vector<double> y{1, 2, 3};
  EXPECT_THROW(fit_lmse(Model::Ewma, y, ParameterGrid{}), EmptyInput);
}

TEST(EnergyPredictor, SwitchesToHoltWintersAfterTwoPeriods) {
  EnergyPredictor p(Model::HoltWinters, 4, 0.5, {});
  for (int i = 0; i < 7; ++i) {
    p.observe(10.0 + i % 4);
    EXPECT_FALSE(p.holt_winters_active());
  }
  p.observe(13.0);
  EXPECT_TRUE(p.holt_winters_active());
  const auto h = p.horizon(3);
  ASSERT_EQ(h.size(), 3u);
  for (double v : h) EXPECT_GE(v, 0.0);
}

TEST(EnergyPredictor, EwmaModelNeverUsesHoltWinters) {
  EnergyPredictor p(Model::Ewma, 4, 0.5, {});
  for (int i = 0; i < 40; ++i) p.observe(5.0);
  EXPECT_FALSE(p.holt_winters_active());
  EXPECT_EQ(p.horizon(2), (std::vector<double>{5.0, 5.0}));
}

}  // namespace
}  // namespace zen::forecast
