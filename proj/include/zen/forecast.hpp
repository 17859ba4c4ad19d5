#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "zen/errors.hpp"

namespace zen::forecast {

/// Scalar exponentially weighted moving average:
///   next = epsilon * measured + (1 - epsilon) * current.
struct EwmaState {
  double prediction = 0.0;
  double epsilon = 0.5;
  bool seeded = false;
};

EwmaState make_ewma(double epsilon);

/// Returns the prediction for the next slot and the updated state. An unseeded
/// state takes the first measurement as its prediction.
std::pair<double, EwmaState> ewma_step(const EwmaState& state, double measured);

/// One EWMA per period position: slot t is predicted from slots t-l, t-2l, ...
/// With period 1 this is the scalar EWMA.
struct SeasonalEwma {
  std::vector<EwmaState> bank;
  std::size_t position = 0;
  /// Last measurement seen; used for positions not yet seeded.
  double last = 0.0;
};

SeasonalEwma make_seasonal_ewma(double epsilon, std::size_t period);
std::pair<double, SeasonalEwma> seasonal_ewma_step(const SeasonalEwma& state, double measured);

struct HwParams {
  double epsilon = 0.906;  // level weight
  double beta = 0.1;       // seasonal weight
  double gamma = 0.650;    // trend weight
  bool operator==(const HwParams&) const = default;
};

/// Multiplicative Holt-Winters state. `position` is the period index of the next
/// measurement to be consumed.
struct HwState {
  double level = 0.0;
  double trend = 0.0;
  std::vector<double> seasonal;
  HwParams params;
  std::size_t position = 0;
  double floor = 1e-9;

  std::size_t period() const { return seasonal.size(); }
};

void validate(const HwParams& p);

/// level = mean of first period, trend = (mean of second - mean of first) / l,
/// seasonal[i] = mean of history[i::l] relative to the fitted trend line, renormalised
/// to average 1. Without a trend this is mean(history[i::l]) / overall mean.
/// The returned state is positioned at index 0, ready to consume `history` from its
/// first sample. Throws HistoryTooShort unless history.size() >= 2l.
HwState hw_init(std::span<const double> history, std::size_t period, HwParams params = {});

/// Consume one measurement; returns the forecast for the following slot.
/// A zero measurement (night) advances the position but leaves level, trend and
/// seasonal indices untouched. Throws DivisionDegenerate when a divisor falls to the floor.
std::pair<double, HwState> hw_step(const HwState& state, double measured);

std::vector<double> predict_horizon(const EwmaState& state, std::size_t h);
std::vector<double> predict_horizon(const SeasonalEwma& state, std::size_t h);
std::vector<double> predict_horizon(const HwState& state, std::size_t h);

enum class Model { Ewma, HoltWinters };

/// One-step-ahead prediction for every slot of `series`. Entry t is the forecast of
/// series[t] made after consuming series[0..t-1]; entries before `first_scored` are NaN.
struct OneStep {
  std::vector<double> predictions;
  std::size_t first_scored = 0;
};

OneStep one_step_ewma(std::span<const double> series, double epsilon, std::size_t period = 1);
OneStep one_step_hw(std::span<const double> series, std::size_t period, HwParams params);

/// Mean squared one-step error over the scored range.
double mean_squared_error(std::span<const double> series, const OneStep& os);

/// Mean absolute percentage error (percent) over scored slots whose actual value
/// exceeds `min_actual` (dark slots carry no meaningful relative error).
double mape(std::span<const double> series, const OneStep& os, double min_actual = 0.0);

struct FitResult {
  std::vector<double> parameters;  // (epsilon) or (epsilon, beta, gamma)
  double lmse = 0.0;
};

/// Grid of candidate values. For EWMA only `epsilon` is read.
struct ParameterGrid {
  std::vector<double> epsilon;
  std::vector<double> beta;
  std::vector<double> gamma;

  /// 0.05, 0.10, ..., 0.95 for every parameter.
  static ParameterGrid uniform(double step = 0.05);
};

/// Exhaustive grid search minimising the one-step mean squared error. Ties resolve to
/// the lexicographically smallest parameter tuple. `period` is the EWMA bank length
/// or the Holt-Winters season length.
FitResult fit_lmse(Model model, std::span<const double> series, const ParameterGrid& grid,
                   std::size_t period = 1);

/// Online predictor used by a simulated node: per-position EWMA until two full periods
/// of history exist, Holt-Winters afterwards (when selected).
class EnergyPredictor {
 public:
  EnergyPredictor(Model model, std::size_t period, double ewma_epsilon, HwParams hw);

  void observe(double measured);
  /// Forecasts for the next h slots, clamped at zero.
  std::vector<double> horizon(std::size_t h) const;
  bool holt_winters_active() const { return hw_.has_value(); }

 private:
  Model model_;
  std::size_t period_;
  HwParams hw_params_;
  SeasonalEwma ewma_;
  std::vector<double> history_;
  std::optional<HwState> hw_;
};

}  // namespace zen::forecast
