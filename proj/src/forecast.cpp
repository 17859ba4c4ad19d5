#include "zen/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace zen::forecast {

namespace {

void check_unit_open(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) {
    throw InvalidArgument(std::string(name) + " must lie in (0,1), got " + std::to_string(v));
  }
}

// Weights of exactly 0 are accepted for Holt-Winters beta/gamma so that the
// model can be reduced to plain exponential smoothing.
void check_unit_closed_low(double v, const char* name) {
  if (!(v >= 0.0 && v < 1.0)) {
    throw InvalidArgument(std::string(name) + " must lie in [0,1), got " + std::to_string(v));
  }
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

EwmaState make_ewma(double epsilon) {
  check_unit_open(epsilon, "epsilon");
  return EwmaState{0.0, epsilon, false};
}

std::pair<double, EwmaState> ewma_step(const EwmaState& state, double measured) {
  EwmaState next = state;
  if (!state.seeded) {
    next.prediction = measured;
    next.seeded = true;
  } else {
    next.prediction = state.epsilon * measured + (1.0 - state.epsilon) * state.prediction;
  }
  return {next.prediction, next};
}

SeasonalEwma make_seasonal_ewma(double epsilon, std::size_t period) {
  if (period == 0) throw InvalidArgument("period must be >= 1");
  SeasonalEwma s;
  s.bank.assign(period, make_ewma(epsilon));
  return s;
}

std::pair<double, SeasonalEwma> seasonal_ewma_step(const SeasonalEwma& state, double measured) {
  SeasonalEwma next = state;
  next.bank[state.position] = ewma_step(state.bank[state.position], measured).second;
  next.position = (state.position + 1) % state.bank.size();
  next.last = measured;
  const auto& upcoming = next.bank[next.position];
  return {upcoming.seeded ? upcoming.prediction : measured, next};
}

void validate(const HwParams& p) {
  check_unit_open(p.epsilon, "epsilon");
  check_unit_closed_low(p.beta, "beta");
  check_unit_closed_low(p.gamma, "gamma");
}

HwState hw_init(std::span<const double> history, std::size_t period, HwParams params) {
  if (period < 2) throw InvalidArgument("Holt-Winters period must be >= 2");
  validate(params);
  if (history.size() < 2 * period) {
    throw HistoryTooShort("Holt-Winters needs " + std::to_string(2 * period) +
                          " samples, got " + std::to_string(history.size()));
  }
  const auto l = static_cast<double>(period);
  const double mean1 = std::accumulate(history.begin(), history.begin() + period, 0.0) / l;
  const double mean2 =
      std::accumulate(history.begin() + period, history.begin() + 2 * period, 0.0) / l;
  const double overall =
      std::accumulate(history.begin(), history.end(), 0.0) / static_cast<double>(history.size());

  HwState s;
  s.params = params;
  s.level = mean1;
  s.trend = (mean2 - mean1) / l;
  s.seasonal.assign(period, 1.0);
  if (overall > 0.0) {
    // Each sample is divided by the linear trend through the two period means, so a
    // trending history does not leak into the seasonal shape.
    const double centre = (l - 1.0) / 2.0;
    double total = 0.0;
    for (std::size_t i = 0; i < period; ++i) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t j = i; j < history.size(); j += period) {
        const double base = mean1 + s.trend * (static_cast<double>(j) - centre);
        if (base <= s.floor) continue;
        sum += history[j] / base;
        ++n;
      }
      s.seasonal[i] = n == 0 ? 0.0 : sum / static_cast<double>(n);
      total += s.seasonal[i];
    }
    const double norm = total / l;
    for (auto& idx : s.seasonal) idx = norm > 0.0 ? std::max(idx / norm, s.floor) : 1.0;
  }
  s.position = 0;
  return s;
}

std::pair<double, HwState> hw_step(const HwState& state, double measured) {
  HwState next = state;
  const std::size_t l = state.period();
  const std::size_t p = state.position;
  if (measured > 0.0) {
    const auto& [eps, beta, gamma] = state.params;
    const double seasonal_prev = state.seasonal[p];
    if (seasonal_prev <= state.floor) {
      throw DivisionDegenerate("seasonal index at position " + std::to_string(p) +
                               " is at the floor");
    }
    next.level = eps * measured / seasonal_prev + (1.0 - eps) * (state.level + state.trend);
    next.trend = gamma * (next.level - state.level) + (1.0 - gamma) * state.trend;
    if (next.level <= state.floor) {
      throw DivisionDegenerate("Holt-Winters level fell to the floor");
    }
    next.seasonal[p] = beta * measured / next.level + (1.0 - beta) * seasonal_prev;
  }
  next.position = (p + 1) % l;
  const double prediction = (next.level + next.trend) * next.seasonal[next.position];
  return {prediction, next};
}

std::vector<double> predict_horizon(const EwmaState& state, std::size_t h) {
  return std::vector<double>(h, state.prediction);
}

std::vector<double> predict_horizon(const SeasonalEwma& state, std::size_t h) {
  std::vector<double> out;
  out.reserve(h);
  const std::size_t l = state.bank.size();
  for (std::size_t k = 0; k < h; ++k) {
    const auto& e = state.bank[(state.position + k) % l];
    out.push_back(e.seeded ? e.prediction : state.last);
  }
  return out;
}

std::vector<double> predict_horizon(const HwState& state, std::size_t h) {
  // `position` already points at the next slot, so step k uses position + k - 1.
  std::vector<double> out;
  out.reserve(h);
  const std::size_t l = state.period();
  for (std::size_t k = 1; k <= h; ++k) {
    out.push_back((state.level + static_cast<double>(k) * state.trend) *
                  state.seasonal[(state.position + k - 1) % l]);
  }
  return out;
}

OneStep one_step_ewma(std::span<const double> series, double epsilon, std::size_t period) {
  OneStep os;
  os.predictions.assign(series.size(), kNaN);
  os.first_scored = std::min(period, series.size());
  auto state = make_seasonal_ewma(epsilon, period);
  for (std::size_t t = 0; t < series.size(); ++t) {
    auto [pred, next] = seasonal_ewma_step(state, series[t]);
    state = std::move(next);
    if (t + 1 < series.size() && t + 1 >= os.first_scored) os.predictions[t + 1] = pred;
  }
  return os;
}

OneStep one_step_hw(std::span<const double> series, std::size_t period, HwParams params) {
  OneStep os;
  os.predictions.assign(series.size(), kNaN);
  auto state = hw_init(series.first(2 * period), period, params);
  os.first_scored = 2 * period;
  for (std::size_t t = 0; t < series.size(); ++t) {
    auto [pred, next] = hw_step(state, series[t]);
    state = std::move(next);
    if (t + 1 < series.size() && t + 1 >= os.first_scored) os.predictions[t + 1] = pred;
  }
  return os;
}

double mean_squared_error(std::span<const double> series, const OneStep& os) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = os.first_scored; t < series.size(); ++t) {
    const double e = series[t] - os.predictions[t];
    sum += e * e;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double mape(std::span<const double> series, const OneStep& os, double min_actual) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = os.first_scored; t < series.size(); ++t) {
    if (series[t] <= min_actual) continue;
    sum += std::abs(series[t] - std::max(0.0, os.predictions[t])) / series[t];
    ++n;
  }
  return n == 0 ? 0.0 : 100.0 * sum / static_cast<double>(n);
}

ParameterGrid ParameterGrid::uniform(double step) {
  if (!(step > 0.0 && step < 1.0)) throw InvalidArgument("grid step must lie in (0,1)");
  std::vector<double> values;
  for (int i = 1; static_cast<double>(i) * step < 1.0 - 1e-12; ++i) {
    values.push_back(static_cast<double>(i) * step);
  }
  return ParameterGrid{values, values, values};
}

FitResult fit_lmse(Model model, std::span<const double> series, const ParameterGrid& grid,
                   std::size_t period) {
  if (series.empty()) throw EmptyInput("cannot fit an empty series");
  FitResult best;
  best.lmse = std::numeric_limits<double>::infinity();

  // Grid axes are visited in ascending order so the first strict minimum is the
  // lexicographically smallest tuple among ties.
  auto sorted = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto eps_axis = sorted(grid.epsilon);
  if (eps_axis.empty()) throw EmptyInput("empty epsilon grid");

  if (model == Model::Ewma) {
    for (double eps : eps_axis) {
      const double err = mean_squared_error(series, one_step_ewma(series, eps, period));
      if (err < best.lmse) best = FitResult{{eps}, err};
    }
    return best;
  }

  const auto beta_axis = sorted(grid.beta);
  const auto gamma_axis = sorted(grid.gamma);
  if (beta_axis.empty() || gamma_axis.empty()) throw EmptyInput("empty Holt-Winters grid");
  for (double eps : eps_axis) {
    for (double beta : beta_axis) {
      for (double gamma : gamma_axis) {
        double err = std::numeric_limits<double>::infinity();
        try {
          err = mean_squared_error(series, one_step_hw(series, period, {eps, beta, gamma}));
        } catch (const DivisionDegenerate&) {
          // unusable parameter tuple; leave it at +inf
        }
        if (err < best.lmse) best = FitResult{{eps, beta, gamma}, err};
      }
    }
  }
  if (!std::isfinite(best.lmse)) throw DivisionDegenerate("no Holt-Winters grid point is usable");
  return best;
}

EnergyPredictor::EnergyPredictor(Model model, std::size_t period, double ewma_epsilon,
                                 HwParams hw)
    : model_(model),
      period_(period),
      hw_params_(hw),
      ewma_(make_seasonal_ewma(ewma_epsilon, period)) {
  if (model_ == Model::HoltWinters) {
    if (period < 2) throw InvalidArgument("Holt-Winters period must be >= 2");
    validate(hw);
  }
}

void EnergyPredictor::observe(double measured) {
  ewma_ = seasonal_ewma_step(ewma_, measured).second;
  if (model_ != Model::HoltWinters) return;

  history_.push_back(measured);
  if (hw_) {
    try {
      hw_ = hw_step(*hw_, measured).second;
    } catch (const DivisionDegenerate&) {
      hw_.reset();
    }
    if (hw_) return;
  }
  // (Re)initialise from the last two whole periods, aligned to position 0.
  const std::size_t n = history_.size();
  if (n < 2 * period_ || n % period_ != 0) return;
  const std::size_t start = n - 2 * period_;
  std::span<const double> window(history_.data() + start, 2 * period_);
  try {
    HwState s = hw_init(window, period_, hw_params_);
    for (double y : window) s = hw_step(s, y).second;
    hw_ = std::move(s);
  } catch (const DivisionDegenerate&) {
    hw_.reset();
  }
  // only the re-initialisation window is ever read again
  if (history_.size() > 4 * period_) {
    const std::size_t drop = ((history_.size() - 2 * period_) / period_) * period_;
    history_.erase(history_.begin(), history_.begin() + static_cast<std::ptrdiff_t>(drop));
  }
}

std::vector<double> EnergyPredictor::horizon(std::size_t h) const {
  auto out = hw_ ? predict_horizon(*hw_, h) : predict_horizon(ewma_, h);
  for (auto& v : out) v = std::max(0.0, v);
  return out;
}

}  // namespace zen::forecast
