#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "zen/mac.hpp"
#include "zen/optimizer.hpp"
#include "zen/scenario.hpp"
#include "zen/sim.hpp"

namespace zen::experiments {

/// Harvested energy per slot (uJ) for a profile, synthetic or loaded from its CSV.
std::vector<double> profile_series(const scenario::ScenarioConfig& cfg,
                                   const scenario::ProfileConfig& profile, std::size_t n_slots,
                                   const std::string& base_dir = ".");

struct ForecastScore {
  std::string label;
  std::size_t period = 1;
  double mape_ewma = 0.0;
  double mape_hw = 0.0;
  double mse_ewma = 0.0;
  double mse_hw = 0.0;
};

/// One-step errors of the per-slot-of-day EWMA and Holt-Winters on the same series.
/// Slots darker than `dark_fraction` of the series peak are left out of the MAPE.
ForecastScore score_forecasts(const std::vector<double>& series, std::size_t period,
                              const scenario::PredictorConfig& pc, double dark_fraction = 0.05);

struct ModeResult {
  double pdr = 0.0;
  std::size_t generated = 0;
  std::size_t delivered = 0;
  std::size_t route_changes = 0;
};

struct RouteComparison {
  std::uint64_t seed = 0;
  ModeResult modified;
  ModeResult baseline;
  double gap() const { return modified.pdr - baseline.pdr; }
};

/// Same config and seed in both routing modes.
RouteComparison compare_routes(scenario::ScenarioConfig cfg, std::uint64_t seed, std::size_t n_slots,
                               const std::string& base_dir = ".");

struct DutyRow {
  double delta = 0.0;
  mac::DutySchedule schedule;
  int preamble_packets = 0;
};

std::vector<DutyRow> duty_table(const std::vector<double>& deltas, const mac::MacConfig& cfg);

/// {"weights": [...], "costs_uj": [...], "duty_energy_uj": x, "duty_weight": w,
///  "budget_uj": X, "delta_lower": l, "delta_upper": u}
PolicyLp lp_from_json(std::string_view text);

/// Mean sender energy (radio plus the transmit cost) per delivered frame when the
/// receiver runs at duty factor delta and its wake phase is random.
double sender_energy_per_delivery(double receiver_delta, const mac::MacConfig& cfg,
                                  const mac::RadioEnergyModel& radio,
                                  const OperationCostTable& table, int trials, std::uint64_t seed);

}  // namespace zen::experiments
