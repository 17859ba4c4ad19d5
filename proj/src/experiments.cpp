#include "zen/experiments.hpp"

#include <algorithm>
#include <filesystem>

#include <json.hpp>

namespace zen::experiments {

std::vector<double> profile_series(const scenario::ScenarioConfig& cfg,
                                   const scenario::ProfileConfig& profile, std::size_t n_slots,
                                   const std::string& base_dir) {
  if (n_slots == 0) throw InvalidArgument("need at least one slot");
  HarvestTrace trace;
  if (profile.trace_file) {
    std::filesystem::path p(*profile.trace_file);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    trace = scenario::load_trace_file(p.string(), profile.kind, profile.scale);
  } else {
    trace = scenario::synth_trace(profile.synthetic.value_or(scenario::SyntheticTraceSpec{}), n_slots,
                                  profile.kind, profile.scale);
  }
  const std::size_t len = trace.samples().back().slot + 1;
  std::vector<double> out(n_slots);
  for (std::size_t s = 0; s < n_slots; ++s) {
    out[s] = harvest_in_slot(trace, s % len, cfg.slot_duration_s).microjoules();
  }
  return out;
}

ForecastScore score_forecasts(const std::vector<double>& series, std::size_t period,
                              const scenario::PredictorConfig& pc, double dark_fraction) {
  ForecastScore s;
  s.period = period;
  const double peak = series.empty() ? 0.0 : *std::max_element(series.begin(), series.end());
  const double dark = dark_fraction * peak;
  const auto ew = forecast::one_step_ewma(series, pc.ewma_epsilon, period);
  const auto hw = forecast::one_step_hw(series, period, pc.hw);
  // score both over the same slots: HW needs two periods of history first
  forecast::OneStep ew_aligned = ew;
  ew_aligned.first_scored = std::max(ew.first_scored, hw.first_scored);
  s.mape_ewma = forecast::mape(series, ew_aligned, dark);
  s.mape_hw = forecast::mape(series, hw, dark);
  s.mse_ewma = forecast::mean_squared_error(series, ew_aligned);
  s.mse_hw = forecast::mean_squared_error(series, hw);
  return s;
}

RouteComparison compare_routes(scenario::ScenarioConfig cfg, std::uint64_t seed, std::size_t n_slots,
                               const std::string& base_dir) {
  RouteComparison rc;
  rc.seed = seed;
  cfg.seed = seed;
  sim::SimOptions opts;
  opts.record_charges = false;
  opts.base_dir = base_dir;
  for (auto mode : {routing::RouteMode::Modified, routing::RouteMode::Baseline}) {
    cfg.routing.mode = mode;
    const auto m = sim::simulate(cfg, n_slots, opts);
    ModeResult& r = mode == routing::RouteMode::Modified ? rc.modified : rc.baseline;
    r.pdr = m.pdr();
    r.generated = m.generated;
    r.delivered = m.delivered;
    r.route_changes = m.route_log.size();
  }
  return rc;
}

std::vector<DutyRow> duty_table(const std::vector<double>& deltas, const mac::MacConfig& cfg) {
  std::vector<DutyRow> rows;
  for (double d : deltas) {
    DutyRow r;
    r.delta = d;
    r.schedule = mac::schedule_from_delta(d, cfg);
    r.preamble_packets = r.schedule.radio_off ? 0 : mac::preamble_train(r.schedule.sleep_ms, cfg).count;
    rows.push_back(r);
  }
  return rows;
}

PolicyLp lp_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw scenario::SchemaError({scenario::SchemaIssue{"", std::string("not valid JSON: ") + e.what()}});
  }
  std::vector<scenario::SchemaIssue> issues;
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::vector<std::string> known{"weights", "costs_uj", "duty_energy_uj", "duty_weight",
                                                "budget_uj", "delta_lower", "delta_upper"};
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      issues.push_back({it.key(), "unknown key"});
    }
  }
  for (const char* k : {"weights", "costs_uj", "duty_energy_uj", "budget_uj"}) {
    if (!j.contains(k)) issues.push_back({k, "required"});
  }
  if (!issues.empty()) throw scenario::SchemaError(issues);
  try {
    std::vector<EnergyAmount> costs;
    for (double c : j["costs_uj"].get<std::vector<double>>()) costs.emplace_back(c);
    auto lp = build_opt(j["weights"].get<std::vector<double>>(), costs,
                        EnergyAmount(j["duty_energy_uj"].get<double>()), j.value("duty_weight", 0.0),
                        EnergyAmount(j["budget_uj"].get<double>()));
    lp.delta_lower = j.value("delta_lower", lp.delta_lower);
    lp.delta_upper = j.value("delta_upper", lp.delta_upper);
    return lp;
  } catch (const nlohmann::json::exception& e) {
    throw scenario::SchemaError({scenario::SchemaIssue{"", e.what()}});
  }
}

double sender_energy_per_delivery(double receiver_delta, const mac::MacConfig& cfg,
                                  const mac::RadioEnergyModel& radio,
                                  const OperationCostTable& table, int trials, std::uint64_t seed) {
  Rng rng(seed);
  const double tx_cost = table.cost(OperationKind::Transmit, 0).microjoules();
  double total = 0.0;
  int delivered = 0;
  for (int i = 0; i < trials; ++i) {
    mac::SendRequest req;
    req.receiver_schedule = mac::schedule_from_delta(receiver_delta, cfg);
    req.sized_sleep_ms = req.receiver_schedule.sleep_ms;
    req.retry_sleep_ms = mac::longest_sleep_ms(cfg);
    req.receiver_origin_ms = rng.uniform(0.0, req.receiver_schedule.period_ms());
    req.start_ms = 1000.0;
    const auto out = mac::csma_send(req, cfg, {}, rng);
    mac::RadioDurations d = out.radio;
    d.tx_ms = std::max(0.0, d.tx_ms - out.data_frames * cfg.data_ms);
    total += mac::radio_energy(d, radio).microjoules() + out.data_frames * tx_cost;
    delivered += out.status == mac::SendStatus::Delivered;
  }
  if (delivered == 0) throw InvalidArgument("no frame was delivered");
  return total / delivered;
}

}  // namespace zen::experiments
