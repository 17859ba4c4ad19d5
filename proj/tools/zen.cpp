// Command-line front end: simulation runs and the comparison experiments.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "zen/experiments.hpp"
#include "zen/sim.hpp"

namespace fs = std::filesystem;
using namespace zen;

namespace {

constexpr int kExitSchema = 2;
constexpr int kExitInfeasible = 3;

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::size_t> slots;
  std::optional<std::string> mode;
};

scenario::ScenarioConfig load_config(const Common& c) {
  auto cfg = scenario::parse_scenario(slurp(c.config));
  if (c.seed) cfg.seed = *c.seed;
  if (c.slots) cfg.slots = *c.slots;
  if (c.mode) cfg.routing.mode = routing::route_mode_from_string(*c.mode);
  scenario::validate(cfg);
  return cfg;
}

std::string base_dir(const Common& c) {
  const auto parent = fs::path(c.config).parent_path();
  return parent.empty() ? "." : parent.string();
}

std::string stamp(std::uint64_t seed, const std::string& hash) {
  return "# seed=" + std::to_string(seed) + " config_hash=" + hash + "\n";
}

/// Writes `body` after the provenance line.
void write_file(const fs::path& p, const std::string& header, const std::string& body) {
  std::ofstream f(p);
  if (!f) throw InvalidArgument("cannot write '" + p.string() + "'");
  f << header << body;
}

template <typename Fn>
std::string csv(Fn&& fn) {
  std::ostringstream os;
  os << std::setprecision(17);
  fn(os);
  return os.str();
}

void echo_config(const fs::path& out, const scenario::ScenarioConfig& cfg) {
  write_file(out / "config.json", "", scenario::serialize_scenario(cfg));
}

int cmd_run(const Common& c, bool mac_trace) {
  const auto cfg = load_config(c);
  const fs::path out(c.out);
  fs::create_directories(out);
  sim::SimOptions opts;
  opts.record_mac_trace = mac_trace;
  opts.base_dir = base_dir(c);
  const auto m = sim::simulate(cfg, cfg.slots, opts);
  const auto head = stamp(cfg.seed, scenario::hash_hex(scenario::config_hash(cfg)));
  write_file(out / "slots.csv", head, csv([&](auto& os) { sim::write_slot_reports(os, m); }));
  write_file(out / "ledger.csv", head, csv([&](auto& os) { sim::write_ledger(os, m); }));
  write_file(out / "routes.csv", head, csv([&](auto& os) { sim::write_route_log(os, m); }));
  write_file(out / "forecasts.csv", head, csv([&](auto& os) { sim::write_forecasts(os, m); }));
  if (mac_trace) write_file(out / "mac_trace.csv", head, csv([&](auto& os) { sim::write_mac_trace(os, m); }));
  write_file(out / "summary.json", "", sim::summary_json(m, cfg) + "\n");
  echo_config(out, cfg);
  std::cout << "pdr " << m.pdr() << " (" << m.delivered << "/" << m.generated << ") over " << m.slots
            << " slots -> " << out.string() << "\n";
  return 0;
}

int cmd_forecast_compare(const Common& c, const std::optional<std::string>& trace, std::size_t period) {
  const auto cfg = load_config(c);
  const fs::path out(c.out);
  fs::create_directories(out);
  std::vector<experiments::ForecastScore> scores;
  if (trace) {
    const auto t = scenario::load_trace_file(*trace, ProfileKind::Synthetic);
    std::vector<double> series;
    const std::size_t len = t.samples().back().slot + 1;
    for (std::size_t s = 0; s < len; ++s) series.push_back(harvest_in_slot(t, s, cfg.slot_duration_s).microjoules());
    auto sc = experiments::score_forecasts(series, period, cfg.predictor);
    sc.label = fs::path(*trace).filename().string();
    scores.push_back(sc);
  } else {
    for (const auto& p : cfg.profiles) {
      const std::size_t per = p.synthetic ? p.synthetic->period_slots : period;
      auto sc = experiments::score_forecasts(experiments::profile_series(cfg, p, cfg.slots, base_dir(c)), per,
                                             cfg.predictor);
      sc.label = p.name;
      scores.push_back(sc);
    }
  }
  const auto head = stamp(cfg.seed, scenario::hash_hex(scenario::config_hash(cfg)));
  write_file(out / "forecast_compare.csv", head, csv([&](auto& os) {
               os << "series,period,mape_ewma_pct,mape_hw_pct,mse_ewma,mse_hw\n";
               for (const auto& s : scores) {
                 os << s.label << ',' << s.period << ',' << s.mape_ewma << ',' << s.mape_hw << ','
                    << s.mse_ewma << ',' << s.mse_hw << '\n';
               }
             }));
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["config_hash"] = scenario::hash_hex(scenario::config_hash(cfg));
  for (const auto& s : scores) j["series"][s.label] = {{"mape_ewma_pct", s.mape_ewma}, {"mape_hw_pct", s.mape_hw}};
  write_file(out / "summary.json", "", j.dump(2) + "\n");
  echo_config(out, cfg);
  for (const auto& s : scores) {
    std::cout << s.label << ": EWMA " << s.mape_ewma << "%  Holt-Winters " << s.mape_hw << "%\n";
  }
  return 0;
}

int cmd_route_compare(const Common& c, std::size_t seeds) {
  const auto cfg = load_config(c);
  const fs::path out(c.out);
  fs::create_directories(out);
  std::vector<experiments::RouteComparison> rows;
  for (std::size_t i = 0; i < seeds; ++i) {
    rows.push_back(experiments::compare_routes(cfg, cfg.seed + i, cfg.slots, base_dir(c)));
  }
  const auto hash = scenario::hash_hex(scenario::config_hash(cfg));
  write_file(out / "route_compare.csv", stamp(cfg.seed, hash), csv([&](auto& os) {
               os << "seed,mode,pdr,generated,delivered,route_changes\n";
               for (const auto& r : rows) {
                 for (auto [name, m] : {std::pair{"modified", r.modified}, std::pair{"baseline", r.baseline}}) {
                   os << r.seed << ',' << name << ',' << m.pdr << ',' << m.generated << ',' << m.delivered << ','
                      << m.route_changes << '\n';
                 }
               }
             }));
  double gap = 0.0;
  bool ordered = true;
  for (const auto& r : rows) {
    gap += r.gap();
    ordered = ordered && r.modified.pdr >= r.baseline.pdr;
  }
  gap /= static_cast<double>(rows.size());
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["seeds"] = seeds;
  j["config_hash"] = hash;
  j["slots"] = cfg.slots;
  j["pdr_modified"] = nlohmann::json::array();
  j["pdr_baseline"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["pdr_modified"].push_back(r.modified.pdr);
    j["pdr_baseline"].push_back(r.baseline.pdr);
  }
  j["mean_gap_pp"] = 100.0 * gap;
  j["modified_at_least_baseline"] = ordered;
  write_file(out / "summary.json", "", j.dump(2) + "\n");
  echo_config(out, cfg);
  for (const auto& r : rows) {
    std::cout << "seed " << r.seed << ": modified " << r.modified.pdr << "  baseline " << r.baseline.pdr << "\n";
  }
  std::cout << "mean gap " << 100.0 * gap << " pp\n";
  return 0;
}

int cmd_tradeoff(const std::string& lp_path, const std::string& out_dir, double v_lo, std::optional<double> v_hi) {
  const auto text = slurp(lp_path);
  const auto lp = experiments::lp_from_json(text);
  const fs::path out(out_dir);
  fs::create_directories(out);
  const double hi = v_hi.value_or(lp.budget.microjoules());
  const auto curve = parametric_sweep(lp, EnergyAmount(v_lo), EnergyAmount(hi));
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h = (h ^ ch) * 0x100000001b3ULL;
  }
  write_file(out / "tradeoff.csv", "# seed=0 config_hash=" + scenario::hash_hex(h) + "\n",
             csv([&](auto& os) { write_curve_csv(os, curve); }));
  write_file(out / "lp.json", "", text);
  std::cout << curve.points.size() << " breakpoints, " << curve.pivots << " pivots\n";
  for (const auto& p : curve.points) std::cout << "  V=" << p.v << "  U=" << p.u << "\n";
  return 0;
}

int cmd_duty(const std::string& out_dir, const std::vector<double>& deltas, const std::string& duty_mode) {
  mac::MacConfig cfg;
  cfg.duty_mode = mac::duty_mode_from_string(duty_mode);
  cfg.validate();
  const auto rows = experiments::duty_table(deltas, cfg);
  const fs::path out(out_dir);
  fs::create_directories(out);
  std::ostringstream desc;
  desc << "duty_mode=" << duty_mode;
  for (double d : deltas) desc << ',' << d;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : desc.str()) h = (h ^ ch) * 0x100000001b3ULL;
  write_file(out / "duty.csv", "# seed=0 config_hash=" + scenario::hash_hex(h) + "\n", csv([&](auto& os) {
               os << std::setprecision(10);
               os << "delta,mode,wake_ms,sleep_ms,duty_fraction,preamble_packets\n";
               for (const auto& r : rows) {
                 os << r.delta << ',' << duty_mode << ',' << r.schedule.wake_ms << ',' << r.schedule.sleep_ms
                    << ',' << r.schedule.duty_fraction() << ',' << r.preamble_packets << '\n';
               }
             }));
  for (const auto& r : rows) {
    std::cout << "delta " << r.delta << ": wake " << r.schedule.wake_ms << " ms, sleep " << r.schedule.sleep_ms
              << " ms\n";
  }
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool with_mode) {
  sub->add_option("--config", c.config, "scenario JSON")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "override the scenario seed");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--slots", c.slots, "override the run length")->check(CLI::PositiveNumber);
  if (with_mode) sub->add_option("--mode", c.mode, "routing mode")->check(CLI::IsMember({"modified", "baseline"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-aware sensor network simulator"};
  app.require_subcommand(1);

  Common run_opts, fc_opts, rc_opts;
  bool mac_trace = false;
  auto* run = app.add_subcommand("run", "simulate a scenario and write per-slot metrics");
  add_common(run, run_opts, true);
  run->add_flag("--mac-trace", mac_trace, "also write the MAC event trace");

  std::optional<std::string> trace;
  std::size_t period = 96;
  auto* fc = app.add_subcommand("forecast-compare", "EWMA vs Holt-Winters one-step errors");
  add_common(fc, fc_opts, false);
  fc->add_option("--trace", trace, "score a CSV trace instead of the config's profiles")->check(CLI::ExistingFile);
  fc->add_option("--period", period, "season length for --trace")->check(CLI::PositiveNumber);

  std::size_t seeds = 1;
  auto* rc = app.add_subcommand("route-compare", "modified vs baseline delivery ratio");
  add_common(rc, rc_opts, false);
  rc->add_option("--seeds", seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);

  std::string lp_path, tr_out = "out";
  double v_lo = 0.0;
  std::optional<double> v_hi;
  auto* tr = app.add_subcommand("tradeoff", "utility vs residual energy curve of one slot LP");
  tr->add_option("--lp", lp_path, "LP JSON")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "output directory")->capture_default_str();
  tr->add_option("--v-min", v_lo, "lowest residual (uJ)");
  tr->add_option("--v-max", v_hi, "highest residual (uJ); defaults to the budget");

  std::string duty_out = "out", duty_mode = "formula";
  std::vector<double> deltas{0.05, 0.15, 0.25};
  auto* duty = app.add_subcommand("duty", "duty factor to wake/sleep schedule table");
  duty->add_option("--out", duty_out, "output directory")->capture_default_str();
  duty->add_option("--delta", deltas, "duty factors")->check(CLI::Range(0.0, 1.0));
  duty->add_option("--duty-mode", duty_mode, "formula or table")->check(CLI::IsMember({"formula", "table"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitSchema;
  }

  try {
    if (*run) return cmd_run(run_opts, mac_trace);
    if (*fc) return cmd_forecast_compare(fc_opts, trace, period);
    if (*rc) return cmd_route_compare(rc_opts, seeds);
    if (*tr) return cmd_tradeoff(lp_path, tr_out, v_lo, v_hi);
    if (*duty) return cmd_duty(duty_out, deltas, duty_mode);
  } catch (const scenario::SchemaError& e) {
    std::cerr << "schema error:\n";
    for (const auto& i : e.issues()) std::cerr << "  " << (i.path.empty() ? "<root>" : i.path) << ": " << i.message << "\n";
    return kExitSchema;
  } catch (const Infeasible& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
