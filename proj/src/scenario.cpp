#include "zen/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "zen/rng.hpp"

namespace zen::scenario {

using nlohmann::json;

namespace {

std::string join_issues(const std::vector<SchemaIssue>& issues) {
  std::string s = std::to_string(issues.size()) + " schema violation(s):";
  for (const auto& i : issues) s += "\n  " + i.path + ": " + i.message;
  return s;
}

std::string_view to_string(forecast::Model m) {
  return m == forecast::Model::Ewma ? "ewma" : "holt_winters";
}

std::string_view to_string(routing::CostMode m) {
  return m == routing::CostMode::Magnitude ? "magnitude" : "raw_sum";
}

// Walks a JSON document, filling defaults and collecting every problem it meets.
class Reader {
 public:
  std::vector<SchemaIssue> issues;

  void fail(const std::string& path, std::string msg) { issues.push_back({path, std::move(msg)}); }

  bool object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    fail(path, "expected an object");
    return false;
  }

  void allowed(const json& j, const std::string& path, std::initializer_list<std::string_view> keys) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
        fail(join(path, it.key()), "unknown key");
      }
    }
  }

  static std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
  }

  void number(const json& j, const std::string& path, std::string_view key, double& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(std::string(key));
    if (!v.is_number()) {
      fail(join(path, key), "expected a number");
      return;
    }
    out = v.get<double>();
  }

  template <typename Int>
  void integer(const json& j, const std::string& path, std::string_view key, Int& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(std::string(key));
    if (!v.is_number_integer()) {
      fail(join(path, key), "expected an integer");
      return;
    }
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned() || v.get<long long>() >= 0) {
        out = v.get<Int>();
      } else {
        fail(join(path, key), "must not be negative");
      }
    } else {
      out = v.get<Int>();
    }
  }

  void boolean(const json& j, const std::string& path, std::string_view key, bool& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(std::string(key));
    if (!v.is_boolean()) {
      fail(join(path, key), "expected true or false");
      return;
    }
    out = v.get<bool>();
  }

  void string(const json& j, const std::string& path, std::string_view key, std::string& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(std::string(key));
    if (!v.is_string()) {
      fail(join(path, key), "expected a string");
      return;
    }
    out = v.get<std::string>();
  }

  template <std::size_t N, typename T>
  void array(const json& j, const std::string& path, std::string_view key, std::array<T, N>& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(std::string(key));
    if (!v.is_array() || v.size() != N) {
      fail(join(path, key), "expected an array of " + std::to_string(N) + " numbers");
      return;
    }
    for (std::size_t i = 0; i < N; ++i) {
      if (!v[i].is_number()) {
        fail(join(path, key) + "[" + std::to_string(i) + "]", "expected a number");
        continue;
      }
      out[i] = v[i].get<T>();
    }
  }

  template <typename Enum, typename Fn>
  void choice(const json& j, const std::string& path, std::string_view key, Enum& out, Fn parse) {
    std::string s;
    const auto before = issues.size();
    string(j, path, key, s);
    if (issues.size() != before || s.empty()) return;
    try {
      out = parse(s);
    } catch (const Error& e) {
      fail(join(path, key), e.what());
    }
  }
};

forecast::Model model_from_string(std::string_view s) {
  if (s == "ewma") return forecast::Model::Ewma;
  if (s == "holt_winters") return forecast::Model::HoltWinters;
  throw InvalidArgument("unknown predictor '" + std::string(s) + "' (ewma, holt_winters)");
}

routing::CostMode cost_mode_from_string(std::string_view s) {
  if (s == "magnitude") return routing::CostMode::Magnitude;
  if (s == "raw_sum") return routing::CostMode::RawSum;
  throw InvalidArgument("unknown cost mode '" + std::string(s) + "' (magnitude, raw_sum)");
}

Role role_from_string(std::string_view s) {
  if (s == "source") return Role::Source;
  if (s == "relay") return Role::Relay;
  if (s == "sink") return Role::Sink;
  throw InvalidArgument("unknown role '" + std::string(s) + "' (source, relay, sink)");
}

void read_energy(Reader& r, const json& j, EnergyConfig& e) {
  const std::string p = "energy";
  if (!r.object(j, p)) return;
  r.allowed(j, p, {"capacity_uj", "thresholds", "floor_fraction", "initial_fraction"});
  r.number(j, p, "capacity_uj", e.capacity_uj);
  r.array(j, p, "thresholds", e.thresholds);
  r.number(j, p, "floor_fraction", e.floor_fraction);
  r.number(j, p, "initial_fraction", e.initial_fraction);
}

void read_predictor(Reader& r, const json& j, PredictorConfig& c) {
  const std::string p = "predictor";
  if (!r.object(j, p)) return;
  r.allowed(j, p, {"model", "ewma_epsilon", "hw", "horizon", "virtual_window_slots"});
  r.choice(j, p, "model", c.model, model_from_string);
  r.number(j, p, "ewma_epsilon", c.ewma_epsilon);
  r.integer(j, p, "horizon", c.horizon);
  r.integer(j, p, "virtual_window_slots", c.virtual_window_slots);
  if (j.contains("hw") && r.object(j["hw"], p + ".hw")) {
    const auto& h = j["hw"];
    r.allowed(h, p + ".hw", {"epsilon", "beta", "gamma"});
    r.number(h, p + ".hw", "epsilon", c.hw.epsilon);
    r.number(h, p + ".hw", "beta", c.hw.beta);
    r.number(h, p + ".hw", "gamma", c.hw.gamma);
  }
}

void read_optimizer(Reader& r, const json& j, OptimizerConfig& c) {
  const std::string p = "optimizer";
  if (!r.object(j, p)) return;
  r.allowed(j, p, {"duty_energy_uj", "duty_weight", "reserve", "residual_fraction", "delta_cap",
                   "delta_floor", "backlog_capacity"});
  r.number(j, p, "duty_energy_uj", c.duty_energy_uj);
  if (j.contains("duty_weight") && !j["duty_weight"].is_null()) {
    double w = 0.0;
    const auto before = r.issues.size();
    r.number(j, p, "duty_weight", w);
    if (r.issues.size() == before) c.duty_weight = w;
  }
  r.array(j, p, "reserve", c.reserve);
  r.array(j, p, "residual_fraction", c.residual_fraction);
  r.array(j, p, "delta_cap", c.delta_cap);
  r.number(j, p, "delta_floor", c.delta_floor);
  r.integer(j, p, "backlog_capacity", c.backlog_capacity);
}

void read_routing(Reader& r, const json& j, RoutingConfig& c) {
  const std::string p = "routing";
  if (!r.object(j, p)) return;
  r.allowed(j, p, {"mode", "cost_mode", "tx_power_dbm", "beacon_period_s", "collection_window_ms",
                   "refresh_period_s", "discovery_timeout_s", "discovery_retries",
                   "calibration_smoothing"});
  r.choice(j, p, "mode", c.mode, routing::route_mode_from_string);
  r.choice(j, p, "cost_mode", c.cost_mode, cost_mode_from_string);
  r.array(j, p, "tx_power_dbm", c.tx_power_dbm);
  r.number(j, p, "beacon_period_s", c.beacon_period_s);
  r.number(j, p, "collection_window_ms", c.collection_window_ms);
  r.number(j, p, "refresh_period_s", c.refresh_period_s);
  r.number(j, p, "discovery_timeout_s", c.discovery_timeout_s);
  r.integer(j, p, "discovery_retries", c.discovery_retries);
  r.number(j, p, "calibration_smoothing", c.calibration_smoothing);
}

void read_mac(Reader& r, const json& j, MacSection& c) {
  const std::string p = "mac";
  if (!r.object(j, p)) return;
  r.allowed(j, p, {"cca_threshold_dbm", "backoff_initial_ms", "max_backoff_attempts", "arq_retries",
                   "rts_cts", "preamble_ms", "wake_ms", "data_ms", "ack_ms", "duty_mode", "radio"});
  auto& m = c.mac;
  r.number(j, p, "cca_threshold_dbm", m.cca_threshold_dbm);
  r.number(j, p, "backoff_initial_ms", m.backoff_initial_ms);
  r.integer(j, p, "max_backoff_attempts", m.max_backoff_attempts);
  r.integer(j, p, "arq_retries", m.arq_retries);
  r.boolean(j, p, "rts_cts", m.rts_cts);
  r.number(j, p, "preamble_ms", m.preamble_ms);
  r.number(j, p, "wake_ms", m.wake_ms);
  r.number(j, p, "data_ms", m.data_ms);
  r.number(j, p, "ack_ms", m.ack_ms);
  r.choice(j, p, "duty_mode", m.duty_mode, mac::duty_mode_from_string);
  if (j.contains("radio") && r.object(j["radio"], p + ".radio")) {
    const auto& rj = j["radio"];
    const std::string rp = p + ".radio";
    r.allowed(rj, rp, {"tx_ma", "rx_ma", "idle_ma", "sleep_ma", "voltage"});
    if (rj.contains("tx_ma") && r.object(rj["tx_ma"], rp + ".tx_ma")) {
      std::map<int, double> tx;
      for (auto it = rj["tx_ma"].begin(); it != rj["tx_ma"].end(); ++it) {
        const std::string kp = rp + ".tx_ma." + it.key();
        int dbm = 0;
        try {
          std::size_t used = 0;
          dbm = std::stoi(it.key(), &used);
          if (used != it.key().size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          r.fail(kp, "key must be an integer dBm value");
          continue;
        }
        if (!it.value().is_number()) {
          r.fail(kp, "expected a number");
          continue;
        }
        tx[dbm] = it.value().get<double>();
      }
      c.radio.tx_ma = std::move(tx);
    }
    r.number(rj, rp, "rx_ma", c.radio.rx_ma);
    r.number(rj, rp, "idle_ma", c.radio.idle_ma);
    r.number(rj, rp, "sleep_ma", c.radio.sleep_ma);
    r.number(rj, rp, "voltage", c.radio.voltage);
  }
}

void read_channel(Reader& r, const json& j, ChannelConfig& c) {
  const std::string p = "channel";
  if (!r.object(j, p)) return;
  r.allowed(j, p, {"path_loss_exponent", "reference_loss_db", "reference_distance_m",
                   "shadowing_sigma_db", "sensitivity_dbm", "full_delivery_margin_db",
                   "loss_at_zero_margin", "obstructions"});
  r.number(j, p, "path_loss_exponent", c.path_loss_exponent);
  r.number(j, p, "reference_loss_db", c.reference_loss_db);
  r.number(j, p, "reference_distance_m", c.reference_distance_m);
  r.number(j, p, "shadowing_sigma_db", c.shadowing_sigma_db);
  r.number(j, p, "sensitivity_dbm", c.sensitivity_dbm);
  r.number(j, p, "full_delivery_margin_db", c.full_delivery_margin_db);
  r.number(j, p, "loss_at_zero_margin", c.loss_at_zero_margin);
  if (!j.contains("obstructions")) return;
  const auto& arr = j["obstructions"];
  if (!arr.is_array()) {
    r.fail(p + ".obstructions", "expected an array");
    return;
  }
  c.obstructions.clear();
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string op = p + ".obstructions[" + std::to_string(i) + "]";
    if (!r.object(arr[i], op)) continue;
    r.allowed(arr[i], op, {"a", "b", "extra_loss_db"});
    Obstruction o;
    if (!arr[i].contains("a") || !arr[i].contains("b")) r.fail(op, "needs both 'a' and 'b'");
    r.integer(arr[i], op, "a", o.a);
    r.integer(arr[i], op, "b", o.b);
    r.number(arr[i], op, "extra_loss_db", o.extra_loss_db);
    c.obstructions.push_back(o);
  }
}

void read_traffic(Reader& r, const json& j, TrafficConfig& c) {
  const std::string p = "traffic";
  if (!r.object(j, p)) return;
  r.allowed(j, p, {"packet_interval_s", "payload_bytes", "queue_limit"});
  r.number(j, p, "packet_interval_s", c.packet_interval_s);
  r.integer(j, p, "payload_bytes", c.payload_bytes);
  r.integer(j, p, "queue_limit", c.queue_limit);
}

void read_synthetic(Reader& r, const json& j, const std::string& p, SyntheticTraceSpec& s) {
  if (!r.object(j, p)) return;
  r.allowed(j, p, {"amplitude_w", "period_slots", "daylight_fraction", "trend_per_day",
                   "switch_probability", "cloudy_attenuation", "seed"});
  r.number(j, p, "amplitude_w", s.amplitude_w);
  r.integer(j, p, "period_slots", s.period_slots);
  r.number(j, p, "daylight_fraction", s.daylight_fraction);
  r.number(j, p, "trend_per_day", s.trend_per_day);
  r.number(j, p, "switch_probability", s.switch_probability);
  r.number(j, p, "cloudy_attenuation", s.cloudy_attenuation);
  r.integer(j, p, "seed", s.seed);
}

void read_profiles(Reader& r, const json& j, std::vector<ProfileConfig>& out) {
  if (!j.is_array()) {
    r.fail("profiles", "expected an array");
    return;
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = "profiles[" + std::to_string(i) + "]";
    if (!r.object(j[i], p)) continue;
    r.allowed(j[i], p, {"name", "kind", "trace_file", "synthetic", "scale"});
    ProfileConfig pc;
    if (!j[i].contains("name")) r.fail(p + ".name", "required");
    r.string(j[i], p, "name", pc.name);
    r.choice(j[i], p, "kind", pc.kind, profile_kind_from_string);
    if (j[i].contains("trace_file")) {
      std::string f;
      r.string(j[i], p, "trace_file", f);
      pc.trace_file = f;
    }
    if (j[i].contains("synthetic")) {
      SyntheticTraceSpec s;
      read_synthetic(r, j[i]["synthetic"], p + ".synthetic", s);
      pc.synthetic = s;
    }
    r.number(j[i], p, "scale", pc.scale);
    out.push_back(std::move(pc));
  }
}

void read_nodes(Reader& r, const json& j, std::vector<NodeConfig>& out) {
  if (!j.is_array()) {
    r.fail("nodes", "expected an array");
    return;
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = "nodes[" + std::to_string(i) + "]";
    if (!r.object(j[i], p)) continue;
    r.allowed(j[i], p, {"id", "name", "role", "x", "y", "profile", "policies"});
    NodeConfig n;
    for (const char* req : {"id", "role", "profile"}) {
      if (!j[i].contains(req)) r.fail(p + "." + req, "required");
    }
    r.integer(j[i], p, "id", n.id);
    r.string(j[i], p, "name", n.name);
    r.choice(j[i], p, "role", n.role, role_from_string);
    r.number(j[i], p, "x", n.x);
    r.number(j[i], p, "y", n.y);
    r.string(j[i], p, "profile", n.profile);
    if (j[i].contains("policies")) {
      const auto& pj = j[i]["policies"];
      if (!pj.is_array()) {
        r.fail(p + ".policies", "expected an array");
      } else {
        for (std::size_t k = 0; k < pj.size(); ++k) {
          const std::string pp = p + ".policies[" + std::to_string(k) + "]";
          if (!r.object(pj[k], pp)) continue;
          r.allowed(pj[k], pp, {"id", "ops", "priority", "repeat"});
          PolicyConfig pc;
          r.string(pj[k], pp, "id", pc.id);
          r.integer(pj[k], pp, "priority", pc.priority);
          r.integer(pj[k], pp, "repeat", pc.repeat);
          if (pj[k].contains("ops")) {
            const auto& ops = pj[k]["ops"];
            if (!ops.is_array()) {
              r.fail(pp + ".ops", "expected an array of operation names");
            } else {
              for (std::size_t o = 0; o < ops.size(); ++o) {
                if (!ops[o].is_string()) {
                  r.fail(pp + ".ops[" + std::to_string(o) + "]", "expected a string");
                } else {
                  pc.ops.push_back(ops[o].get<std::string>());
                }
              }
            }
          }
          n.policies.push_back(std::move(pc));
        }
      }
    }
    out.push_back(std::move(n));
  }
}

void check(std::vector<SchemaIssue>& issues, bool ok, std::string path, std::string msg) {
  if (!ok) issues.push_back({std::move(path), std::move(msg)});
}

void semantic_issues(const ScenarioConfig& c, std::vector<SchemaIssue>& out) {
  check(out, c.slot_duration_s > 0.0, "slot_duration_s", "must be positive");
  check(out, c.slots >= 1, "slots", "must be at least 1");

  const auto& e = c.energy;
  check(out, e.capacity_uj > 0.0 && std::isfinite(e.capacity_uj), "energy.capacity_uj", "must be positive");
  check(out, 0.0 < e.thresholds[0] && e.thresholds[0] < e.thresholds[1] &&
                 e.thresholds[1] < e.thresholds[2] && e.thresholds[2] < 1.0,
        "energy.thresholds", "must be strictly ascending inside (0, 1)");
  check(out, e.floor_fraction >= 0.0 && e.floor_fraction < 1.0, "energy.floor_fraction", "must be in [0, 1)");
  check(out, e.initial_fraction >= 0.0 && e.initial_fraction <= 1.0, "energy.initial_fraction",
        "must be in [0, 1]");

  const auto& pr = c.predictor;
  check(out, pr.ewma_epsilon > 0.0 && pr.ewma_epsilon <= 1.0, "predictor.ewma_epsilon", "must be in (0, 1]");
  for (auto [name, v] : {std::pair{"epsilon", pr.hw.epsilon}, std::pair{"beta", pr.hw.beta},
                         std::pair{"gamma", pr.hw.gamma}}) {
    check(out, v >= 0.0 && v <= 1.0, std::string("predictor.hw.") + name, "must be in [0, 1]");
  }
  check(out, pr.horizon >= 1, "predictor.horizon", "must be at least 1");
  check(out, pr.virtual_window_slots >= 1, "predictor.virtual_window_slots", "must be at least 1");

  const auto& o = c.optimizer;
  check(out, o.duty_energy_uj > 0.0, "optimizer.duty_energy_uj", "must be positive");
  check(out, !o.duty_weight || *o.duty_weight >= 0.0, "optimizer.duty_weight", "must not be negative");
  for (std::size_t i = 0; i < 4; ++i) {
    const auto idx = "[" + std::to_string(i) + "]";
    check(out, o.reserve[i] >= 0.0 && o.reserve[i] <= 1.0, "optimizer.reserve" + idx, "must be in [0, 1]");
    check(out, o.residual_fraction[i] >= 0.0 && o.residual_fraction[i] <= 1.0,
          "optimizer.residual_fraction" + idx, "must be in [0, 1]");
    check(out, o.delta_cap[i] >= 0.0 && o.delta_cap[i] <= 1.0, "optimizer.delta_cap" + idx, "must be in [0, 1]");
  }
  check(out, o.delta_floor >= 0.0 && o.delta_floor <= 1.0, "optimizer.delta_floor", "must be in [0, 1]");
  check(out, o.backlog_capacity >= 1, "optimizer.backlog_capacity", "must be at least 1");

  const auto& rt = c.routing;
  const auto table = OperationCostTable::mote_defaults();
  for (std::size_t i = 0; i < 3; ++i) {
    const int dbm = rt.tx_power_dbm[i];
    const auto path = "routing.tx_power_dbm[" + std::to_string(i) + "]";
    check(out, table.transmit().count(dbm) != 0, path, "no transmit cost for " + std::to_string(dbm) + " dBm");
    check(out, c.mac.radio.tx_ma.count(dbm) != 0, path, "no radio current for " + std::to_string(dbm) + " dBm");
    if (i > 0) check(out, rt.tx_power_dbm[i - 1] < dbm, path, "powers must ascend from E1 to E3");
  }
  check(out, rt.beacon_period_s > 0.0, "routing.beacon_period_s", "must be positive");
  check(out, rt.collection_window_ms >= 0.0, "routing.collection_window_ms", "must not be negative");
  check(out, rt.refresh_period_s >= 0.0, "routing.refresh_period_s", "must not be negative");
  check(out, rt.discovery_timeout_s > 0.0, "routing.discovery_timeout_s", "must be positive");
  check(out, rt.discovery_retries >= 0, "routing.discovery_retries", "must not be negative");
  check(out, rt.calibration_smoothing > 0.0 && rt.calibration_smoothing <= 1.0,
        "routing.calibration_smoothing", "must be in (0, 1]");

  try {
    c.mac.mac.validate();
  } catch (const Error& err) {
    out.push_back({"mac", err.what()});
  }
  check(out, c.mac.radio.voltage > 0.0, "mac.radio.voltage", "must be positive");

  const auto& ch = c.channel;
  check(out, ch.path_loss_exponent > 0.0, "channel.path_loss_exponent", "must be positive");
  check(out, ch.reference_distance_m > 0.0, "channel.reference_distance_m", "must be positive");
  check(out, ch.shadowing_sigma_db >= 0.0, "channel.shadowing_sigma_db", "must not be negative");
  check(out, ch.full_delivery_margin_db > 0.0, "channel.full_delivery_margin_db", "must be positive");
  check(out, ch.loss_at_zero_margin >= 0.0 && ch.loss_at_zero_margin <= 1.0,
        "channel.loss_at_zero_margin", "must be in [0, 1]");

  check(out, c.traffic.packet_interval_s > 0.0, "traffic.packet_interval_s", "must be positive");
  check(out, c.traffic.payload_bytes > 0, "traffic.payload_bytes", "must be positive");

  std::set<std::string> profile_names;
  for (std::size_t i = 0; i < c.profiles.size(); ++i) {
    const auto& p = c.profiles[i];
    const auto path = "profiles[" + std::to_string(i) + "]";
    check(out, !p.name.empty() && p.name != "utility", path + ".name", "must be non-empty and not 'utility'");
    check(out, profile_names.insert(p.name).second, path + ".name", "duplicate profile '" + p.name + "'");
    check(out, p.trace_file.has_value() != p.synthetic.has_value(), path,
          "needs exactly one of 'trace_file' or 'synthetic'");
    check(out, p.scale >= 0.0 && std::isfinite(p.scale), path + ".scale", "must not be negative");
    if (p.synthetic) {
      const auto& s = *p.synthetic;
      check(out, s.amplitude_w >= 0.0, path + ".synthetic.amplitude_w", "must not be negative");
      check(out, s.period_slots >= 1, path + ".synthetic.period_slots", "must be at least 1");
      check(out, s.daylight_fraction > 0.0 && s.daylight_fraction <= 1.0,
            path + ".synthetic.daylight_fraction", "must be in (0, 1]");
      check(out, s.switch_probability >= 0.0 && s.switch_probability <= 1.0,
            path + ".synthetic.switch_probability", "must be in [0, 1]");
      check(out, s.cloudy_attenuation >= 0.0 && s.cloudy_attenuation <= 1.0,
            path + ".synthetic.cloudy_attenuation", "must be in [0, 1]");
    }
  }

  std::vector<std::string> sinks;
  std::set<std::uint32_t> ids;
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    const auto& n = c.nodes[i];
    const auto path = "nodes[" + std::to_string(i) + "]";
    check(out, ids.insert(n.id).second, path + ".id", "duplicate node id " + std::to_string(n.id));
    if (n.role == Role::Sink) sinks.push_back(path);
    const bool utility = n.profile == "utility";
    check(out, utility || profile_names.count(n.profile) != 0, path + ".profile",
          "profile '" + n.profile + "' is not defined");
    check(out, !utility || n.role == Role::Sink, path + ".profile", "only the sink may be utility powered");
    if (n.role != Role::Sink) {
      check(out, !n.policies.empty(), path + ".policies", "a harvesting node needs at least one policy");
    }
    for (std::size_t k = 0; k < n.policies.size(); ++k) {
      const auto& pc = n.policies[k];
      const auto pp = path + ".policies[" + std::to_string(k) + "]";
      check(out, !pc.id.empty(), pp + ".id", "required");
      check(out, !pc.ops.empty(), pp + ".ops", "a policy needs at least one operation");
      check(out, pc.repeat >= 1, pp + ".repeat", "must be at least 1");
      for (std::size_t o = 0; o < pc.ops.size(); ++o) {
        try {
          operation_from_string(pc.ops[o]);
        } catch (const Error& err) {
          out.push_back({pp + ".ops[" + std::to_string(o) + "]", err.what()});
        }
      }
    }
  }
  if (sinks.empty()) {
    out.push_back({"nodes", "exactly one sink is required, found none"});
  } else if (sinks.size() > 1) {
    std::string names;
    for (const auto& s : sinks) names += (names.empty() ? "" : ", ") + s;
    for (const auto& s : sinks) out.push_back({s + ".role", "exactly one sink is allowed; sinks at " + names});
  }
  for (std::size_t i = 0; i < ch.obstructions.size(); ++i) {
    const auto& ob = ch.obstructions[i];
    const auto path = "channel.obstructions[" + std::to_string(i) + "]";
    check(out, ids.count(ob.a) && ids.count(ob.b), path, "refers to an unknown node");
    check(out, ob.a != ob.b, path, "a and b must differ");
    check(out, ob.extra_loss_db >= 0.0, path + ".extra_loss_db", "must not be negative");
  }
}

json synthetic_json(const SyntheticTraceSpec& s) {
  return {{"amplitude_w", s.amplitude_w},
          {"period_slots", s.period_slots},
          {"daylight_fraction", s.daylight_fraction},
          {"trend_per_day", s.trend_per_day},
          {"switch_probability", s.switch_probability},
          {"cloudy_attenuation", s.cloudy_attenuation},
          {"seed", s.seed}};
}

}  // namespace

SchemaError::SchemaError(std::vector<SchemaIssue> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::Source:
      return "source";
    case Role::Relay:
      return "relay";
    case Role::Sink:
      return "sink";
  }
  return "?";
}

const NodeConfig& ScenarioConfig::sink() const {
  for (const auto& n : nodes) {
    if (n.role == Role::Sink) return n;
  }
  throw InvalidArgument("scenario has no sink");
}

const ProfileConfig* ScenarioConfig::profile(std::string_view name) const {
  for (const auto& p : profiles) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

ScenarioConfig parse_scenario(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError({{"", std::string("not valid JSON: ") + e.what()}});
  }
  Reader r;
  ScenarioConfig c;
  if (!r.object(j, "")) throw SchemaError(r.issues);
  r.allowed(j, "", {"name", "slot_duration_s", "slots", "seed", "nodes", "profiles", "energy",
                    "predictor", "optimizer", "routing", "mac", "channel", "traffic"});
  r.string(j, "", "name", c.name);
  r.number(j, "", "slot_duration_s", c.slot_duration_s);
  r.integer(j, "", "slots", c.slots);
  r.integer(j, "", "seed", c.seed);
  if (j.contains("energy")) read_energy(r, j["energy"], c.energy);
  if (j.contains("predictor")) read_predictor(r, j["predictor"], c.predictor);
  if (j.contains("optimizer")) read_optimizer(r, j["optimizer"], c.optimizer);
  if (j.contains("routing")) read_routing(r, j["routing"], c.routing);
  if (j.contains("mac")) read_mac(r, j["mac"], c.mac);
  if (j.contains("channel")) read_channel(r, j["channel"], c.channel);
  if (j.contains("traffic")) read_traffic(r, j["traffic"], c.traffic);
  if (j.contains("profiles")) read_profiles(r, j["profiles"], c.profiles);
  if (j.contains("nodes")) {
    read_nodes(r, j["nodes"], c.nodes);
  } else {
    r.fail("nodes", "required");
  }
  semantic_issues(c, r.issues);
  if (!r.issues.empty()) throw SchemaError(r.issues);
  return c;
}

void validate(const ScenarioConfig& cfg) {
  std::vector<SchemaIssue> issues;
  semantic_issues(cfg, issues);
  if (!issues.empty()) throw SchemaError(issues);
}

std::string serialize_scenario(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["slot_duration_s"] = c.slot_duration_s;
  j["slots"] = c.slots;
  j["seed"] = c.seed;
  j["energy"] = {{"capacity_uj", c.energy.capacity_uj},
                 {"thresholds", c.energy.thresholds},
                 {"floor_fraction", c.energy.floor_fraction},
                 {"initial_fraction", c.energy.initial_fraction}};
  j["predictor"] = {{"model", to_string(c.predictor.model)},
                    {"ewma_epsilon", c.predictor.ewma_epsilon},
                    {"hw",
                     {{"epsilon", c.predictor.hw.epsilon},
                      {"beta", c.predictor.hw.beta},
                      {"gamma", c.predictor.hw.gamma}}},
                    {"horizon", c.predictor.horizon},
                    {"virtual_window_slots", c.predictor.virtual_window_slots}};
  j["optimizer"] = {{"duty_energy_uj", c.optimizer.duty_energy_uj},
                    {"duty_weight", c.optimizer.duty_weight ? json(*c.optimizer.duty_weight) : json(nullptr)},
                    {"reserve", c.optimizer.reserve},
                    {"residual_fraction", c.optimizer.residual_fraction},
                    {"delta_cap", c.optimizer.delta_cap},
                    {"delta_floor", c.optimizer.delta_floor},
                    {"backlog_capacity", c.optimizer.backlog_capacity}};
  j["routing"] = {{"mode", routing::to_string(c.routing.mode)},
                  {"cost_mode", to_string(c.routing.cost_mode)},
                  {"tx_power_dbm", c.routing.tx_power_dbm},
                  {"beacon_period_s", c.routing.beacon_period_s},
                  {"collection_window_ms", c.routing.collection_window_ms},
                  {"refresh_period_s", c.routing.refresh_period_s},
                  {"discovery_timeout_s", c.routing.discovery_timeout_s},
                  {"discovery_retries", c.routing.discovery_retries},
                  {"calibration_smoothing", c.routing.calibration_smoothing}};
  json tx = json::object();
  for (const auto& [dbm, ma] : c.mac.radio.tx_ma) tx[std::to_string(dbm)] = ma;
  const auto& m = c.mac.mac;
  j["mac"] = {{"cca_threshold_dbm", m.cca_threshold_dbm},
              {"backoff_initial_ms", m.backoff_initial_ms},
              {"max_backoff_attempts", m.max_backoff_attempts},
              {"arq_retries", m.arq_retries},
              {"rts_cts", m.rts_cts},
              {"preamble_ms", m.preamble_ms},
              {"wake_ms", m.wake_ms},
              {"data_ms", m.data_ms},
              {"ack_ms", m.ack_ms},
              {"duty_mode", mac::to_string(m.duty_mode)},
              {"radio",
               {{"tx_ma", tx},
                {"rx_ma", c.mac.radio.rx_ma},
                {"idle_ma", c.mac.radio.idle_ma},
                {"sleep_ma", c.mac.radio.sleep_ma},
                {"voltage", c.mac.radio.voltage}}}};
  json obs = json::array();
  for (const auto& o : c.channel.obstructions) {
    obs.push_back({{"a", o.a}, {"b", o.b}, {"extra_loss_db", o.extra_loss_db}});
  }
  j["channel"] = {{"path_loss_exponent", c.channel.path_loss_exponent},
                  {"reference_loss_db", c.channel.reference_loss_db},
                  {"reference_distance_m", c.channel.reference_distance_m},
                  {"shadowing_sigma_db", c.channel.shadowing_sigma_db},
                  {"sensitivity_dbm", c.channel.sensitivity_dbm},
                  {"full_delivery_margin_db", c.channel.full_delivery_margin_db},
                  {"loss_at_zero_margin", c.channel.loss_at_zero_margin},
                  {"obstructions", obs}};
  j["traffic"] = {{"packet_interval_s", c.traffic.packet_interval_s},
                  {"payload_bytes", c.traffic.payload_bytes},
                  {"queue_limit", c.traffic.queue_limit}};
  json profiles = json::array();
  for (const auto& p : c.profiles) {
    json pj = {{"name", p.name}, {"kind", to_string(p.kind)}, {"scale", p.scale}};
    if (p.trace_file) pj["trace_file"] = *p.trace_file;
    if (p.synthetic) pj["synthetic"] = synthetic_json(*p.synthetic);
    profiles.push_back(pj);
  }
  j["profiles"] = profiles;
  json nodes = json::array();
  for (const auto& n : c.nodes) {
    json pols = json::array();
    for (const auto& p : n.policies) {
      pols.push_back({{"id", p.id}, {"ops", p.ops}, {"priority", p.priority}, {"repeat", p.repeat}});
    }
    nodes.push_back({{"id", n.id},
                     {"name", n.name},
                     {"role", to_string(n.role)},
                     {"x", n.x},
                     {"y", n.y},
                     {"profile", n.profile},
                     {"policies", pols}});
  }
  j["nodes"] = nodes;
  return j.dump(2) + "\n";
}

std::uint64_t config_hash(const ScenarioConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_scenario(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return s;
}

HarvestTrace load_trace(std::string_view csv, ProfileKind kind, double scale) {
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::vector<HarvestSample> samples;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto where = "line " + std::to_string(lineno) + ": ";
    if (!header) {
      if (line != "slot,power_watts") {
        throw ParseError(where + "expected header 'slot,power_watts', got '" + line + "'");
      }
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw ParseError(where + "expected two comma-separated fields");
    }
    const std::string a = trim(line.substr(0, comma));
    const std::string b = trim(line.substr(comma + 1));
    std::size_t slot = 0;
    double power = 0.0;
    try {
      std::size_t used = 0;
      if (!a.empty() && a[0] == '-') throw std::invalid_argument("negative");
      slot = std::stoull(a, &used);
      if (used != a.size()) throw std::invalid_argument("trailing");
      power = std::stod(b, &used);
      if (used != b.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(where + "cannot read '" + line + "' as slot,power");
    }
    if (!std::isfinite(power)) throw ParseError(where + "power is not finite");
    if (power < 0.0) throw NegativePower(where + "power " + b + " W is negative");
    if (!samples.empty() && slot <= samples.back().slot) {
      throw ParseError(where + "slot " + a + " does not increase");
    }
    samples.push_back({slot, power});
  }
  if (!header) throw ParseError("line " + std::to_string(lineno) + ": missing header");
  if (samples.empty()) throw ParseError("line " + std::to_string(lineno) + ": no data rows");
  return HarvestTrace(std::move(samples), kind, scale);
}

HarvestTrace load_trace_file(const std::string& path, ProfileKind kind, double scale) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open trace file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return load_trace(ss.str(), kind, scale);
  } catch (const NegativePower& e) {
    throw NegativePower(path + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::vector<bool> synth_day_types(const SyntheticTraceSpec& spec, std::size_t days) {
  Rng rng(spec.seed);
  std::vector<bool> cloudy(days);
  for (std::size_t d = 0; d < days; ++d) cloudy[d] = rng.bernoulli(spec.switch_probability);
  return cloudy;
}

HarvestTrace synth_trace(const SyntheticTraceSpec& spec, std::size_t n_slots, ProfileKind kind,
                         double scale) {
  if (n_slots == 0) throw InvalidArgument("synthetic trace needs at least one slot");
  if (spec.period_slots == 0) throw InvalidArgument("period must be at least one slot");
  const std::size_t days = (n_slots + spec.period_slots - 1) / spec.period_slots;
  const auto cloudy = synth_day_types(spec, days);
  const double lit = std::max(1.0, std::round(spec.daylight_fraction * static_cast<double>(spec.period_slots)));
  std::vector<double> p(n_slots, 0.0);
  for (std::size_t s = 0; s < n_slots; ++s) {
    const std::size_t day = s / spec.period_slots;
    const double pos = static_cast<double>(s % spec.period_slots);
    if (pos >= lit) continue;
    const double arc = std::sin(std::numbers::pi * (pos + 0.5) / lit);
    const double growth = 1.0 + spec.trend_per_day * static_cast<double>(day);
    const double att = cloudy[day] ? spec.cloudy_attenuation : 1.0;
    p[s] = std::max(0.0, spec.amplitude_w * arc * att * growth);
  }
  return HarvestTrace::dense(p, kind, scale);
}

}  // namespace zen::scenario
