#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zen/energy.hpp"
#include "zen/forecast.hpp"
#include "zen/mac.hpp"
#include "zen/routing.hpp"

namespace zen::scenario {

struct SchemaIssue {
  std::string path;
  std::string message;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(std::vector<SchemaIssue> issues);
  const std::vector<SchemaIssue>& issues() const { return issues_; }

 private:
  std::vector<SchemaIssue> issues_;
};

enum class Role { Source, Relay, Sink };
std::string_view to_string(Role r);

struct SyntheticTraceSpec {
  /// Peak power on a clear day (W, before the profile scale).
  double amplitude_w = 0.01;
  std::size_t period_slots = 96;
  /// Fraction of the period with sunlight; the rest is dark.
  double daylight_fraction = 0.5;
  /// Relative growth per period, e.g. 0.01 = +1% per day.
  double trend_per_day = 0.0;
  /// Chance that any given day is cloudy (days are drawn independently).
  double switch_probability = 0.0;
  double cloudy_attenuation = 0.35;
  std::uint64_t seed = 1;
  bool operator==(const SyntheticTraceSpec&) const = default;
};

struct ProfileConfig {
  std::string name;
  ProfileKind kind = ProfileKind::Synthetic;
  /// Either a CSV trace or a synthetic specification.
  std::optional<std::string> trace_file;
  std::optional<SyntheticTraceSpec> synthetic;
  double scale = 1.0;
  bool operator==(const ProfileConfig&) const = default;
};

struct PolicyConfig {
  std::string id;
  std::vector<std::string> ops;
  int priority = 0;
  int repeat = 1;
  bool operator==(const PolicyConfig&) const = default;
};

struct NodeConfig {
  std::uint32_t id = 0;
  std::string name;
  Role role = Role::Relay;
  double x = 0.0;
  double y = 0.0;
  /// Profile name; "utility" for a mains-powered node.
  std::string profile;
  std::vector<PolicyConfig> policies;
  bool operator==(const NodeConfig&) const = default;
};

struct EnergyConfig {
  double capacity_uj = 100000.0;
  std::array<double, 3> thresholds{0.10, 0.40, 0.70};
  double floor_fraction = 0.10;
  double initial_fraction = 0.5;
  bool operator==(const EnergyConfig&) const = default;
};

struct PredictorConfig {
  forecast::Model model = forecast::Model::HoltWinters;
  double ewma_epsilon = 0.5;
  forecast::HwParams hw;
  std::size_t horizon = 2;
  /// Forecasts are per slot; the virtual level classifies the forecast harvest over
  /// this many slots against the store capacity.
  std::size_t virtual_window_slots = 12;
  bool operator==(const PredictorConfig&) const = default;
};

struct OptimizerConfig {
  double duty_energy_uj = 10000.0;
  std::optional<double> duty_weight;
  std::array<double, 4> reserve{0.40, 0.25, 0.10, 0.0};
  std::array<double, 4> residual_fraction{0.5, 0.3, 0.1, 0.0};
  std::array<double, 4> delta_cap{0.0, 0.05, 0.15, 0.25};
  double delta_floor = 0.05;
  std::size_t backlog_capacity = 64;
  bool operator==(const OptimizerConfig&) const = default;
};

struct RoutingConfig {
  routing::RouteMode mode = routing::RouteMode::Modified;
  routing::CostMode cost_mode = routing::CostMode::Magnitude;
  std::array<int, 3> tx_power_dbm{-10, -5, 0};
  double beacon_period_s = 30.0;
  double collection_window_ms = 200.0;
  /// Modified mode refloods this often to pick up changed energy levels; 0 disables.
  double refresh_period_s = 30.0;
  double discovery_timeout_s = 1.0;
  int discovery_retries = 2;
  double calibration_smoothing = 0.2;
  bool operator==(const RoutingConfig&) const = default;
};

struct Obstruction {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double extra_loss_db = 40.0;
  bool operator==(const Obstruction&) const = default;
};

struct ChannelConfig {
  double path_loss_exponent = 2.7;
  double reference_loss_db = 65.0;
  double reference_distance_m = 8.0;
  double shadowing_sigma_db = 0.0;
  double sensitivity_dbm = -95.0;
  double full_delivery_margin_db = 10.0;
  double loss_at_zero_margin = 0.5;
  std::vector<Obstruction> obstructions;
  bool operator==(const ChannelConfig&) const = default;
};

struct TrafficConfig {
  double packet_interval_s = 2.0;
  int payload_bytes = 22;
  std::size_t queue_limit = 8;
  bool operator==(const TrafficConfig&) const = default;
};

struct MacSection {
  mac::MacConfig mac;
  mac::RadioEnergyModel radio;
  bool operator==(const MacSection&) const = default;
};

struct ScenarioConfig {
  std::string name = "scenario";
  double slot_duration_s = 10.0;
  std::size_t slots = 96;
  std::uint64_t seed = 1;
  std::vector<NodeConfig> nodes;
  std::vector<ProfileConfig> profiles;
  EnergyConfig energy;
  PredictorConfig predictor;
  OptimizerConfig optimizer;
  RoutingConfig routing;
  MacSection mac;
  ChannelConfig channel;
  TrafficConfig traffic;
  bool operator==(const ScenarioConfig&) const = default;

  const NodeConfig& sink() const;
  const ProfileConfig* profile(std::string_view name) const;
};

/// Parses JSON text. Every schema violation is collected before SchemaError is thrown.
ScenarioConfig parse_scenario(std::string_view text);
std::string serialize_scenario(const ScenarioConfig& cfg);
/// Throws SchemaError listing every violation.
void validate(const ScenarioConfig& cfg);

/// FNV-1a over the serialized form.
std::uint64_t config_hash(const ScenarioConfig& cfg);
std::string hash_hex(std::uint64_t h);

/// CSV with header `slot,power_watts`. Throws ParseError (with the line number) and
/// NegativePower.
HarvestTrace load_trace(std::string_view csv, ProfileKind kind, double scale = 1.0);
HarvestTrace load_trace_file(const std::string& path, ProfileKind kind, double scale = 1.0);

/// Half-sine daylight arc x day-type attenuation x (1 + trend)^day.
HarvestTrace synth_trace(const SyntheticTraceSpec& spec, std::size_t n_slots,
                         ProfileKind kind = ProfileKind::Synthetic, double scale = 1.0);
/// The cloudy/sunny flag of each day used by synth_trace.
std::vector<bool> synth_day_types(const SyntheticTraceSpec& spec, std::size_t days);

}  // namespace zen::scenario
