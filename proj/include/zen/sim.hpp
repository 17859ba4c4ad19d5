#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "zen/app.hpp"
#include "zen/energy.hpp"
#include "zen/forecast.hpp"
#include "zen/mac.hpp"
#include "zen/rng.hpp"
#include "zen/routing.hpp"
#include "zen/scenario.hpp"

namespace zen::sim {

using routing::NodeId;

/// Log-distance path loss with an optional log-normal shadowing term and a linear
/// loss curve near the sensitivity limit.
class Channel {
 public:
  explicit Channel(scenario::ChannelConfig cfg = {});

  /// tx - L0 - 10 n log10(d / d0). Throws InvalidArgument unless d > 0.
  double rssi_at(double tx_dbm, double distance_m) const;
  /// Same, plus a shadowing draw when sigma > 0.
  double rssi_at(double tx_dbm, double distance_m, Rng& rng) const;
  double loss_probability(double rssi_dbm) const;
  bool deliver(double rssi_dbm, Rng& rng) const;

  const scenario::ChannelConfig& config() const { return cfg_; }

 private:
  scenario::ChannelConfig cfg_;
};

/// Time-ordered actions; equal times run in scheduling order.
class EventQueue {
 public:
  using Action = std::function<void()>;

  /// Throws InvalidArgument when t lies before the event currently running.
  void schedule(double t_ms, Action a);
  /// Runs every event with time < t_end (including ones scheduled meanwhile).
  void run_until(double t_end_ms);
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  double now() const { return now_; }

 private:
  struct Item {
    double t;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
  };
  std::priority_queue<Item, std::vector<Item>, Later> heap_;
  double now_ = 0.0;
  std::uint64_t seq_ = 0;
};

struct LedgerRow {
  std::size_t slot = 0;
  NodeId node = 0;
  double stored_begin = 0.0;
  double harvested = 0.0;
  double wasted = 0.0;
  double consumed = 0.0;
  double stored_end = 0.0;

  /// harvested - wasted - consumed - (end - begin)
  double imbalance() const { return harvested - wasted - consumed - (stored_end - stored_begin); }
};

/// One withdrawal. `op` is set for operation-table charges; radio and duty-cycle
/// charges leave it empty.
struct ChargeRecord {
  std::uint32_t slot = 0;
  NodeId node = 0;
  std::optional<OperationKind> op;
  int tx_dbm = 0;
  double microjoules = 0.0;
  std::string tag;
};

struct ForecastSample {
  std::size_t slot = 0;
  NodeId node = 0;
  double predicted = 0.0;
  double actual = 0.0;
};

struct Metrics {
  std::size_t slots = 0;
  std::size_t generated = 0;
  std::size_t delivered = 0;
  std::size_t lost_no_route = 0;
  std::size_t lost_link = 0;
  std::size_t lost_relay = 0;
  std::size_t lost_queue = 0;
  std::size_t floods = 0;
  std::vector<app::SlotReport> slot_reports;
  std::vector<LedgerRow> ledger;
  std::vector<ChargeRecord> charges;
  std::vector<routing::RouteChange> route_log;
  std::vector<mac::MacEvent> mac_trace;
  std::vector<ForecastSample> forecasts;
  /// Slots in which each relay forwarded at least one data packet.
  std::map<NodeId, std::size_t> forwarding_slots;
  std::map<NodeId, std::size_t> forwarded;
  /// Mean duty factor per node over all slots.
  std::map<NodeId, double> mean_duty;
  std::size_t floor_breaches = 0;

  double pdr() const;
  double max_relative_imbalance() const;
};

struct SimOptions {
  bool record_mac_trace = false;
  bool record_charges = true;
  /// Directory that relative trace paths are resolved against.
  std::string base_dir = ".";
};

/// A whole network: nodes, channel, clock and event queue. Deterministic for a given
/// configuration and seed.
class World {
 public:
  explicit World(const scenario::ScenarioConfig& cfg, SimOptions opts = {});

  /// Energy/forecast/plan phase for every node, then the slot's radio events, then
  /// settlement of node-own operations.
  void step_slot();
  /// Runs n more slots and returns the metrics so far. Throws InvalidArgument for n = 0.
  const Metrics& run(std::size_t n_slots);

  const Metrics& metrics() const { return metrics_; }
  std::size_t slot() const { return slot_; }
  const scenario::ScenarioConfig& config() const { return cfg_; }
  const Channel& channel() const { return channel_; }

  EnergyAmount stored(NodeId id) const;
  EnergyAmount floor() const { return floor_; }
  const routing::RouteEntry* route(NodeId id, NodeId dest) const;

 private:
  struct Packet {
    std::uint64_t id = 0;
    double created_ms = 0.0;
  };
  enum class FrameKind { Data, Rrep };
  struct Frame {
    FrameKind kind = FrameKind::Data;
    Packet packet;
    routing::Rrep rrep;
  };
  struct SendJob {
    NodeId to = 0;
    Frame frame;
  };
  struct Heard {
    EnergyLevel level = EnergyLevel::E1;
    double at_ms = 0.0;
  };
  struct Node {
    scenario::NodeConfig cfg;
    bool utility = false;
    HarvestTrace trace;
    std::size_t trace_len = 0;
    EnergyStore store{EnergyAmount(1.0)};
    forecast::EnergyPredictor predictor{forecast::Model::Ewma, 1, 0.5, {}};
    std::vector<app::Policy> policies;
    app::Backlog backlog;
    routing::RouterState router{0};
    Rng rng;
    double phase = 0.0;
    std::optional<double> last_forecast;

    app::EnergyContext ctx;
    app::ExecutionPlan plan;
    mac::DutySchedule schedule;
    double origin_ms = 0.0;
    int tx_dbm = 0;
    int forward_credits = 0;
    double stored_begin = 0.0;
    double harvested = 0.0;
    double wasted = 0.0;
    double consumed = 0.0;
    std::size_t ops_network = 0;
    bool forwarded = false;

    std::map<NodeId, Heard> heard;
    bool sending = false;
    std::deque<SendJob> pending;

    std::deque<Packet> queue;
    bool discovering = false;
    std::uint32_t seq = 0;
    int discovery_attempts = 0;
  };
  struct Flood {
    std::uint32_t seq = 0;
    bool decided = false;
    double installed_cost = 0.0;
    std::vector<routing::Candidate> candidates;
  };
  struct Airtime {
    NodeId node;
    double begin;
    double end;
    int tx_dbm;
  };

  Node& node(NodeId id);
  const Node& node(NodeId id) const;
  bool radio_on(const Node& n) const;
  double distance(const Node& a, const Node& b) const;
  double link_rssi(const Node& from, const Node& to, int tx_dbm) const;
  bool can_afford(const Node& n, double uj) const;
  void charge(Node& n, double uj, std::optional<OperationKind> op, int tx_dbm, const char* tag);
  double assumed_sleep(const Node& sender, NodeId receiver) const;
  double train_energy(double sleep_ms, int tx_dbm) const;
  void observe(Node& n, NodeId from, double rssi, double t_ms);
  std::vector<EnergyLevel> active_neighbor_levels(const Node& n, double t_ms) const;
  bool channel_busy(NodeId listener, double t_ms) const;

  void plan_node(Node& n, double slot_start_ms);
  void settle_node(Node& n);
  void schedule_slot_events(double slot_start_ms, double slot_end_ms);

  void generate(Node& src, double t_ms);
  void send_data(Node& src, const Packet& p, double t_ms);
  void unicast(Node& n, NodeId to, Frame f, double t_ms);
  void start_next(Node& n, double t_ms);
  bool accept(Node& to, const Node& from, const Frame& f);
  void receive(Node& to, NodeId from, const Frame& f, double rssi, double t_ms);
  void send_failed(Node& n, NodeId to, const Frame& f, double t_ms);

  void start_discovery(Node& src, double t_ms, bool refresh);
  void discovery_timeout(NodeId src, std::uint32_t seq, double t_ms);
  void broadcast_rreq(Node& n, const routing::Rreq& r, double t_ms);
  void handle_rreq(Node& n, const routing::Rreq& r, double rssi, double t_ms);
  void sink_decide(NodeId origin, std::uint32_t seq, double t_ms);
  void send_rrep(const routing::Rrep& rep, double t_ms);
  void beacon(Node& n, double t_ms);
  void log_route(double t_ms, const Node& n, const routing::RouteEntry& e, const char* reason);

  scenario::ScenarioConfig cfg_;
  SimOptions opts_;
  Channel channel_;
  OperationCostTable table_;
  app::BudgetConfig budget_cfg_;
  app::PlanConfig plan_cfg_;
  routing::TxPowerMap power_map_;
  EnergyAmount floor_;
  std::map<NodeId, Node> nodes_;
  NodeId sink_id_ = 0;
  EventQueue events_;
  Rng channel_rng_;
  std::vector<Airtime> airtime_;
  routing::SinkState sink_state_;
  std::map<NodeId, Flood> floods_;
  std::set<std::uint64_t> delivered_ids_;
  std::uint64_t next_packet_ = 0;
  std::size_t slot_ = 0;
  Metrics metrics_;
  std::map<NodeId, double> duty_sum_;
};

/// Builds a world and runs it for n slots.
Metrics simulate(const scenario::ScenarioConfig& cfg, std::size_t n_slots, SimOptions opts = {});

/// PDR, loss breakdown, energy totals, seed and the echoed configuration.
std::string summary_json(const Metrics& m, const scenario::ScenarioConfig& cfg);

void write_slot_reports(std::ostream& os, const Metrics& m);
void write_ledger(std::ostream& os, const Metrics& m);
void write_route_log(std::ostream& os, const Metrics& m);
void write_mac_trace(std::ostream& os, const Metrics& m);
void write_forecasts(std::ostream& os, const Metrics& m);

}  // namespace zen::sim
