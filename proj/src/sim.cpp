#include "zen/sim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <ostream>

#include <json.hpp>

namespace zen::sim {

Channel::Channel(scenario::ChannelConfig cfg) : cfg_(std::move(cfg)) {}

double Channel::rssi_at(double tx_dbm, double distance_m) const {
  if (!(distance_m > 0.0)) throw InvalidArgument("distance must be positive");
  return tx_dbm - cfg_.reference_loss_db -
         10.0 * cfg_.path_loss_exponent * std::log10(distance_m / cfg_.reference_distance_m);
}

double Channel::rssi_at(double tx_dbm, double distance_m, Rng& rng) const {
  const double mean = rssi_at(tx_dbm, distance_m);
  return cfg_.shadowing_sigma_db > 0.0 ? rng.normal(mean, cfg_.shadowing_sigma_db) : mean;
}

double Channel::loss_probability(double rssi_dbm) const {
  const double margin = rssi_dbm - cfg_.sensitivity_dbm;
  if (margin < 0.0) return 1.0;
  if (margin >= cfg_.full_delivery_margin_db) return 0.0;
  return cfg_.loss_at_zero_margin * (1.0 - margin / cfg_.full_delivery_margin_db);
}

bool Channel::deliver(double rssi_dbm, Rng& rng) const {
  const double p = loss_probability(rssi_dbm);
  if (p >= 1.0) return false;
  if (p <= 0.0) return true;
  return !rng.bernoulli(p);
}

void EventQueue::schedule(double t_ms, Action a) {
  if (!std::isfinite(t_ms) || t_ms < now_ - 1e-9) {
    throw InvalidArgument("event scheduled in the past: " + std::to_string(t_ms) + " < " +
                          std::to_string(now_));
  }
  heap_.push({std::max(t_ms, now_), seq_++, std::move(a)});
}

void EventQueue::run_until(double t_end_ms) {
  while (!heap_.empty() && heap_.top().t < t_end_ms) {
    Item it = heap_.top();
    heap_.pop();
    now_ = it.t;
    it.action();
  }
  now_ = std::max(now_, t_end_ms);
}

double Metrics::pdr() const {
  return generated == 0 ? 0.0 : static_cast<double>(delivered) / static_cast<double>(generated);
}

double Metrics::max_relative_imbalance() const {
  double worst = 0.0;
  for (const auto& r : ledger) {
    const double scale = std::max({1.0, r.stored_begin, r.harvested, r.consumed});
    worst = std::max(worst, std::abs(r.imbalance()) / scale);
  }
  return worst;
}

namespace {

constexpr double kProcessingMs = 0.5;

std::size_t level_index(EnergyLevel l) { return static_cast<std::size_t>(l); }

app::Policy to_policy(const scenario::PolicyConfig& pc) {
  app::Policy p;
  p.id = pc.id;
  p.priority = pc.priority;
  p.repeat = pc.repeat;
  for (const auto& name : pc.ops) p.ops.push_back(app::Operation::of(operation_from_string(name)));
  p.validate();
  return p;
}

std::size_t count_kind(const std::vector<app::PlannedOp>& ops, OperationKind k) {
  return static_cast<std::size_t>(
      std::count_if(ops.begin(), ops.end(), [k](const app::PlannedOp& p) { return p.op.kind == k; }));
}

}  // namespace

World::World(const scenario::ScenarioConfig& cfg, SimOptions opts)
    : cfg_(cfg),
      opts_(std::move(opts)),
      channel_(cfg.channel),
      table_(OperationCostTable::mote_defaults()),
      floor_(EnergyAmount(cfg.energy.capacity_uj * cfg.energy.floor_fraction)) {
  scenario::validate(cfg_);
  cfg_.mac.mac.validate();

  budget_cfg_.reserve = cfg_.optimizer.reserve;
  budget_cfg_.floor = floor_;
  plan_cfg_.duty_energy = EnergyAmount(cfg_.optimizer.duty_energy_uj);
  plan_cfg_.duty_weight = cfg_.optimizer.duty_weight;
  plan_cfg_.residual_fraction = cfg_.optimizer.residual_fraction;
  plan_cfg_.delta_cap = cfg_.optimizer.delta_cap;
  plan_cfg_.delta_floor = cfg_.optimizer.delta_floor;
  power_map_.dbm = cfg_.routing.tx_power_dbm;

  Rng root(cfg_.seed);
  channel_rng_ = root.split(0xC4A77E1ULL);
  const LevelThresholds thresholds(cfg_.energy.thresholds[0], cfg_.energy.thresholds[1],
                                   cfg_.energy.thresholds[2]);
  const EnergyAmount capacity(cfg_.energy.capacity_uj);

  for (const auto& nc : cfg_.nodes) {
    Node n;
    n.cfg = nc;
    n.router = routing::RouterState(nc.id);
    n.rng = root.split(nc.id + 1);
    n.phase = n.rng.uniform();
    n.backlog = app::Backlog(cfg_.optimizer.backlog_capacity);
    n.utility = nc.role == scenario::Role::Sink && nc.profile == "utility";
    std::size_t period = 96;
    if (!n.utility) {
      const auto* prof = cfg_.profile(nc.profile);
      if (prof->trace_file) {
        std::filesystem::path p(*prof->trace_file);
        if (p.is_relative()) p = std::filesystem::path(opts_.base_dir) / p;
        n.trace = scenario::load_trace_file(p.string(), prof->kind, prof->scale);
      } else {
        auto spec = prof->synthetic.value_or(scenario::SyntheticTraceSpec{});
        // the run seed varies the weather; the profile seed keeps profiles apart
        spec.seed += cfg_.seed * 0x9E3779B97F4A7C15ULL;
        period = spec.period_slots;
        n.trace = scenario::synth_trace(spec, std::max<std::size_t>(cfg_.slots, 1), prof->kind,
                                        prof->scale);
      }
      n.trace_len = n.trace.samples().back().slot + 1;
      n.store = EnergyStore(capacity, capacity * cfg_.energy.initial_fraction, thresholds);
      for (const auto& pc : nc.policies) n.policies.push_back(to_policy(pc));
    } else {
      n.store = EnergyStore(capacity, capacity, thresholds);
      n.schedule = mac::schedule_from_delta(1.0, cfg_.mac.mac);
      n.tx_dbm = power_map_.reference_dbm();
      sink_id_ = nc.id;
    }
    if (nc.role == scenario::Role::Sink) sink_id_ = nc.id;
    n.predictor = forecast::EnergyPredictor(cfg_.predictor.model, period, cfg_.predictor.ewma_epsilon,
                                            cfg_.predictor.hw);
    nodes_.emplace(nc.id, std::move(n));
  }
}

World::Node& World::node(NodeId id) { return nodes_.at(id); }
const World::Node& World::node(NodeId id) const { return nodes_.at(id); }

EnergyAmount World::stored(NodeId id) const { return node(id).store.stored(); }

const routing::RouteEntry* World::route(NodeId id, NodeId dest) const {
  return node(id).router.route(dest);
}

bool World::radio_on(const Node& n) const { return n.utility || !n.schedule.radio_off; }

double World::distance(const Node& a, const Node& b) const {
  return std::hypot(a.cfg.x - b.cfg.x, a.cfg.y - b.cfg.y);
}

double World::link_rssi(const Node& from, const Node& to, int tx_dbm) const {
  double r = channel_.rssi_at(tx_dbm, std::max(distance(from, to), 1e-3));
  for (const auto& o : cfg_.channel.obstructions) {
    if ((o.a == from.cfg.id && o.b == to.cfg.id) || (o.b == from.cfg.id && o.a == to.cfg.id)) {
      r -= o.extra_loss_db;
    }
  }
  return r;
}

bool World::can_afford(const Node& n, double uj) const {
  return n.utility || n.store.can_withdraw(EnergyAmount(uj), floor_);
}

void World::charge(Node& n, double uj, std::optional<OperationKind> op, int tx_dbm, const char* tag) {
  if (n.utility || uj <= 0.0) return;
  if (!n.store.can_withdraw(EnergyAmount(uj), floor_)) {
    ++metrics_.floor_breaches;
    throw InsufficientEnergy("charge would breach the floor at node " + std::to_string(n.cfg.id));
  }
  n.store = n.store.withdraw(EnergyAmount(uj), floor_);
  n.consumed += uj;
  if (opts_.record_charges) {
    metrics_.charges.push_back({static_cast<std::uint32_t>(slot_), n.cfg.id, op, tx_dbm, uj, tag});
  }
}

double World::assumed_sleep(const Node& sender, NodeId receiver) const {
  const double longest = mac::longest_sleep_ms(cfg_.mac.mac, cfg_.optimizer.delta_floor);
  if (cfg_.routing.mode == routing::RouteMode::Baseline) return longest;
  auto it = sender.heard.find(receiver);
  if (it == sender.heard.end() || it->second.level == EnergyLevel::E0) return longest;
  const double cap = cfg_.optimizer.delta_cap[level_index(it->second.level)];
  if (cap <= 0.0) return longest;
  return mac::schedule_from_delta(cap, cfg_.mac.mac).sleep_ms;
}

double World::train_energy(double sleep_ms, int tx_dbm) const {
  const auto& radio = cfg_.mac.radio;
  return mac::preamble_train(sleep_ms, cfg_.mac.mac).duration_ms() * radio.tx_current(tx_dbm) *
         radio.voltage;
}

void World::observe(Node& n, NodeId from, double rssi, double t_ms) {
  const auto ref = n.router.reference(from);
  if (!ref) return;
  n.heard[from] = {routing::infer_neighbor_level(rssi, ref, power_map_), t_ms};
}

std::vector<EnergyLevel> World::active_neighbor_levels(const Node& n, double t_ms) const {
  const double window = 3.0 * cfg_.routing.beacon_period_s * 1000.0;
  std::vector<EnergyLevel> out;
  for (const auto& [id, h] : n.heard) {
    if (t_ms - h.at_ms <= window) out.push_back(h.level);
  }
  return out;
}

bool World::channel_busy(NodeId listener, double t_ms) const {
  const Node& me = node(listener);
  for (const auto& a : airtime_) {
    if (a.node == listener || t_ms < a.begin || t_ms >= a.end) continue;
    const double r = link_rssi(node(a.node), me, a.tx_dbm);
    if (mac::cca(r, cfg_.mac.mac) == mac::ChannelState::Busy) return true;
  }
  return false;
}

void World::log_route(double t_ms, const Node& n, const routing::RouteEntry& e, const char* reason) {
  metrics_.route_log.push_back({t_ms / 1000.0, n.cfg.id, e.destination, e.next_hop, e.cost, e.seq, reason});
}

void World::plan_node(Node& n, double slot_start_ms) {
  n.consumed = 0.0;
  n.ops_network = 0;
  n.forwarded = false;
  n.stored_begin = n.store.stored().microjoules();
  if (n.utility) {
    n.harvested = n.wasted = 0.0;
    return;
  }

  const EnergyAmount h = harvest_in_slot(n.trace, slot_ % n.trace_len, cfg_.slot_duration_s);
  auto dep = n.store.deposit(h);
  n.store = dep.store;
  n.harvested = h.microjoules();
  n.wasted = dep.wasted.microjoules();

  if (n.last_forecast) metrics_.forecasts.push_back({slot_, n.cfg.id, *n.last_forecast, n.harvested});
  n.predictor.observe(n.harvested);
  auto fc = n.predictor.horizon(std::max<std::size_t>(cfg_.predictor.horizon, 1));
  n.last_forecast = fc.front();
  for (auto& f : fc) f *= static_cast<double>(cfg_.predictor.virtual_window_slots);

  n.ctx = app::assess_slot(n.store, EnergyAmount{}, fc, active_neighbor_levels(n, slot_start_ms));
  const EnergyAmount budget = app::compute_budget(n.ctx, n.store, EnergyAmount{}, budget_cfg_);

  const bool modified = cfg_.routing.mode == routing::RouteMode::Modified;
  n.tx_dbm = modified && n.ctx.own != EnergyLevel::E0
                 ? routing::map_level_to_txpower(n.ctx.own, power_map_)
                 : power_map_.reference_dbm();
  n.plan = app::plan_slot(n.ctx, budget, n.policies, n.backlog, plan_cfg_, table_, n.tx_dbm);
  for (const auto& d : n.plan.defer) {
    if (d.op.kind == OperationKind::Forward || d.op.kind == OperationKind::Receive) continue;
    n.backlog.push({d.op, d.policy_id, d.priority, slot_, 0}, slot_);
  }

  double delta = n.plan.delta;
  const double duty = delta * cfg_.optimizer.duty_energy_uj;
  if (delta > 0.0 && !can_afford(n, duty)) delta = 0.0;
  if (delta > 0.0) charge(n, duty, std::nullopt, 0, "duty");
  n.plan.delta = delta;
  n.schedule = mac::schedule_from_delta(delta, cfg_.mac.mac);
  n.origin_ms = slot_start_ms + (n.schedule.radio_off ? 0.0 : n.phase * n.schedule.period_ms());
  n.forward_credits = delta > 0.0 ? static_cast<int>(count_kind(n.plan.run, OperationKind::Forward)) : 0;
  duty_sum_[n.cfg.id] += delta;

  if (!radio_on(n)) {
    // pending traffic dies with the radio
    metrics_.lost_queue += n.queue.size();
    n.queue.clear();
    n.discovering = false;
  }
}

void World::settle_node(Node& n) {
  app::SlotReport rep;
  rep.slot = slot_;
  rep.node = n.cfg.id;
  if (!n.utility) {
    const auto res = app::execute_plan(n.plan, n.store, floor_, table_, n.tx_dbm, false);
    n.store = res.store;
    std::size_t ci = 0;
    for (const auto& p : n.plan.run) {
      if (p.op.op_class == app::OpClass::Network) continue;
      if (ci >= res.charges.size()) break;
      n.consumed += res.charges[ci];
      if (opts_.record_charges) {
        metrics_.charges.push_back({static_cast<std::uint32_t>(slot_), n.cfg.id, p.op.kind,
                                    n.tx_dbm, res.charges[ci], "op"});
      }
      ++ci;
    }
    for (const auto& a : res.aborted) n.backlog.push({a.op, a.policy_id, a.priority, slot_, 0}, slot_);
    rep.ctx = n.ctx;
    rep.alpha_mean = n.plan.alpha_mean();
    rep.delta = n.plan.delta;
    rep.ops_node = res.report.ops_node;
  } else {
    rep.ctx = {EnergyLevel::E3, EnergyLevel::E3, EnergyLevel::E3};
    rep.delta = 1.0;
  }
  rep.ops_network = n.ops_network;
  rep.consumed_uj = n.consumed;
  rep.residual_uj = n.store.stored().microjoules();
  metrics_.slot_reports.push_back(rep);

  if (!n.utility) {
    metrics_.ledger.push_back({slot_, n.cfg.id, n.stored_begin, n.harvested, n.wasted, n.consumed,
                               n.store.stored().microjoules()});
    if (n.store.stored() < floor_ && n.stored_begin >= floor_.microjoules()) ++metrics_.floor_breaches;
  }
  if (n.forwarded) ++metrics_.forwarding_slots[n.cfg.id];
}

void World::schedule_slot_events(double start, double end) {
  const double beacon_ms = cfg_.routing.beacon_period_s * 1000.0;
  for (auto& [id, n] : nodes_) {
    // stagger beacons so neighbours do not collide every period
    const double offset = std::fmod(static_cast<double>(id) * 7300.0 + 250.0, beacon_ms);
    for (double t = offset + std::ceil((start - offset) / beacon_ms) * beacon_ms; t < end; t += beacon_ms) {
      if (t < start) continue;
      const NodeId nid = id;
      events_.schedule(t, [this, nid, t] { beacon(node(nid), t); });
    }
  }

  for (auto& [id, n] : nodes_) {
    if (n.cfg.role != scenario::Role::Source || n.utility) continue;
    const std::size_t k = count_kind(n.plan.run, OperationKind::Transmit);
    const double interval = cfg_.traffic.packet_interval_s * 1000.0;
    const NodeId nid = id;
    for (std::size_t i = 0; i < k; ++i) {
      const double t = start + 100.0 + static_cast<double>(i) * interval;
      if (t >= end) break;
      events_.schedule(t, [this, nid, t] { generate(node(nid), t); });
    }
    if (cfg_.routing.mode == routing::RouteMode::Modified && cfg_.routing.refresh_period_s > 0.0) {
      const double refresh = cfg_.routing.refresh_period_s * 1000.0;
      for (double t = std::ceil(start / refresh) * refresh; t < end; t += refresh) {
        events_.schedule(t + 50.0, [this, nid, t] {
          Node& src = node(nid);
          if (!radio_on(src) || src.discovering) return;
          start_discovery(src, t + 50.0, src.router.route(sink_id_) != nullptr);
        });
      }
    }
  }
}

void World::step_slot() {
  const double start = static_cast<double>(slot_) * cfg_.slot_duration_s * 1000.0;
  const double end = start + cfg_.slot_duration_s * 1000.0;
  events_.run_until(start);
  for (auto& [id, n] : nodes_) plan_node(n, start);
  schedule_slot_events(start, end);
  events_.run_until(end);
  airtime_.erase(std::remove_if(airtime_.begin(), airtime_.end(),
                                [end](const Airtime& a) { return a.end < end - 1000.0; }),
                 airtime_.end());
  for (auto& [id, n] : nodes_) settle_node(n);
  ++slot_;
  metrics_.slots = slot_;
  for (const auto& [id, sum] : duty_sum_) metrics_.mean_duty[id] = sum / static_cast<double>(slot_);
}

const Metrics& World::run(std::size_t n_slots) {
  if (n_slots == 0) throw InvalidArgument("run needs at least one slot");
  for (std::size_t i = 0; i < n_slots; ++i) step_slot();
  return metrics_;
}

void World::generate(Node& src, double t_ms) {
  ++metrics_.generated;
  const Packet p{next_packet_++, t_ms};
  if (!radio_on(src)) {
    ++metrics_.lost_queue;
    return;
  }
  if (src.router.route(sink_id_) && src.queue.empty()) {
    send_data(src, p, t_ms);
    return;
  }
  if (src.queue.size() >= cfg_.traffic.queue_limit) {
    src.queue.pop_front();
    ++metrics_.lost_queue;
  }
  src.queue.push_back(p);
  if (!src.router.route(sink_id_)) start_discovery(src, t_ms, false);
}

void World::send_data(Node& src, const Packet& p, double t_ms) {
  const auto* r = src.router.route(sink_id_);
  Frame f;
  f.kind = FrameKind::Data;
  f.packet = p;
  unicast(src, r->next_hop, f, t_ms);
}

void World::unicast(Node& n, NodeId to, Frame f, double t_ms) {
  n.pending.push_back({to, std::move(f)});
  if (!n.sending) start_next(n, t_ms);
}

void World::start_next(Node& n, double t_ms) {
  while (!n.pending.empty()) {
    SendJob job = std::move(n.pending.front());
    n.pending.pop_front();
    Node& to = node(job.to);
    const auto& mcfg = cfg_.mac.mac;
    const auto& radio = cfg_.mac.radio;
    const int tx = n.utility ? power_map_.reference_dbm() : n.tx_dbm;
    const bool own_data = job.frame.kind == FrameKind::Data && n.cfg.role == scenario::Role::Source;
    const OperationKind kind = own_data || (job.frame.kind == FrameKind::Rrep && n.utility)
                                   ? OperationKind::Transmit
                                   : OperationKind::Forward;

    if (!radio_on(n)) {
      send_failed(n, job.to, job.frame, t_ms);
      continue;
    }

    const double sized = assumed_sleep(n, job.to);
    const double retry = mac::longest_sleep_ms(mcfg, cfg_.optimizer.delta_floor);
    const double op_cost = table_.cost(kind, tx).microjoules();
    const double overhead =
        (mcfg.max_backoff_attempts * 0.128 + mcfg.ack_ms + (mcfg.rts_cts ? mcfg.preamble_ms : 0.0)) *
            radio.rx_ma * radio.voltage +
        (mcfg.rts_cts ? mcfg.preamble_ms * radio.tx_current(tx) * radio.voltage : 0.0);
    int attempts = 0;
    if (n.utility) {
      attempts = 1 + mcfg.arq_retries;
    } else {
      const double spare = n.store.stored().microjoules() - floor_.microjoules();
      double need = op_cost + overhead + train_energy(sized, tx);
      while (attempts < 1 + mcfg.arq_retries && need <= spare) {
        ++attempts;
        need += op_cost + overhead + train_energy(retry, tx);
      }
    }
    if (attempts == 0) {
      if (opts_.record_mac_trace) metrics_.mac_trace.push_back({t_ms, n.cfg.id, "fail", "energy"});
      send_failed(n, job.to, job.frame, t_ms);
      continue;
    }

    mac::MacConfig limited = mcfg;
    limited.arq_retries = attempts - 1;
    mac::SendRequest req;
    req.sender = n.cfg.id;
    req.receiver = job.to;
    req.start_ms = t_ms;
    req.tx_dbm = tx;
    req.sized_sleep_ms = sized;
    req.retry_sleep_ms = retry;
    req.receiver_schedule = to.schedule;
    req.receiver_origin_ms = to.origin_ms;

    const double rssi = link_rssi(n, to, tx);
    bool accepted = false;
    mac::LinkHooks hooks;
    hooks.channel_busy = [this, &n](double t) { return channel_busy(n.cfg.id, t); };
    hooks.delivered = [&](double) {
      double r = rssi;
      if (cfg_.channel.shadowing_sigma_db > 0.0) r = channel_rng_.normal(rssi, cfg_.channel.shadowing_sigma_db);
      if (!channel_.deliver(r, channel_rng_)) return false;
      accepted = accept(to, n, job.frame);
      return accepted;
    };
    const auto out = mac::csma_send(req, limited, hooks, n.rng);

    for (int i = 0; i < out.data_frames; ++i) charge(n, op_cost, kind, tx, "data");
    mac::RadioDurations extra = out.radio;
    extra.tx_ms = std::max(0.0, extra.tx_ms - out.data_frames * mcfg.data_ms);
    charge(n, mac::radio_energy(extra, radio).microjoules(), std::nullopt, tx, "radio");
    for (const auto& [b, e] : out.airtime) airtime_.push_back({n.cfg.id, b, e, tx});
    if (opts_.record_mac_trace) {
      metrics_.mac_trace.insert(metrics_.mac_trace.end(), out.trace.begin(), out.trace.end());
    }

    n.sending = true;
    const NodeId from = n.cfg.id;
    const NodeId dest = job.to;
    const Frame frame = job.frame;
    const bool ok = out.status == mac::SendStatus::Delivered;
    const double ack_rssi = link_rssi(to, n, to.utility ? power_map_.reference_dbm() : to.tx_dbm);
    if (ok) {
      events_.schedule(out.arrival_ms, [this, dest, from, frame, rssi, t = out.arrival_ms] {
        receive(node(dest), from, frame, rssi, t);
      });
    }
    events_.schedule(out.finish_ms, [this, from, dest, frame, ok, ack_rssi, t = out.finish_ms] {
      Node& self = node(from);
      self.sending = false;
      if (ok) {
        observe(self, dest, ack_rssi, t);
      } else {
        send_failed(self, dest, frame, t);
      }
      start_next(self, t);
    });
    return;
  }
}

bool World::accept(Node& to, const Node& from, const Frame& f) {
  if (to.utility) return true;
  if (!radio_on(to)) return false;
  const double rx = table_.cost(OperationKind::Receive).microjoules();
  if (f.kind == FrameKind::Data) {
    if (to.cfg.role != scenario::Role::Relay || to.forward_credits <= 0) return false;
    const double fwd = table_.cost(OperationKind::Forward, to.tx_dbm).microjoules();
    if (!can_afford(to, rx + fwd)) return false;
    --to.forward_credits;
  } else if (!can_afford(to, rx)) {
    return false;
  }
  (void)from;
  charge(to, rx, OperationKind::Receive, 0, "receive");
  ++to.ops_network;
  return true;
}

void World::receive(Node& to, NodeId from, const Frame& f, double rssi, double t_ms) {
  observe(to, from, rssi, t_ms);
  if (f.kind == FrameKind::Data) {
    if (to.cfg.id == sink_id_) {
      if (delivered_ids_.insert(f.packet.id).second) ++metrics_.delivered;
      return;
    }
    const auto* r = to.router.route(sink_id_);
    if (!r) {
      ++metrics_.lost_relay;
      return;
    }
    to.forwarded = true;
    ++metrics_.forwarded[to.cfg.id];
    ++to.ops_network;
    unicast(to, r->next_hop, f, t_ms + kProcessingMs);
    return;
  }

  const auto& rep = f.rrep;
  const auto it = std::find(rep.path.begin(), rep.path.end(), to.cfg.id);
  if (it == rep.path.end() || it + 1 == rep.path.end()) return;
  const routing::RouteEntry e{sink_id_, *(it + 1), rep.cost, rep.seq, slot_};
  if (to.router.install(e)) log_route(t_ms, to, e, "rrep");
  if (it == rep.path.begin()) {
    to.discovering = false;
    // a synchronous failure can invalidate the route mid-flush
    while (!to.queue.empty() && to.router.route(sink_id_)) {
      const Packet p = to.queue.front();
      to.queue.pop_front();
      send_data(to, p, t_ms);
    }
    return;
  }
  Frame back = f;
  unicast(to, *(it - 1), back, t_ms + kProcessingMs);
}

void World::send_failed(Node& n, NodeId to, const Frame& f, double t_ms) {
  if (f.kind != FrameKind::Data) return;
  if (n.cfg.role == scenario::Role::Source) {
    ++metrics_.lost_link;
    const auto* r = n.router.route(sink_id_);
    if (r && r->next_hop == to) {
      metrics_.route_log.push_back({t_ms / 1000.0, n.cfg.id, sink_id_, to, r->cost, r->seq, "link_failure"});
      n.router.invalidate(sink_id_);
      // data still waiting for the dead hop goes back to the queue
      std::deque<SendJob> keep;
      for (auto& j : n.pending) {
        if (j.frame.kind == FrameKind::Data && j.to == to) {
          n.queue.push_back(j.frame.packet);
        } else {
          keep.push_back(std::move(j));
        }
      }
      n.pending = std::move(keep);
      while (n.queue.size() > cfg_.traffic.queue_limit) {
        n.queue.pop_front();
        ++metrics_.lost_queue;
      }
      start_discovery(n, t_ms, false);
    }
  } else {
    ++metrics_.lost_relay;
  }
}

void World::start_discovery(Node& src, double t_ms, bool refresh) {
  if (src.discovering || !radio_on(src)) return;
  if (!refresh) src.discovering = true;
  src.discovery_attempts = 1;
  ++src.seq;
  routing::Rreq r;
  r.origin = src.cfg.id;
  r.destination = sink_id_;
  r.seq = src.seq;
  r.tx_dbm = src.tx_dbm;
  ++metrics_.floods;
  broadcast_rreq(src, r, t_ms);
  if (!refresh) {
    const NodeId id = src.cfg.id;
    const std::uint32_t seq = src.seq;
    const double due = t_ms + cfg_.routing.discovery_timeout_s * 1000.0;
    events_.schedule(due, [this, id, seq, due] { discovery_timeout(id, seq, due); });
  }
}

void World::discovery_timeout(NodeId id, std::uint32_t seq, double t_ms) {
  Node& src = node(id);
  if (!src.discovering || src.seq != seq) return;
  if (src.router.route(sink_id_)) {
    src.discovering = false;
    return;
  }
  if (src.discovery_attempts <= cfg_.routing.discovery_retries && radio_on(src)) {
    ++src.discovery_attempts;
    ++src.seq;
    routing::Rreq r;
    r.origin = id;
    r.destination = sink_id_;
    r.seq = src.seq;
    r.tx_dbm = src.tx_dbm;
    ++metrics_.floods;
    broadcast_rreq(src, r, t_ms);
    const std::uint32_t next = src.seq;
    const double due = t_ms + cfg_.routing.discovery_timeout_s * 1000.0;
    events_.schedule(due, [this, id, next, due] { discovery_timeout(id, next, due); });
    return;
  }
  src.discovering = false;
  metrics_.lost_no_route += src.queue.size();
  src.queue.clear();
}

void World::broadcast_rreq(Node& n, const routing::Rreq& r, double t_ms) {
  if (!radio_on(n)) return;
  const auto& mcfg = cfg_.mac.mac;
  const auto& radio = cfg_.mac.radio;
  const int tx = r.tx_dbm;

  // modified mode sizes the train for the sparsest neighbour it knows of
  double sleep = mac::longest_sleep_ms(mcfg, cfg_.optimizer.delta_floor);
  if (cfg_.routing.mode == routing::RouteMode::Modified && !n.heard.empty()) {
    double widest = 0.0;
    for (const auto& [id, h] : n.heard) widest = std::max(widest, assumed_sleep(n, id));
    sleep = std::min(sleep, widest);
  }
  const double train_ms = mac::preamble_train(sleep, mcfg).duration_ms();

  double t = t_ms;
  bool clear = false;
  for (int b = 1; b <= mcfg.max_backoff_attempts && !clear; ++b) {
    t += n.rng.uniform(0.0, mac::backoff_window_ms(b, mcfg));
    clear = !channel_busy(n.cfg.id, t);
  }
  if (!clear) {
    if (opts_.record_mac_trace) metrics_.mac_trace.push_back({t, n.cfg.id, "fail", "rreq_saturated"});
    return;
  }

  const double op_cost = table_.cost(OperationKind::Transmit, tx).microjoules();
  const double radio_uj = train_ms * radio.tx_current(tx) * radio.voltage;
  if (!can_afford(n, op_cost + radio_uj)) return;
  charge(n, op_cost, OperationKind::Transmit, tx, "rreq");
  charge(n, radio_uj, std::nullopt, tx, "radio");
  const double end = t + train_ms + mcfg.data_ms;
  airtime_.push_back({n.cfg.id, t, end, tx});
  if (opts_.record_mac_trace) {
    metrics_.mac_trace.push_back({t, n.cfg.id, "rreq", std::to_string(r.origin) + ":" + std::to_string(r.seq)});
  }

  const double rx_cost = table_.cost(OperationKind::Receive).microjoules();
  for (auto& [id, m] : nodes_) {
    if (id == n.cfg.id || !radio_on(m)) continue;
    const double mean = link_rssi(n, m, tx);
    const double rssi = cfg_.channel.shadowing_sigma_db > 0.0
                            ? channel_rng_.normal(mean, cfg_.channel.shadowing_sigma_db)
                            : mean;
    if (rssi < cfg_.channel.sensitivity_dbm) continue;
    const auto wake = mac::next_wake(m.schedule, m.origin_ms, t);
    if (!wake || *wake > t + train_ms) continue;
    if (!channel_.deliver(rssi, channel_rng_)) continue;
    if (!can_afford(m, rx_cost)) continue;
    charge(m, rx_cost, OperationKind::Receive, 0, "receive");
    const NodeId mid = id;
    events_.schedule(end, [this, mid, r, rssi, end, from = n.cfg.id] {
      Node& me = node(mid);
      observe(me, from, rssi, end);
      handle_rreq(me, r, rssi, end);
    });
  }
}

void World::handle_rreq(Node& n, const routing::Rreq& r, double rssi, double t_ms) {
  if (n.cfg.id != sink_id_) {
    const EnergyLevel own = n.utility ? EnergyLevel::E3 : n.ctx.own;
    auto out = n.router.process_rreq(r, rssi, own, power_map_, cfg_.routing.mode);
    if (out) {
      if (cfg_.routing.mode == routing::RouteMode::Baseline) out->tx_dbm = power_map_.reference_dbm();
      const NodeId id = n.cfg.id;
      const routing::Rreq copy = *out;
      events_.schedule(t_ms + kProcessingMs,
                       [this, id, copy, t = t_ms + kProcessingMs] { broadcast_rreq(node(id), copy, t); });
    }
    return;
  }

  auto c = routing::make_candidate(r, sink_id_, rssi, t_ms / 1000.0, cfg_.routing.cost_mode);
  Flood& fl = floods_[r.origin];
  if (r.seq < fl.seq) return;
  if (r.seq > fl.seq || (fl.candidates.empty() && !fl.decided)) {
    fl = Flood{r.seq, false, 0.0, {c}};
    if (cfg_.routing.mode == routing::RouteMode::Modified) {
      const NodeId origin = r.origin;
      const std::uint32_t seq = r.seq;
      const double due = t_ms + cfg_.routing.collection_window_ms;
      events_.schedule(due, [this, origin, seq, due] { sink_decide(origin, seq, due); });
    } else {
      sink_decide(r.origin, r.seq, t_ms);
    }
    return;
  }
  if (!fl.decided) {
    fl.candidates.push_back(c);
    return;
  }
  if (cfg_.routing.mode == routing::RouteMode::Modified) {
    if (auto rep = routing::reroute_on_better(fl.installed_cost, c)) {
      fl.installed_cost = rep->cost;
      send_rrep(*rep, t_ms);
    }
  }
}

void World::sink_decide(NodeId origin, std::uint32_t seq, double t_ms) {
  Flood& fl = floods_[origin];
  if (fl.seq != seq || fl.decided || fl.candidates.empty()) return;
  if (!sink_state_.may_answer(origin, seq)) return;
  const auto rep = routing::sink_decide(fl.candidates, cfg_.routing.mode);
  sink_state_.answered(origin, seq);
  fl.decided = true;
  fl.installed_cost = rep.cost;
  send_rrep(rep, t_ms);
}

void World::send_rrep(const routing::Rrep& rep, double t_ms) {
  if (rep.path.size() < 2) return;
  Frame f;
  f.kind = FrameKind::Rrep;
  f.rrep = rep;
  unicast(node(sink_id_), rep.path[rep.path.size() - 2], f, t_ms + kProcessingMs);
}

void World::beacon(Node& n, double t_ms) {
  if (!radio_on(n)) return;
  const int ref = power_map_.reference_dbm();
  const double cost = table_.cost(OperationKind::Transmit, ref).microjoules();
  if (!can_afford(n, cost)) return;
  charge(n, cost, OperationKind::Transmit, ref, "beacon");
  airtime_.push_back({n.cfg.id, t_ms, t_ms + cfg_.mac.mac.data_ms, ref});
  if (opts_.record_mac_trace) metrics_.mac_trace.push_back({t_ms, n.cfg.id, "beacon", ""});
  for (auto& [id, m] : nodes_) {
    if (id == n.cfg.id || !radio_on(m)) continue;
    const double mean = link_rssi(n, m, ref);
    const double rssi = cfg_.channel.shadowing_sigma_db > 0.0
                            ? channel_rng_.normal(mean, cfg_.channel.shadowing_sigma_db)
                            : mean;
    if (rssi < cfg_.channel.sensitivity_dbm || !channel_.deliver(rssi, channel_rng_)) continue;
    m.router.observe_beacon(n.cfg.id, rssi, slot_, cfg_.routing.calibration_smoothing);
    auto it = m.heard.find(n.cfg.id);
    if (it != m.heard.end()) it->second.at_ms = t_ms;
  }
}

Metrics simulate(const scenario::ScenarioConfig& cfg, std::size_t n_slots, SimOptions opts) {
  World w(cfg, std::move(opts));
  return w.run(n_slots);
}

std::string summary_json(const Metrics& m, const scenario::ScenarioConfig& cfg) {
  nlohmann::ordered_json j;
  j["scenario"] = cfg.name;
  j["seed"] = cfg.seed;
  j["config_hash"] = scenario::hash_hex(scenario::config_hash(cfg));
  j["mode"] = std::string(routing::to_string(cfg.routing.mode));
  j["slots"] = m.slots;
  j["generated"] = m.generated;
  j["delivered"] = m.delivered;
  j["pdr"] = m.pdr();
  j["lost"] = {{"no_route", m.lost_no_route},
               {"link", m.lost_link},
               {"relay", m.lost_relay},
               {"queue", m.lost_queue}};
  j["floods"] = m.floods;
  j["route_changes"] = m.route_log.size();
  nlohmann::ordered_json nodes = nlohmann::ordered_json::object();
  std::map<NodeId, double> harvested, consumed, wasted;
  for (const auto& r : m.ledger) {
    harvested[r.node] += r.harvested;
    consumed[r.node] += r.consumed;
    wasted[r.node] += r.wasted;
  }
  for (const auto& n : cfg.nodes) {
    nlohmann::ordered_json e;
    e["name"] = n.name;
    e["harvested_uJ"] = harvested[n.id];
    e["consumed_uJ"] = consumed[n.id];
    e["wasted_uJ"] = wasted[n.id];
    e["mean_duty"] = m.mean_duty.count(n.id) ? m.mean_duty.at(n.id) : 0.0;
    e["forwarded"] = m.forwarded.count(n.id) ? m.forwarded.at(n.id) : 0;
    e["forwarding_slots"] = m.forwarding_slots.count(n.id) ? m.forwarding_slots.at(n.id) : 0;
    nodes[std::to_string(n.id)] = e;
  }
  j["nodes"] = nodes;
  j["max_ledger_imbalance"] = m.max_relative_imbalance();
  j["floor_breaches"] = m.floor_breaches;
  j["config"] = nlohmann::ordered_json::parse(scenario::serialize_scenario(cfg));
  return j.dump(2);
}

void write_slot_reports(std::ostream& os, const Metrics& m) {
  app::write_slot_report_header(os);
  for (const auto& r : m.slot_reports) app::write_slot_report_row(os, r);
}

void write_ledger(std::ostream& os, const Metrics& m) {
  os << "slot,node,stored_begin_uJ,harvested_uJ,wasted_uJ,consumed_uJ,stored_end_uJ\n";
  for (const auto& r : m.ledger) {
    os << r.slot << ',' << r.node << ',' << r.stored_begin << ',' << r.harvested << ',' << r.wasted
       << ',' << r.consumed << ',' << r.stored_end << '\n';
  }
}

void write_route_log(std::ostream& os, const Metrics& m) {
  routing::write_route_log_header(os);
  for (const auto& c : m.route_log) routing::write_route_log_row(os, c);
}

void write_mac_trace(std::ostream& os, const Metrics& m) {
  mac::write_mac_trace_header(os);
  for (const auto& e : m.mac_trace) mac::write_mac_trace_row(os, e);
}

void write_forecasts(std::ostream& os, const Metrics& m) {
  os << "slot,node,predicted_uJ,actual_uJ\n";
  for (const auto& f : m.forecasts) {
    os << f.slot << ',' << f.node << ',' << f.predicted << ',' << f.actual << '\n';
  }
}

}  // namespace zen::sim
