#include "zen/routing.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace zen::routing {

int map_level_to_txpower(EnergyLevel level, const TxPowerMap& map) {
  switch (level) {
    case EnergyLevel::E0:
      throw NodeDormant("a node at E0 does not transmit");
    case EnergyLevel::E1:
      return map.dbm[0];
    case EnergyLevel::E2:
      return map.dbm[1];
    case EnergyLevel::E3:
      return map.dbm[2];
  }
  throw InvalidArgument("bad energy level");
}

RssiReference calibrate_reference(const std::optional<RssiReference>& current, double observed_dbm,
                                  std::size_t slot, double smoothing) {
  if (!(smoothing > 0.0 && smoothing <= 1.0)) throw InvalidArgument("smoothing must be in (0, 1]");
  if (!current) return {observed_dbm, slot};
  return {current->dbm + smoothing * (observed_dbm - current->dbm), slot};
}

EnergyLevel infer_neighbor_level(double observed_dbm, const std::optional<RssiReference>& ref,
                                 const TxPowerMap& map) {
  if (!ref) throw Uncalibrated("no beacon heard from this neighbour yet");
  const double attenuation = ref->dbm - observed_dbm;
  // Scan from E1 upwards and only move on strict improvement, so ties stay low.
  int best = 0;
  double best_err = INFINITY;
  for (int i = 0; i < 3; ++i) {
    const double step = map.reference_dbm() - map.dbm[static_cast<std::size_t>(i)];
    const double err = std::abs(attenuation - step);
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  return level_from_int(best + 1);
}

std::vector<double> uniform_mu(std::size_t hops) {
  if (hops == 0) return {};
  return std::vector<double>(hops, 1.0 / static_cast<double>(hops));
}

double sink_route_cost(const std::vector<double>& path_rssi, const std::vector<double>& mu,
                       CostMode mode) {
  if (path_rssi.empty() || path_rssi.size() != mu.size()) {
    throw DimensionMismatch(std::to_string(path_rssi.size()) + " link observations but " +
                            std::to_string(mu.size()) + " weights");
  }
  double c = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    c += mu[i] * (mode == CostMode::Magnitude ? std::abs(path_rssi[i]) : path_rssi[i]);
  }
  return c;
}

std::string_view to_string(RouteMode m) {
  return m == RouteMode::Modified ? "modified" : "baseline";
}

RouteMode route_mode_from_string(std::string_view s) {
  if (s == "modified") return RouteMode::Modified;
  if (s == "baseline") return RouteMode::Baseline;
  throw InvalidArgument("unknown routing mode '" + std::string(s) + "'");
}

std::optional<Rreq> RouterState::process_rreq(const Rreq& in, double observed_rssi,
                                              EnergyLevel own, const TxPowerMap& map,
                                              RouteMode mode) {
  if (in.origin == self_) return std::nullopt;
  if (!seen_.insert({in.origin, in.seq}).second) return std::nullopt;
  if (own == EnergyLevel::E0) return std::nullopt;
  for (const auto& h : in.path) {
    if (h.node == self_) return std::nullopt;
  }
  Rreq out = in;
  out.path.push_back({self_, observed_rssi});
  out.tx_dbm = mode == RouteMode::Modified ? map_level_to_txpower(own, map) : map.reference_dbm();
  return out;
}

bool RouterState::install(const RouteEntry& e) {
  auto it = routes_.find(e.destination);
  if (it == routes_.end()) {
    routes_.emplace(e.destination, e);
    return true;
  }
  const RouteEntry& cur = it->second;
  if (e.seq > cur.seq || (e.seq == cur.seq && e.cost < cur.cost)) {
    it->second = e;
    return true;
  }
  return false;
}

const RouteEntry* RouterState::route(NodeId dest) const {
  auto it = routes_.find(dest);
  return it == routes_.end() ? nullptr : &it->second;
}

void RouterState::observe_beacon(NodeId neighbor, double rssi, std::size_t slot, double smoothing) {
  refs_[neighbor] = calibrate_reference(reference(neighbor), rssi, slot, smoothing);
}

std::optional<RssiReference> RouterState::reference(NodeId neighbor) const {
  auto it = refs_.find(neighbor);
  if (it == refs_.end()) return std::nullopt;
  return it->second;
}

Candidate make_candidate(Rreq arrived, NodeId sink, double observed_rssi, double arrival_s,
                         CostMode mode) {
  arrived.path.push_back({sink, observed_rssi});
  std::vector<double> rssi;
  rssi.reserve(arrived.path.size());
  for (const auto& h : arrived.path) rssi.push_back(h.rssi_dbm);
  Candidate c;
  c.cost = sink_route_cost(rssi, uniform_mu(rssi.size()), mode);
  c.rreq = std::move(arrived);
  c.arrival_s = arrival_s;
  return c;
}

namespace {

Rrep reply_for(const Candidate& c) {
  Rrep r;
  r.origin = c.rreq.origin;
  r.seq = c.rreq.seq;
  r.cost = c.cost;
  r.path.push_back(c.rreq.origin);
  for (const auto& h : c.rreq.path) {
    if (std::find(r.path.begin(), r.path.end(), h.node) != r.path.end()) {
      throw InvalidArgument("candidate path repeats node " + std::to_string(h.node));
    }
    r.path.push_back(h.node);
  }
  return r;
}

}  // namespace

Rrep sink_decide(const std::vector<Candidate>& candidates, RouteMode mode) {
  if (candidates.empty()) throw NoCandidates("no route request reached the sink");
  std::size_t best = 0;
  if (mode == RouteMode::Modified) {
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      if (candidates[i].cost < candidates[best].cost) best = i;
    }
  }
  return reply_for(candidates[best]);
}

std::optional<Rrep> reroute_on_better(double installed_cost, const Candidate& late) {
  if (late.cost < installed_cost) return reply_for(late);
  return std::nullopt;
}

bool SinkState::may_answer(NodeId origin, std::uint32_t seq) const {
  auto it = last_.find(origin);
  return it == last_.end() || seq >= it->second;
}

void SinkState::answered(NodeId origin, std::uint32_t seq) {
  if (!may_answer(origin, seq)) {
    throw InvalidArgument("answering an older sequence number than already answered");
  }
  last_[origin] = seq;
}

void write_route_log_header(std::ostream& os) { os << "time,node,dest,next_hop,cost,seq,reason\n"; }

void write_route_log_row(std::ostream& os, const RouteChange& c) {
  os << c.time_s << ',' << c.node << ',' << c.dest << ',' << c.next_hop << ',' << c.cost << ','
     << c.seq << ',' << c.reason << '\n';
}

}  // namespace zen::routing
