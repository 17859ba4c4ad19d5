#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zen/energy.hpp"

namespace zen::routing {

using NodeId = std::uint32_t;

/// Transmit power per energy level E1, E2, E3 (dBm). Index 2 is also the fixed beacon
/// power that neighbours calibrate against.
struct TxPowerMap {
  std::array<int, 3> dbm{-10, -5, 0};
  int reference_dbm() const { return dbm[2]; }
};

/// Throws NodeDormant for E0.
int map_level_to_txpower(EnergyLevel level, const TxPowerMap& map = {});

struct RssiReference {
  double dbm = 0.0;
  std::size_t last_update_slot = 0;
};

/// Exponential smoothing of beacon RSSI; the first beacon seeds the reference.
RssiReference calibrate_reference(const std::optional<RssiReference>& current, double observed_dbm,
                                  std::size_t slot, double smoothing = 0.2);

/// Matches the attenuation against the reference to the nearest power step; ties
/// resolve to the lower level. Throws Uncalibrated without a reference.
EnergyLevel infer_neighbor_level(double observed_dbm, const std::optional<RssiReference>& ref,
                                 const TxPowerMap& map = {});

/// Magnitude: sum mu_i * |RSSI_i| (strong links are cheap).
/// RawSum: sum mu_i * RSSI_i taken literally.
enum class CostMode { Magnitude, RawSum };

std::vector<double> uniform_mu(std::size_t hops);

/// Lower is better. Throws DimensionMismatch on length mismatch or an empty path.
double sink_route_cost(const std::vector<double>& path_rssi, const std::vector<double>& mu,
                       CostMode mode = CostMode::Magnitude);

struct Hop {
  NodeId node = 0;
  double rssi_dbm = 0.0;  // observed by `node` on the link into it
};

struct Rreq {
  NodeId origin = 0;
  NodeId destination = 0;
  std::uint32_t seq = 0;
  std::vector<Hop> path;
  int tx_dbm = 0;
};

struct Rrep {
  NodeId origin = 0;
  std::uint32_t seq = 0;
  /// origin, relays..., sink
  std::vector<NodeId> path;
  double cost = 0.0;
};

struct RouteEntry {
  NodeId destination = 0;
  NodeId next_hop = 0;
  double cost = 0.0;
  std::uint32_t seq = 0;
  std::size_t installed_slot = 0;
};

enum class RouteMode { Modified, Baseline };

std::string_view to_string(RouteMode m);
RouteMode route_mode_from_string(std::string_view s);

/// Per-node routing table, RREQ dedupe set and beacon references.
class RouterState {
 public:
  explicit RouterState(NodeId self) : self_(self) {}

  NodeId self() const { return self_; }

  /// Drops duplicates, looped paths and requests reaching a dormant node. Otherwise
  /// returns the copy to rebroadcast with this node's observation appended.
  std::optional<Rreq> process_rreq(const Rreq& in, double observed_rssi, EnergyLevel own,
                                   const TxPowerMap& map, RouteMode mode);
  bool seen(NodeId origin, std::uint32_t seq) const { return seen_.count({origin, seq}) != 0; }

  /// Installs when the destination has no entry, the sequence number is newer, or the
  /// sequence number matches and the cost is strictly lower.
  bool install(const RouteEntry& e);
  const RouteEntry* route(NodeId dest) const;
  void invalidate(NodeId dest) { routes_.erase(dest); }

  void observe_beacon(NodeId neighbor, double rssi, std::size_t slot, double smoothing = 0.2);
  std::optional<RssiReference> reference(NodeId neighbor) const;

 private:
  NodeId self_;
  std::set<std::pair<NodeId, std::uint32_t>> seen_;
  std::map<NodeId, RouteEntry> routes_;
  std::map<NodeId, RssiReference> refs_;
};

struct Candidate {
  Rreq rreq;  // path includes the sink's own observation
  double arrival_s = 0.0;
  double cost = 0.0;
};

Candidate make_candidate(Rreq arrived, NodeId sink, double observed_rssi, double arrival_s,
                         CostMode mode = CostMode::Magnitude);

/// Candidates must be in arrival order. Modified mode takes the cheapest (first arrival
/// among equals); baseline takes the first. Throws NoCandidates.
Rrep sink_decide(const std::vector<Candidate>& candidates, RouteMode mode);

/// A late candidate replaces the installed route only when strictly cheaper.
std::optional<Rrep> reroute_on_better(double installed_cost, const Candidate& late);

/// Highest sequence number answered per origin; older requests are never answered.
class SinkState {
 public:
  bool may_answer(NodeId origin, std::uint32_t seq) const;
  void answered(NodeId origin, std::uint32_t seq);

 private:
  std::map<NodeId, std::uint32_t> last_;
};

struct RouteChange {
  double time_s = 0.0;
  NodeId node = 0;
  NodeId dest = 0;
  NodeId next_hop = 0;
  double cost = 0.0;
  std::uint32_t seq = 0;
  std::string reason;
};

void write_route_log_header(std::ostream& os);
void write_route_log_row(std::ostream& os, const RouteChange& c);

}  // namespace zen::routing
