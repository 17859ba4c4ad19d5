#include "zen/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace zen::sim {
namespace {

scenario::ScenarioConfig fig2() {
  std::ifstream f(std::string(ZEN_SOURCE_DIR) + "/configs/fig2_topology.json");
  std::stringstream ss;
  ss << f.rdbuf();
  return scenario::parse_scenario(ss.str());
}

TEST(Channel, PathLoss) {
  const Channel ch;
  EXPECT_DOUBLE_EQ(ch.rssi_at(0.0, 8.0), -65.0);
  EXPECT_NEAR(ch.rssi_at(0.0, 16.0), -65.0 - 27.0 * std::log10(2.0), 1e-12);
  EXPECT_NEAR(ch.rssi_at(-10.0, 8.0), -75.0, 1e-12);
  EXPECT_NEAR(ch.rssi_at(0.0, 80.0), -92.0, 1e-12);
  EXPECT_THROW(ch.rssi_at(0.0, 0.0), InvalidArgument);
  Rng rng(1);
  EXPECT_EQ(ch.rssi_at(0.0, 8.0, rng), -65.0);
}

TEST(Channel, LossCurve) {
  const Channel ch;
  EXPECT_NEAR(ch.loss_probability(-90.0), 0.25, 1e-12);
  EXPECT_EQ(ch.loss_probability(-95.0), 0.5);
  EXPECT_EQ(ch.loss_probability(-85.0), 0.0);
  EXPECT_EQ(ch.loss_probability(-96.0), 1.0);
  Rng rng(3);
  int ok = 0;
  for (int i = 0; i < 20000; ++i) ok += ch.deliver(-90.0, rng);
  EXPECT_NEAR(ok / 20000.0, 0.75, 0.01);
  for (int i = 0; i < 100; ++i) {
    EXPECT_TRUE(ch.deliver(-60.0, rng));
    EXPECT_FALSE(ch.deliver(-100.0, rng));
  }
}

TEST(Channel, ShadowingSpreadsReadings) {
  scenario::ChannelConfig cfg;
  cfg.shadowing_sigma_db = 4.0;
  const Channel ch(cfg);
  Rng rng(9);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double r = ch.rssi_at(0.0, 8.0, rng);
    sum += r;
    sq += r * r;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, -65.0, 0.1);
  EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 4.0, 0.1);
}

TEST(EventQueue, TimeThenInsertionOrder) {
  EventQueue q;
  std::vector<int> order;
  q.schedule(5.0, [&] { order.push_back(2); });
  q.schedule(1.0, [&] { order.push_back(0); });
  q.schedule(5.0, [&] { order.push_back(3); });
  q.schedule(2.0, [&] {
    order.push_back(1);
    q.schedule(3.0, [&] { order.push_back(10); });
  });
  q.schedule(9.0, [&] { order.push_back(99); });
  q.run_until(9.0);
  EXPECT_EQ(order, (std::vector<int>{0, 1, 10, 2, 3}));
  EXPECT_EQ(q.size(), 1u);
  EXPECT_THROW(q.schedule(8.0, [] {}), InvalidArgument);
  q.run_until(10.0);
  EXPECT_EQ(order.back(), 99);
  EXPECT_TRUE(q.empty());
}

TEST(World, RejectsEmptyRun) {
  World w(fig2());
  EXPECT_THROW(w.run(0), InvalidArgument);
}

TEST(World, RejectsInvalidConfig) {
  auto cfg = fig2();
  cfg.nodes[1].profile = "missing";
  EXPECT_THROW(World{cfg}, scenario::SchemaError);
}

TEST(World, LedgerBalancesAndFloorHolds) {
  for (std::uint64_t seed : {1u, 7u}) {
    for (auto mode : {routing::RouteMode::Modified, routing::RouteMode::Baseline}) {
      auto cfg = fig2();
      cfg.seed = seed;
      cfg.routing.mode = mode;
      World w(cfg);
      const auto& m = w.run(300);
      ASSERT_EQ(m.ledger.size(), 300u * 3);
      for (const auto& r : m.ledger) {
        const double scale = std::max({1.0, r.stored_begin, r.harvested, r.consumed});
        ASSERT_LE(std::abs(r.imbalance()) / scale, 1e-6) << "slot " << r.slot << " node " << r.node;
        ASSERT_GE(r.stored_end, w.floor().microjoules() - 1e-9);
        ASSERT_LE(r.stored_end, cfg.energy.capacity_uj + 1e-9);
      }
      EXPECT_EQ(m.floor_breaches, 0u);
      EXPECT_LE(m.delivered, m.generated);
    }
  }
}

TEST(World, ChargesMatchOperationTable) {
  const auto table = OperationCostTable::mote_defaults();
  World w(fig2());
  const auto& m = w.run(200);
  std::size_t checked = 0;
  for (const auto& c : m.charges) {
    if (!c.op) continue;
    ASSERT_EQ(c.microjoules, table.cost(*c.op, c.tx_dbm).microjoules()) << c.tag;
    ++checked;
  }
  EXPECT_GT(checked, 1000u);
}

TEST(World, DormantNodesStayOffAir) {
  auto cfg = fig2();
  SimOptions opts;
  opts.record_mac_trace = true;
  World w(cfg, opts);
  const auto& m = w.run(400);
  std::set<std::pair<std::size_t, std::size_t>> dormant;
  for (const auto& r : m.slot_reports) {
    if (r.delta == 0.0) dormant.insert({r.slot, r.node});
  }
  ASSERT_FALSE(dormant.empty());
  const double slot_ms = cfg.slot_duration_s * 1000.0;
  for (const auto& e : m.mac_trace) {
    const auto slot = static_cast<std::size_t>(e.time_ms / slot_ms);
    // sends that began in the previous slot may spill over the boundary
    if (std::fmod(e.time_ms, slot_ms) < 1000.0) continue;
    EXPECT_FALSE(dormant.count({slot, e.node})) << "node " << e.node << " sent '" << e.event
                                                << "' in dormant slot " << slot;
  }
}

TEST(World, StarvedNetworkDoesNothing) {
  auto cfg = fig2();
  for (auto& p : cfg.profiles) p.synthetic->amplitude_w = 0.0;
  cfg.energy.initial_fraction = cfg.energy.floor_fraction;
  const auto m = simulate(cfg, 5);
  for (const auto& r : m.slot_reports) {
    EXPECT_EQ(r.ops_node + r.ops_network, 0u) << "slot " << r.slot << " node " << r.node;
  }
  EXPECT_EQ(m.generated, 0u);
}

TEST(World, SteadyHarvestRunsFullPolicy) {
  const auto dir = std::filesystem::temp_directory_path() / "zen_sim_steady";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "steady.csv");
    f << "slot,power_watts\n0,0.0001\n";
  }
  scenario::ScenarioConfig cfg;
  cfg.profiles.push_back({"steady", ProfileKind::Synthetic, "steady.csv", std::nullopt, 1.0});
  cfg.nodes.push_back({0, "sink", scenario::Role::Sink, 8.0, 0.0, "utility", {}});
  cfg.nodes.push_back({1, "n", scenario::Role::Relay, 0.0, 0.0, "steady",
                       {{"a", {"sense", "average50"}, 0, 5}, {"b", {"flash-write-byte"}, 1, 20}}});
  cfg.energy.capacity_uj = 5000.0;
  SimOptions opts;
  opts.base_dir = dir.string();
  const auto m = simulate(cfg, 50, opts);
  for (const auto& r : m.slot_reports) {
    if (r.node == 1) EXPECT_EQ(r.ops_node, 30u) << "slot " << r.slot;
  }
}

TEST(World, DirectSunRelayCarriesMostTraffic) {
  const auto m = simulate(fig2(), 2000);
  const auto b = m.forwarding_slots.count(1) ? m.forwarding_slots.at(1) : 0;
  const auto c = m.forwarding_slots.count(2) ? m.forwarding_slots.at(2) : 0;
  EXPECT_GT(b, c);
}

TEST(World, SameSeedSameOutputs) {
  auto run = [] {
    SimOptions o;
    o.record_mac_trace = true;
    const auto m = simulate(fig2(), 150, o);
    std::ostringstream os;
    write_slot_reports(os, m);
    write_ledger(os, m);
    write_route_log(os, m);
    write_mac_trace(os, m);
    write_forecasts(os, m);
    os << summary_json(m, fig2());
    return os.str();
  };
  EXPECT_EQ(run(), run());
}

TEST(World, DifferentSeedsDiffer) {
  auto a = fig2(), b = fig2();
  b.seed = 2;
  EXPECT_NE(simulate(a, 200).delivered, simulate(b, 200).delivered);
}

TEST(World, ModifiedDeliversAtLeastBaseline) {
  auto cfg = fig2();
  const double mod = simulate(cfg, 1000).pdr();
  cfg.routing.mode = routing::RouteMode::Baseline;
  const double base = simulate(cfg, 1000).pdr();
  EXPECT_GE(mod, base);
}

TEST(World, SourceLearnsRouteThroughARelay) {
  World w(fig2());
  w.run(20);
  const auto* r = w.route(3, 0);
  ASSERT_NE(r, nullptr);
  EXPECT_TRUE(r->next_hop == 1 || r->next_hop == 2);
  EXPECT_GT(w.metrics().delivered, 0u);
}

TEST(World, ForecastSeriesCoversHarvestingNodes) {
  const auto m = simulate(fig2(), 50);
  EXPECT_EQ(m.forecasts.size(), 49u * 3);
  for (const auto& f : m.forecasts) EXPECT_GE(f.predicted, 0.0);
}

TEST(Outputs, SummaryJsonFields) {
  const auto cfg = fig2();
  const auto m = simulate(cfg, 30);
  const auto j = nlohmann::json::parse(summary_json(m, cfg));
  EXPECT_EQ(j["seed"], cfg.seed);
  EXPECT_EQ(j["generated"], m.generated);
  EXPECT_DOUBLE_EQ(j["pdr"].get<double>(), m.pdr());
  EXPECT_EQ(j["config_hash"], scenario::hash_hex(scenario::config_hash(cfg)));
  EXPECT_EQ(scenario::parse_scenario(j["config"].dump()), cfg);
}

TEST(Outputs, CsvHeaders) {
  Metrics m;
  std::ostringstream a, b, c;
  write_ledger(a, m);
  write_forecasts(b, m);
  write_slot_reports(c, m);
  EXPECT_EQ(a.str(), "slot,node,stored_begin_uJ,harvested_uJ,wasted_uJ,consumed_uJ,stored_end_uJ\n");
  EXPECT_EQ(b.str(), "slot,node,predicted_uJ,actual_uJ\n");
  EXPECT_EQ(c.str().rfind("slot,node,own_level", 0), 0u);
  EXPECT_EQ(m.pdr(), 0.0);
}

}  // namespace
}  // namespace zen::sim
