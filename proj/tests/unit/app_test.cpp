#include "zen/app.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

namespace zen::app {
namespace {

using Op = OperationKind;

const OperationCostTable kTable = OperationCostTable::mote_defaults();

Policy make_policy(std::string id, std::vector<Op> kinds, int priority, int repeat = 1) {
  Policy p;
  p.id = std::move(id);
  for (Op k : kinds) p.ops.push_back(Operation::of(k));
  p.priority = priority;
  p.repeat = repeat;
  return p;
}

std::vector<Policy> source_policies() {
  return {make_policy("sense_tx", {Op::Sense, Op::Transmit}, 0, 5),
          make_policy("aggregate", {Op::Sense, Op::Average50, Op::FlashWriteByte}, 1, 2),
          make_policy("log", {Op::FlashReadByte, Op::Peak50}, 2, 3)};
}

EnergyStore store_at(double frac, double cap_uj = 100000.0) {
  return EnergyStore(EnergyAmount(cap_uj), EnergyAmount(cap_uj * frac));
}

TEST(Operation, ClassFollowsKind) {
  EXPECT_EQ(Operation::of(Op::Sense).op_class, OpClass::NodeOwn);
  EXPECT_EQ(Operation::of(Op::Forward).op_class, OpClass::Network);
  EXPECT_TRUE(make_policy("p", {Op::Sense, Op::Transmit}, 0).is_network());
  EXPECT_FALSE(make_policy("p", {Op::Sense}, 0).is_network());
}

TEST(Policy, CostAndValidation) {
  const auto p = make_policy("p", {Op::Sense, Op::Transmit}, 0, 2);
  EXPECT_NEAR(p.cost(kTable, 0).microjoules(), 2 * 361.30, 1e-9);
  EXPECT_EQ(p.instance_count(), 4u);
  EXPECT_THROW(make_policy("empty", {}, 0).validate(), InvalidArgument);
  EXPECT_THROW(make_policy("r", {Op::Sense}, 0, 0).validate(), InvalidArgument);
}

TEST(AssessSlot, Examples) {
  const double cap = 100000.0;
  auto ctx = assess_slot(store_at(1.0), 0_uJ, {cap, cap}, {EnergyLevel::E3});
  EXPECT_EQ(ctx, (EnergyContext{EnergyLevel::E3, EnergyLevel::E3, EnergyLevel::E3}));

  ctx = assess_slot(store_at(0.25), 0_uJ, {0.05 * cap, 0.2 * cap},
                    {EnergyLevel::E2, EnergyLevel::E1});
  EXPECT_EQ(ctx, (EnergyContext{EnergyLevel::E1, EnergyLevel::E0, EnergyLevel::E1}));

  ctx = assess_slot(store_at(0.5), 0_uJ, {cap, cap}, {});
  EXPECT_EQ(ctx.network, EnergyLevel::E1);

  EXPECT_THROW(assess_slot(store_at(0.5), 0_uJ, {}, {}), InvalidArgument);
}

TEST(AssessSlot, HarvestCountsTowardOwnLevel) {
  // 35% stored + 40% harvested lands in E3
  const auto ctx = assess_slot(store_at(0.35), 40000_uJ, {1e9}, {});
  EXPECT_EQ(ctx.own, EnergyLevel::E3);
}

TEST(ComputeBudget, Examples) {
  const EnergyStore s(100_mJ, 50_mJ);
  BudgetConfig cfg;
  cfg.floor = 10_mJ;
  EnergyContext ctx{EnergyLevel::E2, EnergyLevel::E3, EnergyLevel::E3};
  EXPECT_NEAR(compute_budget(ctx, s, 0_uJ, cfg).millijoules(), 40.0, 1e-9);
  ctx.virtual_level = EnergyLevel::E0;
  EXPECT_NEAR(compute_budget(ctx, s, 0_uJ, cfg).millijoules(), 20.0, 1e-9);
  const EnergyStore at_floor(100_mJ, 10_mJ);
  EXPECT_EQ(compute_budget(ctx, at_floor, 0_uJ, cfg).microjoules(), 0.0);
}

TEST(ComputeBudget, NetworkLevelDoesNotMatter) {
  const EnergyStore s(100_mJ, 80_mJ);
  BudgetConfig cfg;
  cfg.floor = 10_mJ;
  EnergyContext a{EnergyLevel::E3, EnergyLevel::E2, EnergyLevel::E3};
  EnergyContext b = a;
  b.network = EnergyLevel::E0;
  EXPECT_EQ(compute_budget(a, s, 0_uJ, cfg), compute_budget(b, s, 0_uJ, cfg));
}

TEST(SelectSubset, PrefixRule) {
  const std::vector<Policy> one{make_policy("p", {Op::Sense, Op::Average50, Op::Peak50}, 0)};
  EXPECT_EQ(select_subset(one, {1.0}).size(), 3u);
  const auto half = select_subset(one, {0.5});
  ASSERT_EQ(half.size(), 1u);
  EXPECT_EQ(half[0].op.kind, Op::Sense);
  EXPECT_TRUE(select_subset(one, {0.0}).empty());
  EXPECT_THROW(select_subset(one, {1.5}), InvalidArgument);
  EXPECT_THROW(select_subset(one, {}), DimensionMismatch);
}

TEST(SelectSubset, PriorityOrder) {
  const std::vector<Policy> ps{make_policy("late", {Op::Peak50}, 2),
                               make_policy("early", {Op::Sense}, 0)};
  const auto out = select_subset(ps, {1.0, 1.0});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].policy_id, "early");
  EXPECT_EQ(out[1].policy_id, "late");
}

TEST(ExecutePlan, SenseAndTransmit) {
  ExecutionPlan plan;
  plan.run = {{Operation::of(Op::Sense), "p", 0, false}, {Operation::of(Op::Transmit), "p", 0, false}};
  const EnergyStore s(100_mJ, 50_mJ);
  const auto r = execute_plan(plan, s, 10_mJ, kTable, 0);
  EXPECT_NEAR(r.report.consumed_uj, 361.30, 1e-9);
  EXPECT_NEAR(s.stored().microjoules() - r.store.stored().microjoules(), 361.30, 1e-9);
  EXPECT_EQ(r.report.ops_node, 1u);
  EXPECT_EQ(r.report.ops_network, 1u);
  ASSERT_EQ(r.charges.size(), 2u);
  EXPECT_EQ(r.charges[0], kTable.cost(Op::Sense).microjoules());
  EXPECT_EQ(r.charges[1], kTable.cost(Op::Transmit, 0).microjoules());
}

TEST(ExecutePlan, EmptyPlan) {
  const EnergyStore s(100_mJ, 50_mJ);
  const auto r = execute_plan(ExecutionPlan{}, s, 10_mJ, kTable, 0);
  EXPECT_EQ(r.report.consumed_uj, 0.0);
  EXPECT_EQ(r.report.ops_node + r.report.ops_network, 0u);
  EXPECT_EQ(r.store.stored(), s.stored());
}

TEST(ExecutePlan, AbortsAtFloor) {
  ExecutionPlan plan;
  for (int i = 0; i < 4; ++i) plan.run.push_back({Operation::of(Op::Receive), "r", 0, false});
  const EnergyStore s(100_mJ, EnergyAmount(10000.0 + 900.0));
  const auto r = execute_plan(plan, s, 10_mJ, kTable, 0);
  EXPECT_EQ(r.report.ops_network, 2u);
  EXPECT_EQ(r.aborted.size(), 2u);
  EXPECT_GE(r.store.stored(), 10_mJ);
}

TEST(ExecutePlan, NetworkSkippedWhenChargedElsewhere) {
  ExecutionPlan plan;
  plan.run = {{Operation::of(Op::Sense), "p", 0, false}, {Operation::of(Op::Transmit), "p", 0, false}};
  const auto r = execute_plan(plan, EnergyStore(100_mJ, 50_mJ), 10_mJ, kTable, 0, false);
  EXPECT_NEAR(r.report.consumed_uj, 20.30, 1e-12);
  EXPECT_EQ(r.report.ops_network, 0u);
}

TEST(Backlog, EvictsWorstRankOldestFirst) {
  Backlog b(3);
  auto entry = [](int prio) { return BacklogEntry{Operation::of(Op::Sense), "p", prio, 0, 0}; };
  b.push(entry(0), 1);
  b.push(entry(2), 1);
  b.push(entry(2), 2);
  b.push(entry(1), 3);
  ASSERT_EQ(b.evictions().size(), 1u);
  EXPECT_EQ(b.evictions()[0].entry.priority, 2);
  EXPECT_EQ(b.evictions()[0].entry.sequence, 1u);
  EXPECT_EQ(b.evictions()[0].slot, 3u);
  EXPECT_EQ(b.size(), 3u);
  EXPECT_THROW(Backlog(0), InvalidArgument);
}

TEST(Backlog, DrainOrderAndRefusal) {
  Backlog b;
  b.push({Operation::of(Op::Peak50), "x", 2, 0, 0}, 0);
  b.push({Operation::of(Op::Sense), "y", 0, 0, 0}, 0);
  b.push({Operation::of(Op::Average50), "z", 0, 0, 0}, 1);
  std::vector<std::string> seen;
  const auto got = b.drain([&](const BacklogEntry& e) {
    seen.push_back(e.policy_id);
    return e.policy_id != "z";
  });
  EXPECT_EQ(seen, (std::vector<std::string>{"y", "z", "x"}));
  ASSERT_EQ(got.size(), 2u);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b.entries()[0].policy_id, "z");
}

TEST(Backlog, ConservationUnderRandomTraffic) {
  std::mt19937_64 rng(7);
  Backlog b(16);
  std::size_t drained = 0;
  for (std::size_t slot = 0; slot < 500; ++slot) {
    const int n = static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      b.push({Operation::of(Op::Sense), "p", static_cast<int>(rng() % 3), 0, 0}, slot);
    }
    if (rng() % 4 == 0) {
      drained += b.drain([&](const BacklogEntry&) { return rng() % 2 == 0; }).size();
    }
  }
  EXPECT_EQ(b.pushed(), drained + b.size() + b.evictions().size());
  std::set<std::size_t> ids;
  for (const auto& e : b.entries()) ids.insert(e.sequence);
  for (const auto& e : b.evictions()) EXPECT_TRUE(ids.insert(e.entry.sequence).second);
}

PlanConfig plan_cfg() {
  PlanConfig c;
  c.duty_energy = 1000_uJ;
  return c;
}

TEST(PlanSlot, FullPolicyAtE3WithBacklogFirst) {
  const auto policies = source_policies();
  Backlog backlog;
  backlog.push({Operation::of(Op::Sense), "sense_tx", 0, 0, 0}, 0);
  const EnergyContext ctx{EnergyLevel::E3, EnergyLevel::E3, EnergyLevel::E3};
  const auto plan = plan_slot(ctx, 80_mJ, policies, backlog, plan_cfg(), kTable, 0);
  for (const auto& c : plan.chosen) EXPECT_DOUBLE_EQ(c.alpha, 1.0);
  std::size_t total = 0;
  for (const auto& p : policies) total += p.instance_count();
  ASSERT_EQ(plan.run.size(), total + 1);
  EXPECT_TRUE(plan.run.front().from_backlog);
  EXPECT_TRUE(plan.backlog_drained);
  EXPECT_TRUE(backlog.empty());
  EXPECT_TRUE(plan.defer.empty());
  EXPECT_NEAR(plan.delta, 0.25, 1e-12);
  EXPECT_LE(plan.planned_energy(kTable, 0, plan_cfg().duty_energy), 80000.0 + 1e-6);
}

TEST(PlanSlot, ZeroBudgetDefersEverything) {
  const auto policies = source_policies();
  Backlog backlog;
  const EnergyContext ctx{EnergyLevel::E1, EnergyLevel::E1, EnergyLevel::E1};
  const auto plan = plan_slot(ctx, 0_uJ, policies, backlog, plan_cfg(), kTable, 0);
  EXPECT_TRUE(plan.run.empty());
  std::size_t total = 0;
  for (const auto& p : policies) total += p.instance_count();
  EXPECT_EQ(plan.defer.size(), total);
  EXPECT_EQ(plan.delta, 0.0);
}

TEST(PlanSlot, NetworkLevelE0ExcludesNetworkPolicies) {
  const auto policies = source_policies();
  Backlog backlog;
  const EnergyContext ctx{EnergyLevel::E3, EnergyLevel::E3, EnergyLevel::E0};
  const auto plan = plan_slot(ctx, 80_mJ, policies, backlog, plan_cfg(), kTable, 0);
  for (const auto& p : plan.run) EXPECT_EQ(p.op.op_class, OpClass::NodeOwn);
  for (const auto& c : plan.chosen) EXPECT_FALSE(policies[c.index].is_network());
  EXPECT_EQ(plan.delta, 0.0);
}

TEST(PlanSlot, InfeasibleSolverDefersAll) {
  const auto policies = source_policies();
  Backlog backlog;
  const EnergyContext ctx{EnergyLevel::E3, EnergyLevel::E3, EnergyLevel::E3};
  const LpSolver refuse = [](const PolicyLp&, EnergyAmount) -> OptResult {
    throw Infeasible("test");
  };
  const auto plan = plan_slot(ctx, 80_mJ, policies, backlog, plan_cfg(), kTable, 0, refuse);
  EXPECT_TRUE(plan.infeasible);
  EXPECT_TRUE(plan.run.empty());
  EXPECT_FALSE(plan.defer.empty());
}

TEST(PlanSlot, VirtualE0MorphsToStrictSubset) {
  const auto policies = source_policies();
  const EnergyStore s(100_mJ, 14_mJ);
  BudgetConfig bc;
  bc.floor = 10_mJ;
  EnergyContext ctx{EnergyLevel::E3, EnergyLevel::E3, EnergyLevel::E3};
  Backlog b1, b2;
  const auto full = plan_slot(ctx, compute_budget(ctx, s, 0_uJ, bc), policies, b1, plan_cfg(), kTable, 0);
  ctx.virtual_level = EnergyLevel::E0;
  const auto morphed =
      plan_slot(ctx, compute_budget(ctx, s, 0_uJ, bc), policies, b2, plan_cfg(), kTable, 0);
  EXPECT_LT(morphed.run.size(), full.run.size());
}

TEST(PlanSlot, MorphingIsMonotoneInVirtualLevel) {
  const auto policies = source_policies();
  BudgetConfig bc;
  bc.floor = 10_mJ;
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const double stored = 10000.0 + static_cast<double>(rng() % 90000);
    const EnergyStore s(100_mJ, EnergyAmount(stored));
    const auto own = s.level();
    const auto net = level_from_int(static_cast<int>(rng() % 4));
    std::size_t prev = SIZE_MAX;
    for (int v = 3; v >= 0; --v) {
      const EnergyContext ctx{own, level_from_int(v), net};
      Backlog b;
      b.push({Operation::of(Op::Sense), "sense_tx", 0, 0, 0}, 0);
      const auto plan =
          plan_slot(ctx, compute_budget(ctx, s, 0_uJ, bc), policies, b, plan_cfg(), kTable, 0);
      EXPECT_LE(plan.run.size(), prev) << "trial " << trial << " virtual E" << v;
      prev = plan.run.size();
    }
  }
}

TEST(PlanSlot, BudgetSafety) {
  const auto policies = source_policies();
  BudgetConfig bc;
  bc.floor = 10_mJ;
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const EnergyStore s(100_mJ, EnergyAmount(static_cast<double>(rng() % 100000)));
    const EnergyContext ctx{s.level(), level_from_int(static_cast<int>(rng() % 4)),
                            level_from_int(static_cast<int>(rng() % 4))};
    Backlog b;
    for (int i = 0; i < 10; ++i) b.push({Operation::of(Op::Peak50), "log", 2, 0, 0}, 0);
    const auto x = compute_budget(ctx, s, 0_uJ, bc);
    const auto plan = plan_slot(ctx, x, policies, b, plan_cfg(), kTable, 0);
    EXPECT_LE(plan.planned_energy(kTable, 0, plan_cfg().duty_energy), x.microjoules() + 1e-6);
    const auto r = execute_plan(plan, s, bc.floor, kTable, 0);
    EXPECT_GE(r.store.stored().microjoules(), std::min(s.stored(), bc.floor).microjoules());
  }
}

TEST(SlotReport, CsvLayout) {
  std::ostringstream os;
  write_slot_report_header(os);
  SlotReport r;
  r.slot = 4;
  r.node = 2;
  r.ctx = {EnergyLevel::E3, EnergyLevel::E2, EnergyLevel::E1};
  r.alpha_mean = 0.5;
  r.delta = 0.25;
  r.ops_node = 3;
  r.ops_network = 1;
  r.consumed_uj = 361.3;
  r.residual_uj = 1000;
  write_slot_report_row(os, r);
  EXPECT_EQ(os.str(),
            "slot,node,own_level,virtual_level,network_level,alpha_mean,delta,ops_node,ops_network,"
            "consumed_uJ,residual_uJ\n4,2,E3,E2,E1,0.5,0.25,3,1,361.3,1000\n");
}

}  // namespace
}  // namespace zen::app
