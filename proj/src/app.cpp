#include "zen/app.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace zen::app {

namespace {

std::size_t idx(EnergyLevel l) { return static_cast<std::size_t>(l); }

// policy indices ordered by rank, list position breaking ties
std::vector<std::size_t> by_priority(const std::vector<Policy>& policies,
                                     const std::vector<std::size_t>& subset) {
  std::vector<std::size_t> order = subset;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return policies[a].priority < policies[b].priority;
  });
  return order;
}

void defer_instances(const Policy& p, std::size_t from, std::vector<PlannedOp>& out) {
  const auto inst = p.instances();
  for (std::size_t k = from; k < inst.size(); ++k) out.push_back({inst[k], p.id, p.priority, false});
}

}  // namespace

bool Policy::is_network() const {
  return std::any_of(ops.begin(), ops.end(),
                     [](const Operation& o) { return o.op_class == OpClass::Network; });
}

std::vector<Operation> Policy::instances() const {
  std::vector<Operation> out;
  out.reserve(instance_count());
  for (int r = 0; r < repeat; ++r) out.insert(out.end(), ops.begin(), ops.end());
  return out;
}

EnergyAmount Policy::cost(const OperationCostTable& table, int tx_dbm) const {
  double per_pass = 0.0;
  for (const auto& o : ops) per_pass += table.cost(o.kind, tx_dbm).microjoules();
  return EnergyAmount(per_pass * repeat);
}

void Policy::validate() const {
  if (ops.empty()) throw InvalidArgument("policy '" + id + "' has no operations");
  if (repeat < 1) throw InvalidArgument("policy '" + id + "' needs repeat >= 1");
}

EnergyContext assess_slot(const EnergyStore& store, EnergyAmount harvested,
                          const std::vector<double>& forecasts,
                          const std::vector<EnergyLevel>& neighbor_levels) {
  if (forecasts.empty()) throw InvalidArgument("assess_slot needs at least one forecast");
  EnergyContext ctx;
  ctx.own = classify_level(available_energy(store, harvested), store.capacity(), store.thresholds());
  const double lowest = *std::min_element(forecasts.begin(), forecasts.end());
  const double clamped = std::clamp(lowest, 0.0, store.capacity().microjoules());
  ctx.virtual_level = classify_level(EnergyAmount(clamped), store.capacity(), store.thresholds());
  ctx.network = neighbor_levels.empty()
                    ? EnergyLevel::E1
                    : *std::min_element(neighbor_levels.begin(), neighbor_levels.end());
  return ctx;
}

EnergyAmount compute_budget(const EnergyContext& ctx, const EnergyStore& store,
                            EnergyAmount harvested, const BudgetConfig& cfg) {
  const double ea = available_energy(store, harvested).microjoules();
  const double x = ea * (1.0 - cfg.reserve[idx(ctx.virtual_level)]) - cfg.floor.microjoules();
  return EnergyAmount(std::max(0.0, x));
}

Backlog::Backlog(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw InvalidArgument("backlog capacity must be positive");
}

void Backlog::push(BacklogEntry e, std::size_t slot) {
  e.enqueued_slot = slot;
  e.sequence = next_seq_++;
  entries_.push_back(std::move(e));
  if (entries_.size() <= capacity_) return;
  // worst rank first, then oldest
  auto victim = std::max_element(entries_.begin(), entries_.end(),
                                 [](const BacklogEntry& a, const BacklogEntry& b) {
                                   if (a.priority != b.priority) return a.priority < b.priority;
                                   return a.sequence > b.sequence;
                                 });
  evictions_.push_back({*victim, slot});
  entries_.erase(victim);
}

std::vector<BacklogEntry> Backlog::drain(const std::function<bool(const BacklogEntry&)>& accept) {
  std::vector<std::size_t> order(entries_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (entries_[a].priority != entries_[b].priority) {
      return entries_[a].priority < entries_[b].priority;
    }
    return entries_[a].sequence < entries_[b].sequence;
  });
  std::vector<BacklogEntry> taken;
  std::vector<char> gone(entries_.size(), 0);
  for (std::size_t i : order) {
    if (accept(entries_[i])) {
      taken.push_back(entries_[i]);
      gone[i] = 1;
    }
  }
  std::vector<BacklogEntry> kept;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!gone[i]) kept.push_back(std::move(entries_[i]));
  }
  entries_ = std::move(kept);
  return taken;
}

double ExecutionPlan::planned_energy(const OperationCostTable& table, int tx_dbm,
                                     EnergyAmount duty_energy) const {
  double e = delta * duty_energy.microjoules();
  for (const auto& p : run) e += table.cost(p.op.kind, tx_dbm).microjoules();
  return e;
}

double ExecutionPlan::alpha_mean() const {
  if (chosen.empty()) return 0.0;
  double s = 0.0;
  for (const auto& c : chosen) s += c.alpha;
  return s / static_cast<double>(chosen.size());
}

std::vector<PlannedOp> select_subset(const std::vector<Policy>& policies,
                                     const std::vector<double>& alphas) {
  if (policies.size() != alphas.size()) {
    throw DimensionMismatch("one morphing factor per policy is required");
  }
  std::vector<std::size_t> all(policies.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<PlannedOp> out;
  for (std::size_t i : by_priority(policies, all)) {
    const double a = alphas[i];
    if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("morphing factor outside [0,1]");
    const auto inst = policies[i].instances();
    // the tiny slack keeps a*n from landing just under an integer through rounding
    const auto k = std::min(inst.size(), static_cast<std::size_t>(
                                             std::floor(a * static_cast<double>(inst.size()) + 1e-9)));
    for (std::size_t j = 0; j < k; ++j) {
      out.push_back({inst[j], policies[i].id, policies[i].priority, false});
    }
  }
  return out;
}

ExecutionPlan plan_slot(const EnergyContext& ctx, EnergyAmount budget,
                        const std::vector<Policy>& policies, Backlog& backlog,
                        const PlanConfig& cfg, const OperationCostTable& table, int tx_dbm,
                        const LpSolver& solver) {
  if (policies.empty()) throw InvalidArgument("plan_slot needs at least one policy");
  ExecutionPlan plan;
  plan.budget = budget;

  const bool network_ok = ctx.network != EnergyLevel::E0 && ctx.own != EnergyLevel::E0;
  std::vector<std::size_t> eligible, excluded;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    (network_ok || !policies[i].is_network() ? eligible : excluded).push_back(i);
  }

  auto defer_all = [&](const std::vector<std::size_t>& which) {
    for (std::size_t i : by_priority(policies, which)) defer_instances(policies[i], 0, plan.defer);
  };

  const double x = budget.microjoules();
  if (x <= 0.0 || eligible.empty()) {
    defer_all(eligible);
    defer_all(excluded);
    return plan;
  }

  auto build = [&](const std::vector<std::size_t>& which, bool with_network_floor) {
    std::vector<double> w;
    std::vector<EnergyAmount> c;
    for (std::size_t i : which) {
      w.push_back(static_cast<double>(policies[i].instance_count()));
      c.push_back(policies[i].cost(table, tx_dbm));
    }
    const double wd = cfg.duty_weight ? *cfg.duty_weight : default_duty_weight(w, c, cfg.duty_energy);
    PolicyLp lp = build_opt(std::move(w), std::move(c), cfg.duty_energy, wd, budget);
    const double cap = cfg.delta_cap[idx(ctx.own)];
    lp.delta_upper = cap;
    lp.delta_lower = with_network_floor ? std::min(cfg.delta_floor, cap) : 0.0;
    return lp;
  };

  const bool any_network = std::any_of(eligible.begin(), eligible.end(),
                                       [&](std::size_t i) { return policies[i].is_network(); });
  PolicyLp lp = build(eligible, any_network);
  if (!any_network) lp.delta_upper = 0.0;
  const double v_target = cfg.residual_fraction[idx(ctx.own)] * x;
  // residual target, moved just enough to keep the LP feasible
  auto residual_for = [&](const PolicyLp& p) {
    return std::min(std::max(v_target, x - p.max_spend()), x - p.min_spend());
  };
  double v = residual_for(lp);
  if (v < 0.0) {
    // cannot afford to stay reachable: drop network work and switch the radio off
    std::vector<std::size_t> own_only;
    for (std::size_t i : eligible) {
      (policies[i].is_network() ? excluded : own_only).push_back(i);
    }
    eligible = std::move(own_only);
    if (eligible.empty()) {
      defer_all(excluded);
      return plan;
    }
    lp = build(eligible, false);
    lp.delta_upper = 0.0;
    v = residual_for(lp);
  }
  plan.v_target = EnergyAmount(std::max(0.0, v));

  OptResult r;
  try {
    r = solver(lp, plan.v_target);
  } catch (const Infeasible&) {
    plan.infeasible = true;
    defer_all(eligible);
    defer_all(excluded);
    return plan;
  }

  plan.delta = r.delta;
  std::vector<Policy> chosen_policies;
  for (std::size_t k = 0; k < eligible.size(); ++k) {
    plan.chosen.push_back({eligible[k], r.alpha[k]});
    chosen_policies.push_back(policies[eligible[k]]);
  }
  plan.run = select_subset(chosen_policies, r.alpha);
  for (std::size_t k : by_priority(policies, eligible)) {
    const auto pos = static_cast<std::size_t>(std::find(eligible.begin(), eligible.end(), k) - eligible.begin());
    const auto n = policies[k].instance_count();
    const auto kept = std::min(n, static_cast<std::size_t>(
                                      std::floor(r.alpha[pos] * static_cast<double>(n) + 1e-9)));
    defer_instances(policies[k], kept, plan.defer);
  }
  defer_all(excluded);

  if (ctx.own == EnergyLevel::E3 && ctx.virtual_level == EnergyLevel::E3 && !backlog.empty()) {
    double left = x - plan.planned_energy(table, tx_dbm, cfg.duty_energy) - v_target;
    auto drained = backlog.drain([&](const BacklogEntry& e) {
      if (e.op.op_class == OpClass::Network && !network_ok) return false;
      const double c = table.cost(e.op.kind, tx_dbm).microjoules();
      if (c > left) return false;
      left -= c;
      return true;
    });
    std::vector<PlannedOp> front;
    for (auto& e : drained) front.push_back({e.op, e.policy_id, e.priority, true});
    plan.run.insert(plan.run.begin(), front.begin(), front.end());
    plan.backlog_drained = !drained.empty();
  }
  return plan;
}

ExecutionResult execute_plan(const ExecutionPlan& plan, const EnergyStore& store,
                             EnergyAmount floor, const OperationCostTable& table, int tx_dbm,
                             bool charge_network) {
  ExecutionResult res{store, {}, {}, {}};
  const double before = store.stored().microjoules();
  double consumed = 0.0;
  for (std::size_t i = 0; i < plan.run.size(); ++i) {
    const auto& p = plan.run[i];
    if (p.op.op_class == OpClass::Network && !charge_network) continue;
    const EnergyAmount c = table.cost(p.op.kind, tx_dbm);
    if (!res.store.can_withdraw(c, floor)) {
      for (std::size_t j = i; j < plan.run.size(); ++j) {
        if (plan.run[j].op.op_class == OpClass::Network && !charge_network) continue;
        res.aborted.push_back(plan.run[j]);
      }
      break;
    }
    res.store = res.store.withdraw(c, floor);
    res.charges.push_back(c.microjoules());
    consumed += c.microjoules();
    (p.op.op_class == OpClass::Network ? res.report.ops_network : res.report.ops_node) += 1;
  }
  res.report.alpha_mean = plan.alpha_mean();
  res.report.delta = plan.delta;
  res.report.consumed_uj = consumed;
  res.report.residual_uj = before - consumed;
  return res;
}

void write_slot_report_header(std::ostream& os) {
  os << "slot,node,own_level,virtual_level,network_level,alpha_mean,delta,ops_node,ops_network,"
        "consumed_uJ,residual_uJ\n";
}

void write_slot_report_row(std::ostream& os, const SlotReport& r) {
  os << r.slot << ',' << r.node << ',' << to_string(r.ctx.own) << ','
     << to_string(r.ctx.virtual_level) << ',' << to_string(r.ctx.network) << ',' << r.alpha_mean
     << ',' << r.delta << ',' << r.ops_node << ',' << r.ops_network << ',' << r.consumed_uj << ','
     << r.residual_uj << '\n';
}

}  // namespace zen::app
