#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "zen/energy.hpp"
#include "zen/optimizer.hpp"

namespace zen::app {

enum class OpClass { NodeOwn, Network };

struct Operation {
  OperationKind kind = OperationKind::Sense;
  OpClass op_class = OpClass::NodeOwn;

  static Operation of(OperationKind k) {
    return {k, is_network(k) ? OpClass::Network : OpClass::NodeOwn};
  }
  bool operator==(const Operation&) const = default;
};

/// An ordered operation sequence run `repeat` times per slot. Rank 0 is the most
/// important policy.
struct Policy {
  std::string id;
  std::vector<Operation> ops;
  int priority = 0;
  int repeat = 1;

  bool is_network() const;
  /// ops expanded by `repeat`, in execution order
  std::vector<Operation> instances() const;
  std::size_t instance_count() const { return ops.size() * static_cast<std::size_t>(repeat); }
  EnergyAmount cost(const OperationCostTable& table, int tx_dbm) const;
  void validate() const;
};

struct EnergyContext {
  EnergyLevel own = EnergyLevel::E0;
  EnergyLevel virtual_level = EnergyLevel::E0;
  EnergyLevel network = EnergyLevel::E1;
  bool operator==(const EnergyContext&) const = default;
};

/// Own level from E_A, virtual level from the smallest forecast (uJ) over the horizon,
/// network level as the minimum over neighbours (E1 when none were heard).
EnergyContext assess_slot(const EnergyStore& store, EnergyAmount harvested,
                          const std::vector<double>& forecasts,
                          const std::vector<EnergyLevel>& neighbor_levels);

struct BudgetConfig {
  /// Share of E_A held back per virtual level E0..E3.
  std::array<double, 4> reserve{0.40, 0.25, 0.10, 0.0};
  EnergyAmount floor;
};

/// X_k = E_A - reserve(virtual) * E_A - floor, clamped at zero.
EnergyAmount compute_budget(const EnergyContext& ctx, const EnergyStore& store,
                            EnergyAmount harvested, const BudgetConfig& cfg);

struct BacklogEntry {
  Operation op;
  std::string policy_id;
  int priority = 0;
  std::size_t enqueued_slot = 0;
  std::size_t sequence = 0;
};

struct Eviction {
  BacklogEntry entry;
  std::size_t slot = 0;
};

/// Bounded store of deferred operations. When full, the entry with the worst priority
/// rank goes first, the oldest among equals; every eviction is recorded.
class Backlog {
 public:
  explicit Backlog(std::size_t capacity = 64);

  void push(BacklogEntry e, std::size_t slot);
  /// Removes and returns entries in priority order (best rank, then oldest) while
  /// `accept` returns true for them; an entry that is refused stays queued and
  /// scanning moves on.
  std::vector<BacklogEntry> drain(const std::function<bool(const BacklogEntry&)>& accept);

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  const std::vector<BacklogEntry>& entries() const { return entries_; }
  const std::vector<Eviction>& evictions() const { return evictions_; }
  std::size_t pushed() const { return next_seq_; }

 private:
  std::size_t capacity_;
  std::vector<BacklogEntry> entries_;
  std::vector<Eviction> evictions_;
  std::size_t next_seq_ = 0;
};

struct PlannedOp {
  Operation op;
  std::string policy_id;
  int priority = 0;
  bool from_backlog = false;
};

struct PlannedPolicy {
  std::size_t index = 0;  // into the policy list given to plan_slot
  double alpha = 0.0;
};

struct ExecutionPlan {
  std::vector<PlannedPolicy> chosen;
  double delta = 0.0;
  std::vector<PlannedOp> run;
  std::vector<PlannedOp> defer;
  EnergyAmount budget;
  EnergyAmount v_target;
  bool backlog_drained = false;
  bool infeasible = false;

  /// Operation costs plus the duty-cycle energy.
  double planned_energy(const OperationCostTable& table, int tx_dbm, EnergyAmount duty_energy) const;
  double alpha_mean() const;
};

using LpSolver = std::function<OptResult(const PolicyLp&, EnergyAmount)>;

struct PlanConfig {
  EnergyAmount duty_energy{1000.0};
  /// Utility weight of the duty factor; empty means default_duty_weight.
  std::optional<double> duty_weight;
  /// Residual target as a share of X_k per own level E0..E3.
  std::array<double, 4> residual_fraction{0.5, 0.3, 0.1, 0.0};
  /// Highest duty factor per own level E0..E3.
  std::array<double, 4> delta_cap{0.0, 0.05, 0.15, 0.25};
  /// Smallest duty factor that still keeps a node reachable when it has network work.
  double delta_floor = 0.05;
};

/// Builds and solves the slot LP, then turns the morphing factors into a concrete
/// operation list. An infeasible LP defers every candidate operation.
ExecutionPlan plan_slot(const EnergyContext& ctx, EnergyAmount budget,
                        const std::vector<Policy>& policies, Backlog& backlog,
                        const PlanConfig& cfg, const OperationCostTable& table, int tx_dbm,
                        const LpSolver& solver = solve_for_v);

/// First floor(alpha_i * |P_i|) operation instances of each policy, policies taken in
/// priority order.
std::vector<PlannedOp> select_subset(const std::vector<Policy>& policies,
                                     const std::vector<double>& alphas);

struct SlotReport {
  std::size_t slot = 0;
  std::size_t node = 0;
  EnergyContext ctx;
  double alpha_mean = 0.0;
  double delta = 0.0;
  std::size_t ops_node = 0;
  std::size_t ops_network = 0;
  double consumed_uj = 0.0;
  double residual_uj = 0.0;
};

struct ExecutionResult {
  EnergyStore store;
  SlotReport report;
  std::vector<PlannedOp> aborted;
  /// Every individual charge, in order (uJ).
  std::vector<double> charges;
};

/// Charges each planned operation against the store. When a withdrawal would breach
/// the floor the remaining operations are aborted and returned for backlogging.
/// With `charge_network` false, network operations are skipped (the caller charges
/// them per radio event).
ExecutionResult execute_plan(const ExecutionPlan& plan, const EnergyStore& store,
                             EnergyAmount floor, const OperationCostTable& table, int tx_dbm,
                             bool charge_network = true);

void write_slot_report_header(std::ostream& os);
void write_slot_report_row(std::ostream& os, const SlotReport& r);

}  // namespace zen::app
