#include "zen/energy.hpp"

#include <algorithm>
#include <cmath>

namespace zen {

EnergyAmount::EnergyAmount(double microjoules) : value_(microjoules) {
  if (!std::isfinite(microjoules) || microjoules < 0.0) {
    throw InvalidEnergy("energy must be finite and non-negative, got " +
                        std::to_string(microjoules));
  }
}

EnergyAmount EnergyAmount::operator-(EnergyAmount other) const {
  if (other.value_ > value_) {
    throw InvalidEnergy("energy subtraction would go negative");
  }
  return EnergyAmount(value_ - other.value_);
}

std::string_view to_string(EnergyLevel level) {
  switch (level) {
    case EnergyLevel::E0: return "E0";
    case EnergyLevel::E1: return "E1";
    case EnergyLevel::E2: return "E2";
    case EnergyLevel::E3: return "E3";
  }
  return "?";
}

EnergyLevel level_from_int(int v) {
  if (v < 0 || v > 3) throw InvalidArgument("energy level out of range: " + std::to_string(v));
  return static_cast<EnergyLevel>(v);
}

LevelThresholds::LevelThresholds(double t1, double t2, double t3) : bounds_{t1, t2, t3} {
  if (!(t1 > 0.0 && t1 < t2 && t2 < t3 && t3 < 1.0)) {
    throw InvalidArgument("level thresholds must be strictly ascending inside (0,1)");
  }
}

EnergyLevel classify_level(EnergyAmount e, EnergyAmount capacity, const LevelThresholds& t) {
  if (capacity.microjoules() <= 0.0) return EnergyLevel::E0;
  const double frac = e.microjoules() / capacity.microjoules();
  const auto& b = t.boundaries();
  if (frac < b[0]) return EnergyLevel::E0;
  if (frac < b[1]) return EnergyLevel::E1;
  if (frac < b[2]) return EnergyLevel::E2;
  return EnergyLevel::E3;
}

EnergyStore::EnergyStore(EnergyAmount capacity, EnergyAmount stored, LevelThresholds thresholds)
    : capacity_(capacity), stored_(stored), thresholds_(thresholds) {
  if (stored_ > capacity_) throw InvalidEnergy("stored energy exceeds capacity");
}

DepositResult EnergyStore::deposit(EnergyAmount e) const {
  const double room = capacity_.microjoules() - stored_.microjoules();
  EnergyStore next = *this;
  if (e.microjoules() <= room) {
    next.stored_ = stored_ + e;
    // rounding can push a near-full store past capacity
    if (next.stored_ > capacity_) next.stored_ = capacity_;
    return {next, EnergyAmount{}};
  }
  next.stored_ = capacity_;
  return {next, EnergyAmount(e.microjoules() - room)};
}

bool EnergyStore::can_withdraw(EnergyAmount e, EnergyAmount floor) const {
  return stored_.microjoules() - e.microjoules() >= floor.microjoules();
}

EnergyStore EnergyStore::withdraw(EnergyAmount e, EnergyAmount floor) const {
  if (!can_withdraw(e, floor)) {
    throw InsufficientEnergy("withdraw of " + std::to_string(e.microjoules()) +
                             " uJ would breach floor " + std::to_string(floor.microjoules()));
  }
  EnergyStore next = *this;
  next.stored_ = stored_ - e;
  return next;
}

EnergyAmount available_energy(const EnergyStore& store, EnergyAmount harvested) {
  return std::min(store.stored() + harvested, store.capacity());
}

std::string_view to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::Direct: return "direct";
    case ProfileKind::Diffused: return "diffused";
    case ProfileKind::Reflected: return "reflected";
    case ProfileKind::Synthetic: return "synthetic";
  }
  return "?";
}

ProfileKind profile_kind_from_string(std::string_view name) {
  if (name == "direct") return ProfileKind::Direct;
  if (name == "diffused") return ProfileKind::Diffused;
  if (name == "reflected") return ProfileKind::Reflected;
  if (name == "synthetic") return ProfileKind::Synthetic;
  throw InvalidArgument("unknown profile kind: " + std::string(name));
}

HarvestTrace::HarvestTrace(std::vector<HarvestSample> samples, ProfileKind kind, double scale)
    : samples_(std::move(samples)), kind_(kind), scale_(scale) {
  if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw InvalidArgument("trace scale must be positive");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].power_watts < 0.0 || !std::isfinite(samples_[i].power_watts)) {
      throw NegativePower("negative or non-finite power at sample " + std::to_string(i));
    }
    if (i > 0 && samples_[i].slot <= samples_[i - 1].slot) {
      throw InvalidArgument("trace slot indices must strictly increase");
    }
  }
}

HarvestTrace HarvestTrace::dense(const std::vector<double>& powers, ProfileKind kind, double scale) {
  std::vector<HarvestSample> samples;
  samples.reserve(powers.size());
  for (std::size_t i = 0; i < powers.size(); ++i) samples.push_back({i, powers[i]});
  return HarvestTrace(std::move(samples), kind, scale);
}

HarvestTrace HarvestTrace::with_scale(double scale) const {
  return HarvestTrace(samples_, kind_, scale);
}

double HarvestTrace::power_at(std::size_t slot) const {
  if (samples_.empty() || slot > samples_.back().slot) {
    throw SlotOutOfRange("slot " + std::to_string(slot) + " beyond end of trace");
  }
  auto it = std::upper_bound(samples_.begin(), samples_.end(), slot,
                             [](std::size_t s, const HarvestSample& h) { return s < h.slot; });
  if (it == samples_.begin()) {
    throw SlotOutOfRange("slot " + std::to_string(slot) + " precedes first trace sample");
  }
  return std::prev(it)->power_watts;
}

EnergyAmount harvest_in_slot(const HarvestTrace& trace, std::size_t slot, double slot_duration_s) {
  if (!(slot_duration_s >= 0.0)) throw InvalidArgument("slot duration must be non-negative");
  // W * s = J; 1 J = 1e6 uJ
  return EnergyAmount(trace.power_at(slot) * slot_duration_s * trace.scale() * 1e6);
}

std::string_view to_string(OperationKind kind) {
  switch (kind) {
    case OperationKind::Sense: return "sense";
    case OperationKind::Average50: return "average50";
    case OperationKind::Peak50: return "peak50";
    case OperationKind::FlashWriteByte: return "flash-write-byte";
    case OperationKind::FlashReadByte: return "flash-read-byte";
    case OperationKind::Transmit: return "transmit";
    case OperationKind::Forward: return "forward";
    case OperationKind::Receive: return "receive";
  }
  return "?";
}

OperationKind operation_from_string(std::string_view name) {
  static constexpr OperationKind kAll[] = {
      OperationKind::Sense,         OperationKind::Average50, OperationKind::Peak50,
      OperationKind::FlashWriteByte, OperationKind::FlashReadByte, OperationKind::Transmit,
      OperationKind::Forward,       OperationKind::Receive};
  for (auto k : kAll) {
    if (to_string(k) == name) return k;
  }
  throw UnknownOperation("unknown operation: " + std::string(name));
}

bool is_network(OperationKind kind) {
  return kind == OperationKind::Transmit || kind == OperationKind::Forward ||
         kind == OperationKind::Receive;
}

bool uses_tx_power(OperationKind kind) {
  return kind == OperationKind::Transmit || kind == OperationKind::Forward;
}

OperationCostTable OperationCostTable::mote_defaults() {
  OperationCostTable t;
  t.set(OperationKind::Average50, EnergyAmount(7.056));
  t.set(OperationKind::Peak50, EnergyAmount(7.392));
  t.set(OperationKind::Sense, EnergyAmount(20.30));
  t.set(OperationKind::FlashWriteByte, EnergyAmount(1.23));
  t.set(OperationKind::FlashReadByte, EnergyAmount(0.3));
  t.set(OperationKind::Receive, EnergyAmount(400.0));
  // CC2520 tx current: 25.8 mA at 0 dBm, interpolated toward 16.2 mA at -18 dBm.
  constexpr double kTx0 = 341.0;
  constexpr double kCurrent0 = 25.8;
  t.set_transmit(0, EnergyAmount(kTx0));
  t.set_transmit(-5, EnergyAmount(kTx0 * 23.1 / kCurrent0));
  t.set_transmit(-10, EnergyAmount(kTx0 * 20.5 / kCurrent0));
  return t;
}

void OperationCostTable::set(OperationKind kind, EnergyAmount cost) {
  if (cost.microjoules() <= 0.0) throw InvalidArgument("operation costs must be positive");
  if (uses_tx_power(kind)) {
    throw InvalidArgument("transmit costs are set per power level");
  }
  fixed_[kind] = cost;
}

void OperationCostTable::set_transmit(int dbm, EnergyAmount cost) {
  if (cost.microjoules() <= 0.0) throw InvalidArgument("operation costs must be positive");
  transmit_[dbm] = cost;
}

EnergyAmount OperationCostTable::cost(OperationKind kind, int tx_dbm) const {
  if (uses_tx_power(kind)) {
    auto it = transmit_.find(tx_dbm);
    if (it == transmit_.end()) {
      throw UnknownOperation("no transmit cost for " + std::to_string(tx_dbm) + " dBm");
    }
    return it->second;
  }
  auto it = fixed_.find(kind);
  if (it == fixed_.end()) throw UnknownOperation("no cost for " + std::string(to_string(kind)));
  return it->second;
}

EnergyAmount op_cost(const OperationCostTable& table, OperationKind op, int tx_dbm) {
  return table.cost(op, tx_dbm);
}

}  // namespace zen
