#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "zen/errors.hpp"

namespace zen {

/// Non-negative, finite quantity of energy in microjoules.
class EnergyAmount {
 public:
  constexpr EnergyAmount() = default;
  explicit EnergyAmount(double microjoules);

  static EnergyAmount from_millijoules(double mj) { return EnergyAmount(mj * 1e3); }

  double microjoules() const { return value_; }
  double millijoules() const { return value_ * 1e-3; }

  EnergyAmount operator+(EnergyAmount other) const { return EnergyAmount(value_ + other.value_); }
  /// Throws InvalidEnergy when the result would be negative.
  EnergyAmount operator-(EnergyAmount other) const;
  EnergyAmount operator*(double factor) const { return EnergyAmount(value_ * factor); }
  EnergyAmount& operator+=(EnergyAmount other) { return *this = *this + other; }

  auto operator<=>(const EnergyAmount&) const = default;

 private:
  double value_ = 0.0;
};

inline EnergyAmount operator""_uJ(long double v) { return EnergyAmount(static_cast<double>(v)); }
inline EnergyAmount operator""_uJ(unsigned long long v) { return EnergyAmount(static_cast<double>(v)); }
inline EnergyAmount operator""_mJ(long double v) { return EnergyAmount(static_cast<double>(v) * 1e3); }
inline EnergyAmount operator""_mJ(unsigned long long v) { return EnergyAmount(static_cast<double>(v) * 1e3); }

/// Lowest survivable, minimum, intermediate, high.
enum class EnergyLevel : int { E0 = 0, E1 = 1, E2 = 2, E3 = 3 };

std::string_view to_string(EnergyLevel level);
EnergyLevel level_from_int(int v);

/// Three ascending fractions of capacity splitting [0, capacity] into E0..E3.
class LevelThresholds {
 public:
  LevelThresholds() : LevelThresholds(0.10, 0.40, 0.70) {}
  LevelThresholds(double t1, double t2, double t3);

  const std::array<double, 3>& boundaries() const { return bounds_; }
  bool operator==(const LevelThresholds&) const = default;

 private:
  std::array<double, 3> bounds_;
};

EnergyLevel classify_level(EnergyAmount e, EnergyAmount capacity, const LevelThresholds& t);

struct DepositResult;
struct WithdrawResult;

/// Supercapacitor ledger. Every update returns a new store; 0 <= stored <= capacity.
class EnergyStore {
 public:
  EnergyStore(EnergyAmount capacity, EnergyAmount stored = EnergyAmount{},
              LevelThresholds thresholds = {});

  EnergyAmount stored() const { return stored_; }
  EnergyAmount capacity() const { return capacity_; }
  const LevelThresholds& thresholds() const { return thresholds_; }
  EnergyLevel level() const { return classify_level(stored_, capacity_, thresholds_); }

  /// Absolute energy at a capacity fraction, e.g. the E0/E1 boundary.
  EnergyAmount fraction(double f) const { return capacity_ * f; }

  DepositResult deposit(EnergyAmount e) const;
  /// Throws InsufficientEnergy unless stored - e >= floor.
  EnergyStore withdraw(EnergyAmount e, EnergyAmount floor) const;
  bool can_withdraw(EnergyAmount e, EnergyAmount floor) const;

 private:
  EnergyAmount capacity_;
  EnergyAmount stored_;
  LevelThresholds thresholds_;
};

struct DepositResult {
  EnergyStore store;
  EnergyAmount wasted;
};

/// E_A = min(stored + harvested, capacity).
EnergyAmount available_energy(const EnergyStore& store, EnergyAmount harvested);

enum class ProfileKind { Direct, Diffused, Reflected, Synthetic };

std::string_view to_string(ProfileKind kind);
ProfileKind profile_kind_from_string(std::string_view name);

struct HarvestSample {
  std::size_t slot = 0;
  double power_watts = 0.0;
  bool operator==(const HarvestSample&) const = default;
};

/// Per-slot harvested power. Slot indices strictly increase and powers are >= 0.
class HarvestTrace {
 public:
  HarvestTrace() = default;
  HarvestTrace(std::vector<HarvestSample> samples, ProfileKind kind, double scale = 1.0);
  /// Convenience: dense trace with slot i = powers[i].
  static HarvestTrace dense(const std::vector<double>& powers, ProfileKind kind,
                            double scale = 1.0);

  const std::vector<HarvestSample>& samples() const { return samples_; }
  ProfileKind kind() const { return kind_; }
  double scale() const { return scale_; }
  std::size_t size() const { return samples_.size(); }
  HarvestTrace with_scale(double scale) const;

  /// Power for the slot (held constant until the next sample); SlotOutOfRange past the end.
  double power_at(std::size_t slot) const;

 private:
  std::vector<HarvestSample> samples_;
  ProfileKind kind_ = ProfileKind::Synthetic;
  double scale_ = 1.0;
};

/// power x duration x scale, rectangle rule over the slot.
EnergyAmount harvest_in_slot(const HarvestTrace& trace, std::size_t slot, double slot_duration_s);

enum class OperationKind {
  Sense,
  Average50,
  Peak50,
  FlashWriteByte,
  FlashReadByte,
  Transmit,  // 128 B at the node's current transmit power
  Forward,   // relaying a neighbour's 128 B packet
  Receive,   // 128 B
};

std::string_view to_string(OperationKind kind);
OperationKind operation_from_string(std::string_view name);
bool is_network(OperationKind kind);
bool uses_tx_power(OperationKind kind);

/// Energy per operation. Transmission cost depends on the transmit power level.
class OperationCostTable {
 public:
  /// Measured mote values: sense 20.30, average 7.056, peak 7.392, flash write 1.23,
  /// flash read 0.3, receive 400, transmit 341 at 0 dBm (uJ). Lower powers scale with
  /// radio current.
  static OperationCostTable mote_defaults();

  void set(OperationKind kind, EnergyAmount cost);
  void set_transmit(int dbm, EnergyAmount cost);

  /// Throws UnknownOperation when the kind (or the transmit power) has no entry.
  EnergyAmount cost(OperationKind kind, int tx_dbm = 0) const;
  bool operator==(const OperationCostTable&) const = default;

  const std::map<OperationKind, EnergyAmount>& fixed() const { return fixed_; }
  const std::map<int, EnergyAmount>& transmit() const { return transmit_; }

 private:
  std::map<OperationKind, EnergyAmount> fixed_;
  std::map<int, EnergyAmount> transmit_;
};

EnergyAmount op_cost(const OperationCostTable& table, OperationKind op, int tx_dbm = 0);

}  // namespace zen
