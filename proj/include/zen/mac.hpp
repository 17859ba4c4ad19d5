#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zen/energy.hpp"
#include "zen/rng.hpp"

namespace zen::mac {

enum class DutyMode { Formula, Table };

std::string_view to_string(DutyMode m);
DutyMode duty_mode_from_string(std::string_view s);

struct MacConfig {
  double cca_threshold_dbm = -77.0;
  double backoff_initial_ms = 1.25;
  int max_backoff_attempts = 5;
  int arq_retries = 3;
  bool rts_cts = false;
  double preamble_ms = 1.0;
  double wake_ms = 5.0;
  /// 128 B at 250 kb/s
  double data_ms = 4.096;
  double ack_ms = 0.5;
  DutyMode duty_mode = DutyMode::Formula;

  void validate() const;
  bool operator==(const MacConfig&) const = default;
};

struct DutySchedule {
  double wake_ms = 0.0;
  double sleep_ms = 0.0;
  bool radio_off = true;

  double period_ms() const { return wake_ms + sleep_ms; }
  double duty_fraction() const;
  bool always_on() const { return !radio_off && sleep_ms <= 0.0; }
};

/// Formula mode: sleep = w(1 - delta)/delta. Table mode snaps down to the nearest of
/// 0.05/0.15/0.25 and uses sleeps of 100/35/20 ms. delta = 0 turns the radio off and
/// delta = 1 keeps it on.
DutySchedule schedule_from_delta(double delta, const MacConfig& cfg);

/// Sleep of the sparsest schedule a node with network work can have; senders that know
/// nothing about the receiver size trains for it.
double longest_sleep_ms(const MacConfig& cfg, double delta_floor = 0.05);

struct PreambleTrain {
  int count = 1;
  double packet_ms = 1.0;
  std::uint32_t receiver = 0;
  double duration_ms() const { return count * packet_ms; }
};

PreambleTrain preamble_train(double receiver_sleep_ms, const MacConfig& cfg,
                             std::uint32_t receiver = 0);

enum class ChannelState { Idle, Busy };
ChannelState cca(double sampled_dbm, const MacConfig& cfg);

/// Contention window of the k-th backoff (1-based).
double backoff_window_ms(int attempt, const MacConfig& cfg);

/// First instant >= t at which a receiver with this schedule is listening. Wake
/// windows start at origin + k * period. Empty when the radio is off.
std::optional<double> next_wake(const DutySchedule& s, double origin_ms, double t_ms);

struct RadioEnergyModel {
  std::map<int, double> tx_ma{{0, 25.8}, {-5, 23.1}, {-10, 20.5}};
  double rx_ma = 18.5;
  double idle_ma = 22.3;
  double sleep_ma = 0.001;
  double voltage = 3.0;

  double tx_current(int dbm) const;
  bool operator==(const RadioEnergyModel&) const = default;
};

struct RadioDurations {
  double tx_ms = 0.0;
  double rx_ms = 0.0;
  double idle_ms = 0.0;
  double sleep_ms = 0.0;
  int tx_dbm = 0;
};

/// mA x V x ms = uJ
EnergyAmount radio_energy(const RadioDurations& d, const RadioEnergyModel& m);

struct MacEvent {
  double time_ms = 0.0;
  std::uint32_t node = 0;
  std::string event;
  std::string detail;
};

enum class SendStatus { Delivered, ChannelSaturated, NoAck };
std::string_view to_string(SendStatus s);

struct SendRequest {
  std::uint32_t sender = 0;
  std::uint32_t receiver = 0;
  double start_ms = 0.0;
  int tx_dbm = 0;
  /// Sleep the first train is sized for; retries use `retry_sleep_ms`.
  double sized_sleep_ms = 0.0;
  double retry_sleep_ms = 0.0;
  DutySchedule receiver_schedule;
  double receiver_origin_ms = 0.0;
};

/// What the sender's environment answers during a send.
struct LinkHooks {
  std::function<bool(double t_ms)> channel_busy = [](double) { return false; };
  /// Whether the data frame (sent at t) arrives and is acknowledged.
  std::function<bool(double t_ms)> delivered = [](double) { return true; };
};

struct SendOutcome {
  SendStatus status = SendStatus::NoAck;
  int attempts = 0;
  /// Data frames actually put on air (one per rendezvous).
  int data_frames = 0;
  int preamble_packets = 0;
  double finish_ms = 0.0;
  /// Receiver-side time at which the last data frame finished arriving.
  double arrival_ms = 0.0;
  RadioDurations radio;
  std::vector<MacEvent> trace;
  /// Airtime intervals the sender occupied, for other nodes' carrier sense.
  std::vector<std::pair<double, double>> airtime;
};

/// CSMA with binary exponential backoff, a preamble train, optional RTS/CTS, data and
/// ack, retried up to arq_retries times.
SendOutcome csma_send(const SendRequest& req, const MacConfig& cfg, const LinkHooks& link, Rng& rng);

void write_mac_trace_header(std::ostream& os);
void write_mac_trace_row(std::ostream& os, const MacEvent& e);

}  // namespace zen::mac
