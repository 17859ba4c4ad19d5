#include "zen/mac.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace zen::mac {

std::string_view to_string(DutyMode m) { return m == DutyMode::Formula ? "formula" : "table"; }

DutyMode duty_mode_from_string(std::string_view s) {
  if (s == "formula") return DutyMode::Formula;
  if (s == "table") return DutyMode::Table;
  throw InvalidArgument("unknown duty mode '" + std::string(s) + "'");
}

void MacConfig::validate() const {
  if (!(backoff_initial_ms > 0.0)) throw InvalidArgument("backoff window must be positive");
  if (max_backoff_attempts < 1) throw InvalidArgument("need at least one backoff attempt");
  if (arq_retries < 0) throw InvalidArgument("arq retries must be >= 0");
  if (!(preamble_ms > 0.0)) throw InvalidArgument("preamble packet duration must be positive");
  if (!(wake_ms > 0.0)) throw InvalidArgument("wake window must be positive");
  if (!(data_ms > 0.0) || !(ack_ms >= 0.0)) throw InvalidArgument("bad frame durations");
}

double DutySchedule::duty_fraction() const {
  if (radio_off) return 0.0;
  if (sleep_ms <= 0.0) return 1.0;
  return wake_ms / period_ms();
}

DutySchedule schedule_from_delta(double delta, const MacConfig& cfg) {
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw InvalidArgument("duty factor " + std::to_string(delta) + " outside [0, 1]");
  }
  DutySchedule s;
  s.wake_ms = cfg.wake_ms;
  if (delta == 0.0) return s;
  s.radio_off = false;
  if (delta >= 1.0) return s;
  if (cfg.duty_mode == DutyMode::Formula) {
    s.sleep_ms = cfg.wake_ms * (1.0 - delta) / delta;
  } else if (delta >= 0.25) {
    s.sleep_ms = 20.0;
  } else if (delta >= 0.15) {
    s.sleep_ms = 35.0;
  } else {
    s.sleep_ms = 100.0;
  }
  return s;
}

double longest_sleep_ms(const MacConfig& cfg, double delta_floor) {
  return schedule_from_delta(delta_floor, cfg).sleep_ms;
}

PreambleTrain preamble_train(double receiver_sleep_ms, const MacConfig& cfg,
                             std::uint32_t receiver) {
  PreambleTrain t;
  t.packet_ms = cfg.preamble_ms;
  t.receiver = receiver;
  // the small slack keeps 95.000000001 / 1 from rounding up to 96
  t.count = std::max(1, static_cast<int>(std::ceil(receiver_sleep_ms / cfg.preamble_ms - 1e-9)));
  return t;
}

ChannelState cca(double sampled_dbm, const MacConfig& cfg) {
  return sampled_dbm >= cfg.cca_threshold_dbm ? ChannelState::Busy : ChannelState::Idle;
}

double backoff_window_ms(int attempt, const MacConfig& cfg) {
  if (attempt < 1) throw InvalidArgument("backoff attempts are 1-based");
  attempt = std::min(attempt, cfg.max_backoff_attempts);
  return cfg.backoff_initial_ms * std::ldexp(1.0, attempt - 1);
}

std::optional<double> next_wake(const DutySchedule& s, double origin_ms, double t_ms) {
  if (s.radio_off) return std::nullopt;
  if (s.sleep_ms <= 0.0) return t_ms;
  const double period = s.period_ms();
  const double k = std::floor((t_ms - origin_ms) / period);
  const double start = origin_ms + k * period;
  if (t_ms - start < s.wake_ms) return t_ms;
  return start + period;
}

double RadioEnergyModel::tx_current(int dbm) const {
  auto it = tx_ma.find(dbm);
  if (it == tx_ma.end()) throw UnknownOperation("no transmit current for " + std::to_string(dbm) + " dBm");
  return it->second;
}

EnergyAmount radio_energy(const RadioDurations& d, const RadioEnergyModel& m) {
  if (d.tx_ms < 0 || d.rx_ms < 0 || d.idle_ms < 0 || d.sleep_ms < 0) {
    throw InvalidArgument("radio durations must be non-negative");
  }
  const double tx = d.tx_ms > 0.0 ? d.tx_ms * m.tx_current(d.tx_dbm) : 0.0;
  const double ma_ms = tx + d.rx_ms * m.rx_ma + d.idle_ms * m.idle_ma + d.sleep_ms * m.sleep_ma;
  return EnergyAmount(ma_ms * m.voltage);
}

std::string_view to_string(SendStatus s) {
  switch (s) {
    case SendStatus::Delivered:
      return "delivered";
    case SendStatus::ChannelSaturated:
      return "channel_saturated";
    case SendStatus::NoAck:
      return "no_ack";
  }
  return "?";
}

SendOutcome csma_send(const SendRequest& req, const MacConfig& cfg, const LinkHooks& link, Rng& rng) {
  SendOutcome out;
  out.radio.tx_dbm = req.tx_dbm;
  double t = req.start_ms;
  auto log = [&](double at, const char* ev, std::string detail = {}) {
    out.trace.push_back({at, req.sender, ev, std::move(detail)});
  };
  auto transmit = [&](double dur) {
    out.airtime.emplace_back(t, t + dur);
    out.radio.tx_ms += dur;
    t += dur;
  };

  const int max_attempts = 1 + cfg.arq_retries;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    out.attempts = attempt;
    bool clear = false;
    for (int b = 1; b <= cfg.max_backoff_attempts; ++b) {
      const double wait = rng.uniform(0.0, backoff_window_ms(b, cfg));
      log(t, "backoff", std::to_string(b) + ":" + std::to_string(wait));
      t += wait;
      // carrier sense keeps the receiver chain on for a moment
      out.radio.rx_ms += 0.128;
      if (!link.channel_busy(t)) {
        clear = true;
        break;
      }
      log(t, "cca_busy");
    }
    if (!clear) {
      out.status = SendStatus::ChannelSaturated;
      out.finish_ms = t;
      log(t, "fail", "channel_saturated");
      return out;
    }

    const double sleep = attempt == 1 ? req.sized_sleep_ms : req.retry_sleep_ms;
    const PreambleTrain train = preamble_train(sleep, cfg, req.receiver);
    const auto wake = next_wake(req.receiver_schedule, req.receiver_origin_ms, t);
    if (wake && *wake - t <= train.duration_ms()) {
      const int sent = std::min(train.count,
                                static_cast<int>(std::floor((*wake - t) / train.packet_ms)) + 1);
      log(t, "preamble", std::to_string(sent) + "/" + std::to_string(train.count));
      out.preamble_packets += sent;
      transmit(sent * train.packet_ms);
      if (cfg.rts_cts) {
        log(t, "rts");
        transmit(cfg.preamble_ms);
        out.radio.rx_ms += cfg.preamble_ms;
        t += cfg.preamble_ms;
        log(t, "cts");
      }
      log(t, "data");
      const double data_start = t;
      ++out.data_frames;
      transmit(cfg.data_ms);
      const double data_end = t;
      const bool ok = link.delivered(data_start);
      out.radio.rx_ms += cfg.ack_ms;
      t += cfg.ack_ms;
      if (ok) {
        log(t, "ack", "attempt " + std::to_string(attempt));
        out.status = SendStatus::Delivered;
        out.arrival_ms = data_end;
        out.finish_ms = t;
        return out;
      }
      log(t, "no_ack", "attempt " + std::to_string(attempt));
    } else {
      log(t, "preamble", std::to_string(train.count) + "/" + std::to_string(train.count));
      out.preamble_packets += train.count;
      transmit(train.duration_ms());
      out.radio.rx_ms += cfg.ack_ms;
      t += cfg.ack_ms;
      log(t, "missed", "attempt " + std::to_string(attempt));
    }
  }
  out.status = SendStatus::NoAck;
  out.finish_ms = t;
  log(t, "fail", "no_ack");
  return out;
}

void write_mac_trace_header(std::ostream& os) { os << "time,node,event,detail\n"; }

void write_mac_trace_row(std::ostream& os, const MacEvent& e) {
  os << e.time_ms / 1000.0 << ',' << e.node << ',' << e.event << ',' << e.detail << '\n';
}

}  // namespace zen::mac
