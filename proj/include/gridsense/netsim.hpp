#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "gridsense/cloud.hpp"
#include "gridsense/rng.hpp"

namespace gridsense::net {

enum class MsgKind { Bundle, Telemetry, Command };

const char* kind_name(MsgKind k);

struct TelemetryPayload {
  std::string outlet_id;
  std::string block_id;
  double power_w = 0.0;
  bool switch_on = true;
};

using Payload = std::variant<cloud::ParameterBundle, TelemetryPayload, cloud::SwitchCommand>;

struct Message {
  MsgKind kind = MsgKind::Telemetry;
  std::string src;
  std::string dst;  // exact recipient; broadcast is one message per recipient
  double send_time_s = 0.0;
  Payload payload;
};

struct LatencySpec {
  double lo_s = 0.0;
  double hi_s = 0.0;  // fixed latency when hi <= lo

  double sample(Rng& rng) const { return hi_s > lo_s ? rng.uniform(lo_s, hi_s) : lo_s; }
};

struct DeliverySpec {
  LatencySpec latency;
  double drop_probability = 0.0;
  uint64_t seed = 0;
  bool fifo_per_pair = true;
};

struct Delivery {
  Message msg;
  double deliver_time_s = 0.0;
  uint64_t seq = 0;
};

struct TraceRow {
  double t_send_s = 0.0;
  double t_deliver_s = 0.0;  // at drop: would-be delivery time
  MsgKind kind = MsgKind::Telemetry;
  std::string src, dst;
  bool dropped = false;
};

// Deterministic discrete-event message fabric. Latency and drop draws are
// made at schedule time in scheduling order, so a fixed seed reproduces the
// full delivery schedule exactly.
class MessageBus {
 public:
  explicit MessageBus(DeliverySpec spec);

  void schedule(Message msg);  // throws when msg.send_time_s is in the past

  // All deliveries due at or before t, ordered by (deliver_time, seq).
  std::vector<Delivery> advance(double t_s);

  // Force-drop everything scheduled after this time (communication-blackout
  // experiments).
  void set_blackout_after(double t_s) { blackout_after_s_ = t_s; has_blackout_ = true; }

  double now_s() const { return now_s_; }
  size_t pending() const { return pending_.size(); }
  const std::vector<TraceRow>& trace() const { return trace_; }

 private:
  DeliverySpec spec_;
  Rng rng_;
  double now_s_ = -1e300;
  uint64_t next_seq_ = 0;
  bool has_blackout_ = false;
  double blackout_after_s_ = 0.0;
  std::map<std::pair<std::string, std::string>, double> last_delivery_;
  std::vector<Delivery> pending_;  // kept sorted on extraction
  std::vector<TraceRow> trace_;
};

}  // namespace gridsense::net
