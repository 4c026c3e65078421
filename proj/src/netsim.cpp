#include "gridsense/netsim.hpp"

#include <algorithm>
#include <stdexcept>

namespace gridsense::net {

const char* kind_name(MsgKind k) {
  switch (k) {
    case MsgKind::Bundle: return "bundle";
    case MsgKind::Telemetry: return "telemetry";
    case MsgKind::Command: return "command";
  }
  return "?";
}

MessageBus::MessageBus(DeliverySpec spec) : spec_(spec), rng_(spec.seed) {}

void MessageBus::schedule(Message msg) {
  if (msg.send_time_s < now_s_)
    throw std::invalid_argument("MessageBus::schedule: send time before current clock");

  const double latency = spec_.latency.sample(rng_);
  bool dropped = rng_.bernoulli(spec_.drop_probability);
  if (has_blackout_ && msg.send_time_s > blackout_after_s_) dropped = true;

  double deliver = msg.send_time_s + latency;
  if (spec_.fifo_per_pair) {
    auto key = std::make_pair(msg.src, msg.dst);
    auto it = last_delivery_.find(key);
    if (it != last_delivery_.end() && deliver < it->second) deliver = it->second;
    if (!dropped) last_delivery_[key] = deliver;
  }

  trace_.push_back({msg.send_time_s, deliver, msg.kind, msg.src, msg.dst, dropped});
  if (dropped) return;

  Delivery d;
  d.msg = std::move(msg);
  d.deliver_time_s = deliver;
  d.seq = next_seq_++;
  pending_.push_back(std::move(d));
}

std::vector<Delivery> MessageBus::advance(double t_s) {
  if (t_s < now_s_) throw std::invalid_argument("MessageBus::advance: clock must not move backwards");
  now_s_ = t_s;

  std::vector<Delivery> due;
  auto split = std::partition(pending_.begin(), pending_.end(),
                              [&](const Delivery& d) { return d.deliver_time_s > t_s; });
  due.assign(std::make_move_iterator(split), std::make_move_iterator(pending_.end()));
  pending_.erase(split, pending_.end());
  std::sort(due.begin(), due.end(), [](const Delivery& a, const Delivery& b) {
    if (a.deliver_time_s != b.deliver_time_s) return a.deliver_time_s < b.deliver_time_s;
    return a.seq < b.seq;
  });
  return due;
}

}  // namespace gridsense::net
