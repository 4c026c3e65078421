#include <doctest.h>

#include "gridsense/netsim.hpp"

using namespace gridsense;
using namespace gridsense::net;

namespace {

Message telemetry(const std::string& src, double t) {
  Message m;
  m.kind = MsgKind::Telemetry;
  m.src = src;
  m.dst = "cloud";
  m.send_time_s = t;
  m.payload = TelemetryPayload{src, "b1", 100.0, true};
  return m;
}

}  // namespace

TEST_CASE("zero latency delivers at send time") {
  MessageBus bus({{0.0, 0.0}, 0.0, 1});
  bus.schedule(telemetry("a", 1.0));
  CHECK(bus.advance(0.5).empty());
  const auto due = bus.advance(1.0);
  REQUIRE(due.size() == 1);
  CHECK(due[0].deliver_time_s == 1.0);
  CHECK(bus.pending() == 0);
}

TEST_CASE("drop probability one never delivers") {
  MessageBus bus({{0.0, 0.0}, 1.0, 1});
  for (int i = 0; i < 50; ++i) bus.schedule(telemetry("a", 0.1 * i));
  CHECK(bus.advance(100.0).empty());
  CHECK(bus.trace().size() == 50);
  for (const auto& row : bus.trace()) CHECK(row.dropped);
}

TEST_CASE("same-timestamp deliveries break ties by sequence, stably") {
  auto run = [] {
    MessageBus bus({{0.5, 0.5}, 0.0, 3});
    bus.schedule(telemetry("a", 1.0));
    bus.schedule(telemetry("b", 1.0));
    return bus.advance(2.0);
  };
  const auto first = run();
  const auto second = run();
  REQUIRE(first.size() == 2);
  CHECK(first[0].msg.src == "a");
  CHECK(first[1].msg.src == "b");
  REQUIRE(second.size() == 2);
  CHECK(second[0].msg.src == first[0].msg.src);
  CHECK(second[1].msg.src == first[1].msg.src);
}

TEST_CASE("bus reproduces latencies and drops under a fixed seed") {
  auto run = [] {
    MessageBus bus({{0.05, 0.2}, 0.3, 99});
    for (int i = 0; i < 200; ++i) bus.schedule(telemetry("o" + std::to_string(i), 0.01 * i));
    return bus.advance(100.0);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  CHECK(a.size() < 200);  // some dropped
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].msg.src == b[i].msg.src);
    CHECK(a[i].deliver_time_s == b[i].deliver_time_s);
  }
}

TEST_CASE("per-pair fifo holds even when latencies invert") {
  MessageBus bus({{0.0, 1.0}, 0.0, 7});
  for (int i = 0; i < 100; ++i) bus.schedule(telemetry("a", 0.01 * i));
  const auto due = bus.advance(10.0);
  REQUIRE(due.size() == 100);
  double prev_send = -1.0, prev_deliver = -1.0;
  for (const auto& d : due) {
    CHECK(d.msg.send_time_s > prev_send);
    CHECK(d.deliver_time_s >= prev_deliver);
    prev_send = d.msg.send_time_s;
    prev_deliver = d.deliver_time_s;
  }
}

TEST_CASE("blackout drops everything sent after the cut") {
  MessageBus bus({{0.0, 0.0}, 0.0, 1});
  bus.set_blackout_after(5.0);
  bus.schedule(telemetry("pre", 4.0));
  bus.schedule(telemetry("post", 6.0));
  const auto due = bus.advance(10.0);
  REQUIRE(due.size() == 1);
  CHECK(due[0].msg.src == "pre");
}

TEST_CASE("large fan-out is delivered completely") {
  MessageBus bus({{0.01, 0.02}, 0.0, 11});
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    Message m = telemetry("o" + std::to_string(i % 50), 0.0);
    m.dst = "o" + std::to_string(i);
    bus.schedule(m);
  }
  CHECK(bus.pending() == static_cast<size_t>(n));
  const auto due = bus.advance(1.0);
  CHECK(due.size() == static_cast<size_t>(n));
  CHECK(bus.pending() == 0);
}

TEST_CASE("clock and ordering guards") {
  MessageBus bus({{0.0, 0.0}, 0.0, 1});
  bus.advance(5.0);
  CHECK_THROWS_AS(bus.schedule(telemetry("a", 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(bus.advance(4.0), std::invalid_argument);
}
