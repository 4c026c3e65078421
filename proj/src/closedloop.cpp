#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "gridsense/csv.hpp"
#include "gridsense/harness.hpp"

namespace gridsense::harness {

namespace {

constexpr uint64_t kTagAgentNoise = 0x616e6f697365ull;
constexpr uint64_t kTagNet = 0x6e6574ull;
constexpr double kPreRollS = 2.0;
constexpr long kTelemetrySample = 100;  // outlets that also upload telemetry

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (hi + v[mid - 1]);
  }
  return hi;
}

}  // namespace

ClosedLoopResult run_closed_loop(const Scenario& scn, bool blackout_after_event) {
  if (scn.events.empty()) throw std::invalid_argument("run_closed_loop: scenario has no event");
  const auto dv = scn.derived();
  const double fn = scn.system.f_nominal_hz;
  const double t_event = scn.events.front().time_s;
  const double loss_pu = scn.events.front().delta_p_pu;

  std::vector<double> watts;
  std::vector<long> group_of;
  const auto blocks = build_fleet_blocks(scn, &watts, &group_of);
  const auto table = condition_table_for(scn);
  const long n = scn.fleet.outlets;

  // Bundles go out over the bus well before the event.
  net::DeliverySpec delivery;
  delivery.latency = {scn.net.latency_lo_s, scn.net.latency_hi_s};
  delivery.drop_probability = scn.net.drop_probability;
  delivery.seed = scn.seed ^ kTagNet;
  net::MessageBus bus(delivery);
  if (blackout_after_event) bus.set_blackout_after(t_event);

  const double t_bundle = t_event - scn.net.bundle_lead_s;
  std::vector<cloud::ParameterBundle> bundles;
  bundles.reserve(blocks.size());
  for (const auto& b : blocks)
    bundles.push_back(cloud::make_bundle(dv, scn.system, b, scn.f_s_hz, table, t_bundle));
  for (long i = 0; i < n; ++i) {
    net::Message msg;
    msg.kind = net::MsgKind::Bundle;
    msg.src = "cloud";
    msg.dst = "o" + std::to_string(i);
    msg.send_time_s = t_bundle;
    msg.payload = bundles[group_of[i]];
    bus.schedule(msg);
  }

  // Agents are constructed unprovisioned and armed by bundle delivery.
  agent::AgentConfig base_cfg = agent_config_for(scn, bundles.front(), scn.check_noise);
  base_cfg.provisioned = false;
  std::vector<agent::OutletAgent> agents;
  agents.reserve(n);
  std::vector<Rng> noise_rngs;
  noise_rngs.reserve(n);
  for (long i = 0; i < n; ++i) {
    agent::AgentConfig cfg = base_cfg;
    cfg.outlet_id = "o" + std::to_string(i);
    cfg.appliance_power_w = watts[i];
    agents.emplace_back(std::move(cfg));
    noise_rngs.push_back(Rng::substream(scn.seed ^ kTagAgentNoise, static_cast<uint64_t>(i)));
  }

  ClosedLoopResult res;
  res.event_time_s = t_event;

  std::vector<sfr::PowerEvent> events = scn.events;
  const long pre_steps = static_cast<long>(std::llround(kPreRollS / sfr::kSamplePeriod));
  const long total_steps =
      pre_steps + static_cast<long>(std::floor(scn.duration_s / sfr::kSamplePeriod)) + 1;

  for (long step = 0; step < total_steps; ++step) {
    const double t = t_event + (step - pre_steps) * sfr::kSamplePeriod;

    for (auto& d : bus.advance(t)) {
      if (d.msg.kind == net::MsgKind::Bundle) {
        const long idx = std::stol(d.msg.dst.substr(1));
        agents[idx].set_bundle(std::get<cloud::ParameterBundle>(d.msg.payload));
      } else if (d.msg.kind == net::MsgKind::Command) {
        const auto& cmd = std::get<cloud::SwitchCommand>(d.msg.payload);
        const long idx = std::stol(cmd.outlet_id.substr(1));
        const auto action = agents[idx].command(cmd.switch_on, t);
        if (action.switch_off) {
          res.decisions.push_back({t, idx, action.cause, 0.0, watts[idx]});
          ++res.sheds_command;
        }
      }
    }

    const double f_true = fn * (1.0 + sfr::delta_f_multi(dv, events, t));
    double step_shed_pu = 0.0;
    for (long i = 0; i < n; ++i) {
      const double f_meas = f_true + scn.check_noise.sample_hz(noise_rngs[i]);
      const auto action = agents[i].ingest({t, f_meas, 0.0});
      if (action.switch_off) {
        const auto& st = agents[i].ekf_state();
        res.decisions.push_back({t, i, action.cause, st ? st->delta_p_pu : 0.0, watts[i]});
        step_shed_pu += watts[i] * 1e-6 / scn.system.s_base_mva;
        res.total_shed_mw += watts[i] * 1e-6;
        ++res.outlets_off;
        if (action.cause == agent::Cause::ConditionCriterion) ++res.sheds_condition;
        if (action.cause == agent::Cause::BackupFrequency) ++res.sheds_backup;
      }
    }
    if (step_shed_pu > 0.0) events.push_back({t, -step_shed_pu});

    // A small telemetry sample keeps the uplink path exercised.
    if (step % 60 == 0) {
      for (long i = 0; i < std::min(kTelemetrySample, n); ++i) {
        net::Message msg;
        msg.kind = net::MsgKind::Telemetry;
        msg.src = "o" + std::to_string(i);
        msg.dst = "cloud";
        msg.send_time_s = t;
        msg.payload = net::TelemetryPayload{"o" + std::to_string(i),
                                            blocks[group_of[i]].block_id, watts[i],
                                            agents[i].phase() != agent::Phase::Off};
        bus.schedule(msg);
      }
    }
  }

  // Noiseless curves for reporting: superposed (with shedding) and the
  // single-event reference.
  const double t_end = t_event + scn.duration_s;
  res.nadir_with_hz = fn;
  for (double t = t_event; t <= t_end; t += 1e-3) {
    const double f = fn * (1.0 + sfr::delta_f_multi(dv, events, t));
    res.nadir_with_hz = std::min(res.nadir_with_hz, f);
  }
  res.nadir_without_hz = sfr::f_nadir_hz(dv, scn.system, loss_pu);

  const auto n_out = static_cast<size_t>(std::floor(scn.duration_s / sfr::kSamplePeriod)) + 1;
  res.with_gs.reserve(n_out);
  res.without_gs.reserve(n_out);
  for (size_t k = 0; k < n_out; ++k) {
    const double t = t_event + k * sfr::kSamplePeriod;
    res.with_gs.push_back({t - t_event, fn * (1.0 + sfr::delta_f_multi(dv, events, t)),
                           sfr::rocof_multi(dv, events, t) * fn});
    res.without_gs.push_back({t - t_event, fn * (1.0 + sfr::delta_f(dv, loss_pu, t - t_event)),
                              sfr::rocof_hz(dv, scn.system, loss_pu, t - t_event)});
  }

  std::vector<double> latencies;
  for (const auto& d : res.decisions) {
    if (d.cause == agent::Cause::ConditionCriterion) latencies.push_back(d.t_s - t_event);
  }
  res.median_latency_s = median(std::move(latencies));
  res.net_trace = bus.trace();
  return res;
}

ReplayResult replay(const std::string& csv_path, const Scenario& scn) {
  const auto table = csv::read_numeric(csv_path);
  if (table.columns.size() < 2 || table.columns[0] != "t_s" || table.columns[1] != "f_hz")
    throw std::invalid_argument(csv_path + ": expected columns t_s,f_hz[,rocof_hz_per_s]");

  const auto dv = scn.derived();
  const auto cond = condition_table_for(scn);
  auto blocks = build_fleet_blocks(scn, nullptr, nullptr);
  const auto bundle = cloud::make_bundle(dv, scn.system, blocks.front(), scn.f_s_hz, cond, 0.0);
  auto cfg = agent_config_for(scn, bundle, scn.check_noise);
  cfg.outlet_id = "replay";
  cfg.record_estimates = true;
  agent::OutletAgent one(cfg);

  ReplayResult res;
  for (const auto& row : table.rows) {
    const auto action = one.ingest({row[0], row[1], 0.0});
    if (action.switch_off) {
      res.switched_off = true;
      res.cause = action.cause;
      break;
    }
  }
  res.log = one.decision_log();
  res.ekf_curve = one.estimate_history();
  res.detect_time_s = one.detect_time_s();
  res.lse_value_pu = one.lse_result_pu();
  res.decision_time_s = one.decision_time_s();
  if (one.ekf_state()) res.final_est_pu = one.ekf_state()->delta_p_pu;
  return res;
}

}  // namespace gridsense::harness
