#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridsense/agent.hpp"
#include "gridsense/netsim.hpp"
#include "gridsense/scenario.hpp"

namespace gridsense::harness {

// Fixed-width histogram with underflow/overflow buckets; counts always sum
// to the number of added samples.
struct Histogram {
  double lo = 0.0;
  double bin_width = 1.0;
  std::vector<long> counts;
  long below = 0;
  long above = 0;

  Histogram(double lo_, double width, int n_bins) : lo(lo_), bin_width(width), counts(n_bins, 0) {}
  void add(double v);
  long total() const;
  // Share of samples in [a, b); bounds must be bin edges.
  double share(double a, double b) const;
};

struct BinomialResult {
  long trials = 0;
  long successes = 0;
  double probability() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
  double standard_error() const;
};

// Probability that one agent decides shedding is needed for the given loss
// and measurement noise (condition-check study).
BinomialResult run_condition_mc(const Scenario& scn, double loss_mw, const NoiseSpec& noise);

struct EstimateStats {
  Histogram hist;
  long trials = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double within_4pct = 0.0;  // share with |est - true|/true < 4%
};

// Initial-estimate study: least-squares slope over the first window after
// the event, converted through the broadcast gain.
EstimateStats run_lse_mc(const Scenario& scn);

struct EkfMcResult {
  EstimateStats ekf;
  EstimateStats lse;  // same trials, paired
};

EkfMcResult run_ekf_mc(const Scenario& scn, bool with_param_noise);

struct GroupResult {
  long outlets = 0;
  long outlets_off = 0;
  double total_shed_mw = 0.0;
  double fleet_total_mw = 0.0;
  double shed_target_mw = 0.0;  // estimated loss minus threshold loss
  std::vector<double> group_power_mw;
  std::vector<double> group_accumulated_mw;
  std::vector<long> group_outlets;
  std::vector<long> group_off;
  long last_all_off_group = -1;   // 0-based index of the end of the all-off prefix
  long first_all_on_group = -1;   // 0-based index of the start of the all-on suffix
};

GroupResult run_group_experiment(const Scenario& scn, bool with_param_noise);

struct ShedRecord {
  double t_s = 0.0;
  long outlet = 0;
  agent::Cause cause = agent::Cause::None;
  double delta_p_est_pu = 0.0;
  double power_w = 0.0;
};

struct ClosedLoopResult {
  std::vector<sfr::FrequencySample> with_gs;     // 16 ms cadence, noiseless curve
  std::vector<sfr::FrequencySample> without_gs;  // single-event reference
  double nadir_with_hz = 0.0;
  double nadir_without_hz = 0.0;
  double event_time_s = 0.0;
  double median_latency_s = 0.0;  // over primary-path shed decisions
  double total_shed_mw = 0.0;
  long outlets_off = 0;
  long sheds_condition = 0;
  long sheds_backup = 0;
  long sheds_command = 0;
  std::vector<ShedRecord> decisions;
  std::vector<net::TraceRow> net_trace;
};

// Full fleet simulation on the superposed trajectory: bundles broadcast over
// the message bus before the event, agents shed into the trajectory at their
// decision instants. When blackout_after_event is set the bus drops every
// message sent after the event.
ClosedLoopResult run_closed_loop(const Scenario& scn, bool blackout_after_event = false);

struct ReplayResult {
  std::vector<agent::LogEntry> log;
  std::vector<std::pair<double, double>> ekf_curve;  // (t_s, delta_p_est_pu)
  std::optional<double> detect_time_s;
  std::optional<double> lse_value_pu;
  std::optional<double> decision_time_s;
  std::optional<double> final_est_pu;
  bool switched_off = false;
  agent::Cause cause = agent::Cause::None;
};

// Drives a single agent from a trajectory CSV (columns t_s,f_hz[,...]).
ReplayResult replay(const std::string& csv_path, const Scenario& scn);

// Shared helpers.
cloud::ShedConditionTable condition_table_for(const Scenario& scn);
std::vector<cloud::LoadBlock> build_fleet_blocks(const Scenario& scn,
                                                 std::vector<double>* outlet_watts_out,
                                                 std::vector<long>* outlet_group_out);
agent::AgentConfig agent_config_for(const Scenario& scn, const cloud::ParameterBundle& bundle,
                                    const NoiseSpec& noise);

}  // namespace gridsense::harness
