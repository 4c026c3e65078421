#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridsense/sfr.hpp"

namespace gridsense::cloud {

struct OutletRecord {
  std::string outlet_id;
  std::string block_id;
  double power_w = 0.0;
  double last_report_s = 0.0;
  bool switch_on = true;
};

// In-memory outlet registry. Single logical writer; block power sums skip
// outlets that have been silent beyond the stale horizon.
class Registry {
 public:
  explicit Registry(double stale_horizon_s = 180.0) : stale_horizon_s_(stale_horizon_s) {}

  void ingest(const std::string& outlet_id, const std::string& block_id, double power_w,
              double report_time_s, bool switch_on);

  size_t size() const { return records_.size(); }
  const OutletRecord* find(const std::string& outlet_id) const;
  bool is_stale(const OutletRecord& rec, double now_s) const {
    return now_s - rec.last_report_s > stale_horizon_s_;
  }

  // Active (non-stale, switched-on) power of one block in MW.
  double block_power_mw(const std::string& block_id, double now_s) const;

  // Block ids with at least one active outlet, in deterministic order.
  std::vector<std::string> active_blocks(double now_s) const;

  const std::map<std::string, OutletRecord>& records() const { return records_; }
  double stale_horizon_s() const { return stale_horizon_s_; }

 private:
  double stale_horizon_s_;
  std::map<std::string, OutletRecord> records_;  // keyed by outlet_id
};

struct LoadBlock {
  std::string block_id;
  int importance_rank = 0;  // 1 = least important
  double block_power_mw = 0.0;
  double accumulated_power_mw = 0.0;
  double switch_off_freq_hz = 0.0;
};

using RankingPolicy = std::function<bool(const std::string&, const std::string&)>;

// Blocks sorted least-important first with accumulated power as a prefix
// sum. The comparator must be a total order; the default sorts by block id.
std::vector<LoadBlock> build_blocks(const Registry& registry, double now_s,
                                    const RankingPolicy& less = {});

// Same aggregation from externally supplied (block_id, power_mw) pairs
// already in rank order.
std::vector<LoadBlock> build_blocks_from_powers(const std::vector<std::pair<std::string, double>>& powers);

// Per-block switching-off frequency. Formula applied verbatim with powers in
// p.u. of s_base; results clamped below f_s. Returns the number of blocks
// whose frequency fell below the UFLS floor (warn-level condition).
int assign_switch_off_frequencies(std::vector<LoadBlock>& blocks, double f_s_hz, double f_n_hz,
                                  double p_load_total_pu, double d, double s_base_mva,
                                  double ufls_floor_hz = 49.0);

struct ConditionRow {
  double f_low_hz = 0.0;
  double f_high_hz = 0.0;
  double rocof_threshold_hz_s = 0.0;  // satisfied when measured rocof < threshold
};

struct ShedConditionTable {
  std::vector<ConditionRow> rows;  // highest frequency band first
  int n_required = 15;

  // Row containing f, or nullptr when f is outside [f_s, f_n).
  const ConditionRow* row_for(double f_hz) const;
};

// Thresholds from the rocof of the threshold-loss trajectory sampled where
// the frequency crosses each row's upper bound; the band containing f_s gets
// exactly zero.
ShedConditionTable build_condition_table(const sfr::DerivedParams& dv, const sfr::SystemParams& sys,
                                         double f_s_hz, double bin_width_hz = 0.05,
                                         int n_required = 15);

// Pre-event broadcast payload for one block.
struct ParameterBundle {
  sfr::DerivedParams derived;
  double f_nominal_hz = 0.0;
  double s_base_mva = 0.0;
  double f_s_hz = 0.0;
  double delta_p_s_mw = 0.0;
  ShedConditionTable condition_table;
  double accumulated_power_mw = 0.0;
  double switch_off_freq_hz = 0.0;
  std::string block_id;
  double issued_at_s = 0.0;
};

ParameterBundle make_bundle(const sfr::DerivedParams& dv, const sfr::SystemParams& sys,
                            const LoadBlock& block, double f_s_hz, const ShedConditionTable& table,
                            double issued_at_s);

struct SwitchCommand {
  std::string outlet_id;
  bool switch_on = false;  // false = switch off
};

struct ObservedOutlet {
  std::string outlet_id;
  std::string block_id;
  double power_w = 0.0;
  bool switch_on = true;
};

// Backup direct control: commands for exactly the outlets whose observed
// state differs from the accumulated-power rule given the estimated loss.
std::vector<SwitchCommand> direct_shed_commands(double estimated_loss_mw, double delta_p_s_mw,
                                                const std::vector<LoadBlock>& blocks,
                                                const std::vector<ObservedOutlet>& observed);

}  // namespace gridsense::cloud
