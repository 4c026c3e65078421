#include "gridsense/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace gridsense::cloud {

void Registry::ingest(const std::string& outlet_id, const std::string& block_id, double power_w,
                      double report_time_s, bool switch_on) {
  if (power_w < 0.0) throw std::invalid_argument("Registry::ingest: power must be >= 0");
  auto& rec = records_[outlet_id];
  rec.outlet_id = outlet_id;
  rec.block_id = block_id;
  rec.power_w = power_w;
  rec.last_report_s = report_time_s;
  rec.switch_on = switch_on;
}

const OutletRecord* Registry::find(const std::string& outlet_id) const {
  auto it = records_.find(outlet_id);
  return it == records_.end() ? nullptr : &it->second;
}

double Registry::block_power_mw(const std::string& block_id, double now_s) const {
  double sum_w = 0.0;
  for (const auto& [id, rec] : records_) {
    if (rec.block_id != block_id || !rec.switch_on || is_stale(rec, now_s)) continue;
    sum_w += rec.power_w;
  }
  return sum_w * 1e-6;
}

std::vector<std::string> Registry::active_blocks(double now_s) const {
  std::set<std::string> ids;
  for (const auto& [id, rec] : records_) {
    if (!is_stale(rec, now_s)) ids.insert(rec.block_id);
  }
  return {ids.begin(), ids.end()};
}

std::vector<LoadBlock> build_blocks(const Registry& registry, double now_s,
                                    const RankingPolicy& less) {
  auto ids = registry.active_blocks(now_s);
  if (less) std::sort(ids.begin(), ids.end(), less);
  std::vector<LoadBlock> blocks;
  blocks.reserve(ids.size());
  double acc = 0.0;
  int rank = 1;
  for (const auto& id : ids) {
    LoadBlock b;
    b.block_id = id;
    b.importance_rank = rank++;
    b.block_power_mw = registry.block_power_mw(id, now_s);
    acc += b.block_power_mw;
    b.accumulated_power_mw = acc;
    blocks.push_back(b);
  }
  return blocks;
}

std::vector<LoadBlock> build_blocks_from_powers(
    const std::vector<std::pair<std::string, double>>& powers) {
  std::vector<LoadBlock> blocks;
  blocks.reserve(powers.size());
  double acc = 0.0;
  int rank = 1;
  for (const auto& [id, mw] : powers) {
    LoadBlock b;
    b.block_id = id;
    b.importance_rank = rank++;
    b.block_power_mw = mw;
    acc += mw;
    b.accumulated_power_mw = acc;
    blocks.push_back(b);
  }
  return blocks;
}

int assign_switch_off_frequencies(std::vector<LoadBlock>& blocks, double f_s_hz, double f_n_hz,
                                  double p_load_total_pu, double d, double s_base_mva,
                                  double ufls_floor_hz) {
  if (d <= 0.0) throw std::invalid_argument("assign_switch_off_frequencies: d must be > 0");
  int below_floor = 0;
  double acc_prev_pu = 0.0;
  for (auto& b : blocks) {
    const double p_b_pu = b.block_power_mw / s_base_mva;
    const double denom = d * (p_load_total_pu - acc_prev_pu);
    if (denom <= 0.0)
      throw std::invalid_argument("assign_switch_off_frequencies: nonpositive denominator");
    double f = f_s_hz - p_b_pu / denom * f_n_hz;
    if (f >= f_s_hz) f = std::nextafter(f_s_hz, 0.0);  // keep strictly below f_s
    if (f < ufls_floor_hz) ++below_floor;
    b.switch_off_freq_hz = f;
    acc_prev_pu += p_b_pu;
  }
  return below_floor;
}

const ConditionRow* ShedConditionTable::row_for(double f_hz) const {
  for (const auto& row : rows) {
    if (f_hz >= row.f_low_hz && f_hz < row.f_high_hz) return &row;
  }
  return nullptr;
}

ShedConditionTable build_condition_table(const sfr::DerivedParams& dv, const sfr::SystemParams& sys,
                                         double f_s_hz, double bin_width_hz, int n_required) {
  if (f_s_hz >= sys.f_nominal_hz)
    throw std::invalid_argument("build_condition_table: f_s must be below f_n");
  const double span = sys.f_nominal_hz - f_s_hz;
  const double n_rows_exact = span / bin_width_hz;
  const int n_rows = static_cast<int>(std::llround(n_rows_exact));
  if (n_rows < 1 || std::abs(n_rows_exact - n_rows) > 1e-9)
    throw std::invalid_argument("build_condition_table: bin width must divide f_n - f_s evenly");

  const double dps = sfr::threshold_power_loss(dv, sys, f_s_hz);
  ShedConditionTable table;
  table.n_required = n_required;
  table.rows.reserve(n_rows);
  for (int i = 0; i < n_rows; ++i) {
    ConditionRow row;
    row.f_high_hz = sys.f_nominal_hz - i * bin_width_hz;
    row.f_low_hz = row.f_high_hz - bin_width_hz;
    if (i == n_rows - 1) {
      // Band containing f_s: any further drop there is abnormal.
      row.rocof_threshold_hz_s = 0.0;
    } else {
      const double t = (i == 0) ? 0.0 : sfr::time_at_frequency(dv, sys, dps, row.f_high_hz);
      row.rocof_threshold_hz_s = sfr::rocof_hz(dv, sys, dps, t);
    }
    table.rows.push_back(row);
  }
  return table;
}

ParameterBundle make_bundle(const sfr::DerivedParams& dv, const sfr::SystemParams& sys,
                            const LoadBlock& block, double f_s_hz, const ShedConditionTable& table,
                            double issued_at_s) {
  ParameterBundle b;
  b.derived = dv;
  b.f_nominal_hz = sys.f_nominal_hz;
  b.s_base_mva = sys.s_base_mva;
  b.f_s_hz = f_s_hz;
  b.delta_p_s_mw = sfr::threshold_power_loss_mw(dv, sys, f_s_hz);
  b.condition_table = table;
  b.accumulated_power_mw = block.accumulated_power_mw;
  b.switch_off_freq_hz = block.switch_off_freq_hz;
  b.block_id = block.block_id;
  b.issued_at_s = issued_at_s;
  return b;
}

std::vector<SwitchCommand> direct_shed_commands(double estimated_loss_mw, double delta_p_s_mw,
                                                const std::vector<LoadBlock>& blocks,
                                                const std::vector<ObservedOutlet>& observed) {
  const double shed_required_mw = std::max(estimated_loss_mw - delta_p_s_mw, 0.0);
  std::map<std::string, double> acc_by_block;
  for (const auto& b : blocks) acc_by_block[b.block_id] = b.accumulated_power_mw;

  std::vector<SwitchCommand> commands;
  for (const auto& o : observed) {
    auto it = acc_by_block.find(o.block_id);
    if (it == acc_by_block.end()) continue;
    const bool should_be_off = shed_required_mw > it->second;
    if (should_be_off && o.switch_on) commands.push_back({o.outlet_id, false});
    if (!should_be_off && !o.switch_on) commands.push_back({o.outlet_id, true});
  }
  return commands;
}

}  // namespace gridsense::cloud
