#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gridsense/csv.hpp"
#include "gridsense/harness.hpp"

namespace fs = std::filesystem;
using namespace gridsense;

namespace {

struct Common {
  std::string scenario_path;
  std::string out_dir = "out";
  long seed_override = -1;
  long trials_override = -1;
  bool full_scale = false;
  int verbosity = 0;
};

harness::Scenario load(const Common& c) {
  harness::Scenario scn =
      c.scenario_path.empty() ? harness::build_ieee24() : harness::load_scenario(c.scenario_path);
  if (c.seed_override >= 0) scn.seed = static_cast<uint64_t>(c.seed_override);
  if (c.trials_override > 0) scn.trials = c.trials_override;
  if (c.full_scale) {
    scn.fleet.outlets = scn.fleet.full_outlets;
    scn.trials = std::max<long>(scn.trials, 1000000);
  }
  return scn;
}

std::string provenance(const harness::Scenario& scn) {
  return std::string("gridsense ") + harness::kToolVersion + " scenario=" + scn.name +
         " sha256=" + scn.hash_hex() + " seed=" + std::to_string(scn.seed);
}

void ensure_out(const Common& c) { fs::create_directories(c.out_dir); }

std::string path_in(const Common& c, const std::string& file) { return c.out_dir + "/" + file; }

void write_trajectory(const std::string& path, const std::string& prov,
                      const std::vector<sfr::FrequencySample>& samples) {
  csv::Writer w(path, prov);
  w.header("t_s,f_hz,rocof_hz_per_s");
  for (const auto& s : samples) {
    w.field(s.t_s).field(s.f_hz).field(s.rocof_hz_per_s);
    w.endrow();
  }
}

int cmd_derive(const Common& c) {
  const auto scn = load(c);
  const auto dv = scn.derived();
  const double dps_mw = scn.delta_p_s_mw();
  const double tn = sfr::t_nadir(dv);

  std::printf("scenario          %s (sha256=%s)\n", scn.name.c_str(), scn.hash_hex().c_str());
  std::printf("omega_n           %.6f rad/s\n", dv.omega_n);
  std::printf("zeta              %.6f\n", dv.zeta);
  std::printf("omega_r           %.6f rad/s\n", dv.omega_r);
  std::printf("alpha             %.6f\n", dv.alpha);
  std::printf("phi1              %.6f rad\n", dv.phi1);
  std::printf("phi               %.6f rad\n", dv.phi);
  std::printf("k_lse             %.4f p.u./(p.u./s)\n", dv.k_lse);
  std::printf("t_nadir           %.4f s\n", tn);
  std::printf("delta_p_s         %.2f MW (%.4f p.u.)\n", dps_mw, dps_mw / scn.system.s_base_mva);
  std::printf("f_nadir(dPs)      %.4f Hz\n",
              sfr::f_nadir_hz(dv, scn.system, dps_mw / scn.system.s_base_mva));
  if (scn.f_s_hz >= scn.system.f_nominal_hz) {
    std::printf("condition table   empty (f_s equals nominal frequency)\n");
    return 0;
  }
  const auto table = harness::condition_table_for(scn);
  std::printf("condition table   %zu rows, n_required=%d\n", table.rows.size(), table.n_required);
  for (const auto& row : table.rows)
    std::printf("  [%.2f, %.2f)  rocof < %+.4f Hz/s\n", row.f_low_hz, row.f_high_hz,
                row.rocof_threshold_hz_s);

  ensure_out(c);
  csv::Writer w(path_in(c, "table1.csv"), provenance(scn));
  w.header("f_low_hz,f_high_hz,rocof_threshold_hz_per_s");
  for (const auto& row : table.rows) {
    w.field(row.f_low_hz).field(row.f_high_hz).field(row.rocof_threshold_hz_s);
    w.endrow();
  }

  // Debug dump of the block-1 broadcast payload.
  auto blocks = harness::build_fleet_blocks(scn, nullptr, nullptr);
  const auto bundle = cloud::make_bundle(dv, scn.system, blocks.front(), scn.f_s_hz, table, 0.0);
  std::FILE* bf = std::fopen(path_in(c, "bundle.txt").c_str(), "w");
  if (bf) {
    std::fprintf(bf, "# %s\n", provenance(scn).c_str());
    std::fprintf(bf, "block_id %s\nissued_at_s %.6f\nf_s_hz %.6f\ndelta_p_s_mw %.6f\n",
                 bundle.block_id.c_str(), bundle.issued_at_s, bundle.f_s_hz, bundle.delta_p_s_mw);
    std::fprintf(bf, "accumulated_power_mw %.6f\nswitch_off_freq_hz %.6f\n",
                 bundle.accumulated_power_mw, bundle.switch_off_freq_hz);
    std::fprintf(bf, "k_lse %.6f\ng1 %.9f\nomega_n %.9f\nzeta %.9f\nomega_r %.9f\nalpha %.9f\nphi %.9f\n",
                 bundle.derived.k_lse, bundle.derived.g1, bundle.derived.omega_n, bundle.derived.zeta,
                 bundle.derived.omega_r, bundle.derived.alpha, bundle.derived.phi);
    for (const auto& row : bundle.condition_table.rows)
      std::fprintf(bf, "row %.2f %.2f %.6f\n", row.f_low_hz, row.f_high_hz, row.rocof_threshold_hz_s);
    std::fclose(bf);
  }
  std::printf("wrote %s, %s\n", path_in(c, "table1.csv").c_str(), path_in(c, "bundle.txt").c_str());
  return 0;
}

int cmd_montecarlo(const Common& c, const std::string& which) {
  const auto scn = load(c);
  ensure_out(c);
  const std::string prov = provenance(scn);

  if (which == "table2") {
    const double losses[] = {380.0, 320.0};
    const double noises[] = {0.0, 0.005, 0.01};
    csv::Writer w(path_in(c, "table2.csv"), prov);
    w.header("loss_mw,noise_model,noise_hz,probability,standard_error,trials");
    for (double loss : losses) {
      for (double nz : noises) {
        NoiseSpec spec = scn.check_noise;
        if (nz == 0.0) spec.model = NoiseModel::None;
        spec.level_hz = nz;
        const auto r = harness::run_condition_mc(scn, loss, spec);
        std::printf("loss %.0f MW noise %.3f Hz -> P(shed_needed) = %.6f (se %.6f)\n", loss, nz,
                    r.probability(), r.standard_error());
        w.field(loss)
            .field(nz == 0.0 ? "none" : (spec.model == NoiseModel::Uniform ? "uniform" : "gauss"))
            .field(nz)
            .field(r.probability())
            .field(r.standard_error())
            .field(r.trials);
        w.endrow();
      }
    }
    std::printf("wrote %s\n", path_in(c, "table2.csv").c_str());
    return 0;
  }

  if (which == "table3") {
    const auto r = harness::run_lse_mc(scn);
    csv::Writer w(path_in(c, "table3.csv"), prov);
    w.header("bin_lo_pu,bin_hi_pu,count,ratio_pct");
    for (size_t i = 0; i < r.hist.counts.size(); ++i) {
      w.field(r.hist.lo + i * r.hist.bin_width)
          .field(r.hist.lo + (i + 1) * r.hist.bin_width)
          .field(r.hist.counts[i])
          .field(100.0 * r.hist.counts[i] / r.trials);
      w.endrow();
    }
    std::printf("lse: mean %.4f p.u., stddev %.4f, [4,5) %.2f%%, [5,6) %.2f%%\n", r.mean, r.stddev,
                100.0 * r.hist.share(4.0, 5.0), 100.0 * r.hist.share(5.0, 6.0));
    std::printf("wrote %s\n", path_in(c, "table3.csv").c_str());
    return 0;
  }

  if (which == "table4" || which == "table5") {
    const bool param_noise = which == "table5";
    const auto r = harness::run_ekf_mc(scn, param_noise);
    csv::Writer w(path_in(c, which + ".csv"), prov);
    w.header("bin_lo_pu,bin_hi_pu,count,ratio_pct");
    for (size_t i = 0; i < r.ekf.hist.counts.size(); ++i) {
      if (r.ekf.hist.counts[i] == 0) continue;
      w.field(r.ekf.hist.lo + i * r.ekf.hist.bin_width)
          .field(r.ekf.hist.lo + (i + 1) * r.ekf.hist.bin_width)
          .field(r.ekf.hist.counts[i])
          .field(100.0 * r.ekf.hist.counts[i] / r.ekf.trials);
      w.endrow();
    }
    csv::Writer s(path_in(c, which + "_summary.csv"), prov);
    s.header("metric,value");
    s.field("within_4pct").field(r.ekf.within_4pct);
    s.endrow();
    s.field("lse_within_4pct").field(r.lse.within_4pct);
    s.endrow();
    s.field("mean_pu").field(r.ekf.mean);
    s.endrow();
    s.field("stddev_pu").field(r.ekf.stddev);
    s.endrow();
    std::printf("ekf: within_4pct=%.4f (lse %.4f), mean %.4f, stddev %.4f\n", r.ekf.within_4pct,
                r.lse.within_4pct, r.ekf.mean, r.ekf.stddev);
    std::printf("wrote %s, %s\n", path_in(c, which + ".csv").c_str(),
                path_in(c, which + "_summary.csv").c_str());
    return 0;
  }

  std::fprintf(stderr, "unknown table id '%s' (expected table2|table3|table4|table5)\n",
               which.c_str());
  return 2;
}

int cmd_groups(const Common& c, bool param_noise) {
  const auto scn = load(c);
  ensure_out(c);
  const auto r = harness::run_group_experiment(scn, param_noise);
  std::printf("outlets %ld, off %ld, total shed %.2f MW (target %.2f MW, fleet %.2f MW)\n",
              r.outlets, r.outlets_off, r.total_shed_mw, r.shed_target_mw, r.fleet_total_mw);
  std::printf("all-off through group %ld; all-on from group %ld\n", r.last_all_off_group + 1,
              r.first_all_on_group + 1);
  csv::Writer w(path_in(c, param_noise ? "groups_param_noise.csv" : "groups.csv"), provenance(scn));
  w.header("group,block_power_mw,accumulated_mw,outlets,off_count,off_fraction");
  for (size_t g = 0; g < r.group_power_mw.size(); ++g) {
    w.field(static_cast<long>(g + 1))
        .field(r.group_power_mw[g])
        .field(r.group_accumulated_mw[g])
        .field(r.group_outlets[g])
        .field(r.group_off[g])
        .field(r.group_outlets[g] ? static_cast<double>(r.group_off[g]) / r.group_outlets[g] : 0.0);
    w.endrow();
  }
  std::printf("wrote %s\n",
              path_in(c, param_noise ? "groups_param_noise.csv" : "groups.csv").c_str());
  return 0;
}

int cmd_closedloop(const Common& c, bool blackout) {
  const auto scn = load(c);
  ensure_out(c);
  const auto r = harness::run_closed_loop(scn, blackout);
  std::printf("nadir with %.4f Hz / without %.4f Hz; shed %.2f MW from %ld outlets\n",
              r.nadir_with_hz, r.nadir_without_hz, r.total_shed_mw, r.outlets_off);
  std::printf("median primary decision latency %.3f s; causes: condition=%ld backup=%ld command=%ld\n",
              r.median_latency_s, r.sheds_condition, r.sheds_backup, r.sheds_command);

  const std::string prov = provenance(scn);
  write_trajectory(path_in(c, "fig22_with.csv"), prov, r.with_gs);
  write_trajectory(path_in(c, "fig22_without.csv"), prov, r.without_gs);
  csv::Writer w(path_in(c, "decisions.csv"), prov);
  w.header("t_s,outlet_id,phase,cause,delta_p_est_pu");
  for (const auto& d : r.decisions) {
    w.field(d.t_s)
        .field("o" + std::to_string(d.outlet))
        .field("off")
        .field(agent::cause_name(d.cause))
        .field(d.delta_p_est_pu);
    w.endrow();
  }
  csv::Writer tr(path_in(c, "net_trace.csv"), prov);
  tr.header("t_send,t_deliver,kind,src,dst,dropped");
  for (const auto& row : r.net_trace) {
    tr.field(row.t_send_s)
        .field(row.t_deliver_s)
        .field(net::kind_name(row.kind))
        .field(row.src)
        .field(row.dst)
        .field(row.dropped ? 1L : 0L);
    tr.endrow();
  }
  csv::Writer cmd(path_in(c, "commands.csv"), prov);
  cmd.header("t_s,outlet_id,command");
  for (const auto& d : r.decisions) {
    if (d.cause != agent::Cause::Command) continue;
    cmd.field(d.t_s).field("o" + std::to_string(d.outlet)).field("off");
    cmd.endrow();
  }
  std::printf("wrote %s, %s, %s, %s\n", path_in(c, "fig22_with.csv").c_str(),
              path_in(c, "fig22_without.csv").c_str(), path_in(c, "decisions.csv").c_str(),
              path_in(c, "net_trace.csv").c_str());
  return 0;
}

int cmd_replay(const Common& c, const std::string& csv_path) {
  if (c.scenario_path.empty()) {
    std::fprintf(stderr, "replay: no parameter bundle (a --scenario file is required)\n");
    return 2;
  }
  const auto scn = load(c);
  ensure_out(c);
  const auto r = harness::replay(csv_path, scn);
  if (r.detect_time_s)
    std::printf("event detected at t=%.3f s\n", *r.detect_time_s);
  else
    std::printf("no event detected\n");
  if (r.lse_value_pu) std::printf("lse estimate %.4f p.u.\n", *r.lse_value_pu);
  if (r.final_est_pu) std::printf("ekf final %.4f p.u.\n", *r.final_est_pu);
  if (r.decision_time_s)
    std::printf("decision at t=%.3f s: %s\n", *r.decision_time_s,
                r.switched_off ? agent::cause_name(r.cause) : "stay on");
  csv::Writer w(path_in(c, "replay_decisions.csv"), provenance(scn));
  w.header("t_s,outlet_id,phase,cause,delta_p_est_pu");
  for (const auto& e : r.log) {
    w.field(e.t_s)
        .field("replay")
        .field(agent::phase_name(e.phase))
        .field(agent::cause_name(e.cause))
        .field(e.delta_p_est_pu);
    w.endrow();
  }
  csv::Writer curve(path_in(c, "replay_ekf_curve.csv"), provenance(scn));
  curve.header("t_s,delta_p_est_pu");
  for (const auto& [t, est] : r.ekf_curve) {
    curve.field(t).field(est);
    curve.endrow();
  }
  std::printf("wrote %s, %s\n", path_in(c, "replay_decisions.csv").c_str(),
              path_in(c, "replay_ekf_curve.csv").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grid frequency-emergency-control simulator"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  Common common;
  app.add_option("--scenario", common.scenario_path, "scenario file (default: built-in ieee24)");
  app.add_option("--out", common.out_dir, "output directory");
  app.add_option("--seed", common.seed_override, "override scenario seed");
  app.add_option("--trials", common.trials_override, "override trial count");
  app.add_flag("--full-scale", common.full_scale, "run the full-size fleet and trial counts");
  app.add_flag("-v", common.verbosity, "verbose");

  auto* derive = app.add_subcommand("derive", "derived constants, threshold loss, condition table");
  std::string which;
  auto* mc = app.add_subcommand("montecarlo", "statistical studies (table2..table5)");
  mc->add_option("which", which, "table2|table3|table4|table5")->required();
  bool param_noise = false;
  auto* groups = app.add_subcommand("groups", "fleet group-response experiment");
  groups->add_flag("--param-noise", param_noise, "apply broadcast-parameter noise");
  bool blackout = false;
  auto* closedloop = app.add_subcommand("closedloop", "closed-loop fleet simulation");
  closedloop->add_flag("--blackout-after-event", blackout,
                       "drop all messages sent after the event");
  std::string replay_csv;
  auto* replay = app.add_subcommand("replay", "drive one agent from a trajectory CSV");
  replay->add_option("csv", replay_csv, "trajectory csv (t_s,f_hz)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (derive->parsed()) return cmd_derive(common);
    if (mc->parsed()) return cmd_montecarlo(common, which);
    if (groups->parsed()) return cmd_groups(common, param_noise);
    if (closedloop->parsed()) return cmd_closedloop(common, blackout);
    if (replay->parsed()) return cmd_replay(common, replay_csv);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
