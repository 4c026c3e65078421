#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gridsense/csv.hpp"
#include "gridsense/harness.hpp"

using namespace gridsense;
using namespace gridsense::harness;

namespace {

Scenario quick_ieee24(long trials) {
  auto scn = build_ieee24();
  scn.trials = trials;
  return scn;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("condition study is exact without noise") {
  const auto scn = quick_ieee24(64);
  const NoiseSpec none{NoiseModel::None, 0.0};
  CHECK(run_condition_mc(scn, 380.0, none).probability() == 1.0);
  CHECK(run_condition_mc(scn, 320.0, none).probability() == 0.0);
}

TEST_CASE("lse study centers near the true loss with the documented spread") {
  const auto scn = quick_ieee24(2000);
  const auto r = run_lse_mc(scn);
  CHECK(r.trials == 2000);
  CHECK(r.hist.total() == 2000);
  CHECK(r.mean > 4.6);
  CHECK(r.mean < 5.1);
  CHECK(r.stddev > 0.5);
  CHECK(r.stddev < 1.0);
  // Noiseless: every estimate lands in one deterministic spot.
  auto clean = scn;
  clean.estimation_noise = {NoiseModel::None, 0.0};
  const auto rc = run_lse_mc(clean);
  CHECK(rc.stddev == doctest::Approx(0.0));
  CHECK(rc.mean > 4.5);
  CHECK(rc.mean < 5.5);
}

TEST_CASE("ekf study beats the lse on the same draws") {
  const auto scn = quick_ieee24(800);
  const auto r = run_ekf_mc(scn, false);
  CHECK(r.ekf.trials == 800);
  CHECK(r.ekf.within_4pct > 0.85);
  CHECK(r.ekf.within_4pct > r.lse.within_4pct);
  CHECK(r.ekf.mean == doctest::Approx(5.0).epsilon(0.01));

  const auto rp = run_ekf_mc(scn, true);
  CHECK(rp.ekf.within_4pct > 0.5);
  CHECK(rp.ekf.within_4pct < r.ekf.within_4pct);
}

TEST_CASE("group experiment concentrates shedding in the low ranks") {
  auto scn = quick_ieee24(0);
  scn.fleet.outlets = 20000;
  scn.fleet.groups = 1000;
  const auto r = run_group_experiment(scn, false);
  CHECK(r.outlets == 20000);
  CHECK(r.fleet_total_mw == doctest::Approx(905.0).epsilon(0.05));
  CHECK(r.shed_target_mw == doctest::Approx(148.1).epsilon(1e-3));
  CHECK(r.total_shed_mw == doctest::Approx(148.1).epsilon(0.04));
  // Ordered bands: a full-off prefix, a mixed middle, a full-on suffix.
  CHECK(r.last_all_off_group > 50);
  CHECK(r.first_all_on_group < 400);
  CHECK(r.last_all_off_group < r.first_all_on_group);
  long mixed = 0;
  for (long g = r.last_all_off_group + 1; g < r.first_all_on_group; ++g)
    if (r.group_off[g] > 0 && r.group_off[g] < r.group_outlets[g]) ++mixed;
  CHECK(mixed > 0);
}

TEST_CASE("closed loop sheds the requirement and reports the reference timing") {
  auto scn = quick_ieee24(0);
  scn.fleet.outlets = 5000;
  scn.fleet.groups = 1000;
  const auto r = run_closed_loop(scn, false);
  CHECK(r.outlets_off > 0);
  CHECK(r.sheds_condition > 0);
  CHECK(r.total_shed_mw == doctest::Approx(148.1).epsilon(0.08));
  CHECK(r.median_latency_s == doctest::Approx(0.96).epsilon(0.034 / 0.96));
  CHECK(r.nadir_with_hz > 49.40);
  CHECK(r.nadir_with_hz < 49.55);
  CHECK(r.nadir_without_hz == doctest::Approx(49.2896).epsilon(1e-3));
  REQUIRE(!r.with_gs.empty());
  CHECK(r.with_gs.front().t_s == 0.0);

  // Determinism: a rerun reproduces every decision exactly.
  const auto r2 = run_closed_loop(scn, false);
  REQUIRE(r2.decisions.size() == r.decisions.size());
  for (size_t i = 0; i < r.decisions.size(); ++i) {
    CHECK(r2.decisions[i].t_s == r.decisions[i].t_s);
    CHECK(r2.decisions[i].outlet == r.decisions[i].outlet);
    CHECK(r2.decisions[i].delta_p_est_pu == r.decisions[i].delta_p_est_pu);
  }
}

TEST_CASE("post-event blackout leaves primary decisions unchanged") {
  auto scn = quick_ieee24(0);
  scn.fleet.outlets = 3000;
  scn.fleet.groups = 1000;
  const auto normal = run_closed_loop(scn, false);
  const auto dark = run_closed_loop(scn, true);
  std::vector<std::pair<double, long>> a, b;
  for (const auto& d : normal.decisions)
    if (d.cause == agent::Cause::ConditionCriterion) a.emplace_back(d.t_s, d.outlet);
  for (const auto& d : dark.decisions)
    if (d.cause == agent::Cause::ConditionCriterion) b.emplace_back(d.t_s, d.outlet);
  CHECK(a == b);
  CHECK(!a.empty());
  // The blackout is visible on the wire: telemetry sent post-event is gone.
  long dropped_post = 0;
  for (const auto& row : dark.net_trace)
    if (row.dropped && row.t_send_s > dark.event_time_s) ++dropped_post;
  CHECK(dropped_post > 0);
}

TEST_CASE("replay reproduces the hardware-run checkpoints") {
  const auto scn = build_ieee24();
  const auto dv = scn.derived();
  const sfr::PowerEvent ev[] = {{0.0, 5.0}};
  const auto samples =
      sfr::sample_trajectory(dv, scn.system, ev, 1.8, {NoiseModel::Uniform, 0.01}, 20240);

  const std::string path = "replay_test_tmp.csv";
  {
    csv::Writer w(path, "test");
    w.header("t_s,f_hz");
    for (const auto& s : samples) {
      w.field(s.t_s).field(s.f_hz);
      w.endrow();
    }
  }
  const auto r = replay(path, scn);
  std::remove(path.c_str());

  REQUIRE(r.detect_time_s.has_value());
  CHECK(*r.detect_time_s >= 0.08);
  CHECK(*r.detect_time_s <= 0.40);
  REQUIRE(r.lse_value_pu.has_value());
  CHECK(*r.lse_value_pu > 2.0);
  CHECK(*r.lse_value_pu < 8.0);
  REQUIRE(r.decision_time_s.has_value());
  CHECK(*r.decision_time_s ==
        doctest::Approx(*r.detect_time_s + 50 * sfr::kSamplePeriod).epsilon(1e-9));
  REQUIRE(r.final_est_pu.has_value());
  CHECK(std::abs(*r.final_est_pu - 5.0) < 0.5);
  CHECK(r.switched_off);
  CHECK(r.cause == agent::Cause::ConditionCriterion);
  CHECK(!r.log.empty());

  // The filter trajectory closes in on the true loss: the error envelope at
  // the end is tighter than at the start.
  REQUIRE(r.ekf_curve.size() == 40);
  double early = 0.0, late = 0.0;
  for (size_t i = 0; i < 10; ++i) {
    early = std::max(early, std::abs(r.ekf_curve[i].second - 5.0));
    late = std::max(late, std::abs(r.ekf_curve[r.ekf_curve.size() - 1 - i].second - 5.0));
  }
  CHECK(late < early);
  CHECK(std::abs(r.ekf_curve.back().second - 5.0) < std::abs(*r.lse_value_pu - 5.0));
}

TEST_CASE("replay rejects malformed input with a line number") {
  const std::string path = "replay_bad_tmp.csv";
  {
    std::ofstream out(path);
    out << "t_s,f_hz\n0.0,50.0\n0.016,not_a_number\n";
  }
  const auto scn = build_ieee24();
  try {
    replay(path, scn);
    FAIL("expected parse failure");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("csv writer emits identical bytes on identical input") {
  auto write_once = [](const std::string& path) {
    csv::Writer w(path, "prov seed=1");
    w.header("a,b");
    w.field(1.0 / 3.0).field(42L);
    w.endrow();
    w.field(-0.3236).field("text");
    w.endrow();
  };
  write_once("csv_tmp_a.csv");
  write_once("csv_tmp_b.csv");
  CHECK(slurp("csv_tmp_a.csv") == slurp("csv_tmp_b.csv"));
  CHECK_THROWS_AS(csv::read_numeric("csv_tmp_a.csv"), std::invalid_argument);  // "text" cell
  std::remove("csv_tmp_a.csv");
  std::remove("csv_tmp_b.csv");

  {
    csv::Writer w("csv_tmp_c.csv", "prov");
    w.header("x,y");
    w.field(0.016).field(49.992);
    w.endrow();
  }
  const auto table = csv::read_numeric("csv_tmp_c.csv");
  REQUIRE(table.columns.size() == 2);
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0][0] == doctest::Approx(0.016));
  CHECK(table.rows[0][1] == doctest::Approx(49.992));
  std::remove("csv_tmp_c.csv");
}
