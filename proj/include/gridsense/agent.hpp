#pragma once

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridsense/cloud.hpp"
#include "gridsense/sfr.hpp"

namespace gridsense::agent {

enum class Phase { Idle, EventDetected, Estimating, ShedDecided, Off };
enum class Cause { None, ConditionCriterion, BackupFrequency, Command };

const char* phase_name(Phase p);
const char* cause_name(Cause c);

// Model constants the EKF evaluates. Kept separate from DerivedParams so a
// harness can perturb exactly the broadcast quantities.
struct AgentModel {
  double g1 = 0.0;
  double alpha = 0.0;
  double zwn = 0.0;       // zeta * omega_n
  double omega_r = 0.0;
  double phi = 0.0;
  double g2_factor = 1.0;  // extra scale on the t_x Jacobian entry

  static AgentModel from_derived(const sfr::DerivedParams& dv) {
    return {dv.g1, dv.alpha, dv.zeta * dv.omega_n, dv.omega_r, dv.phi, 1.0};
  }
};

struct EkfState {
  double delta_p_pu = 0.0;
  double t_x_s = 0.0;
  double p00 = 0.0, p01 = 0.0, p11 = 0.0;  // symmetric covariance
  int k = 0;                               // iterations performed
};

struct EkfTuning {
  double p0_delta_p = 0.09;
  double p0_t_x = 1.1e-3;
  double q_delta_p = 1e-6;
  double q_t_x = 1e-8;
  double r_meas_pu2 = 1.333e-8;  // measurement variance in (p.u. frequency)^2
};

EkfState ekf_init(double delta_p_init_pu, double t_x0_s, const EkfTuning& tuning);

// One predict/update with the nonlinear measurement model; f_meas in p.u.
// Throws std::runtime_error when the innovation variance is not positive.
void ekf_step(EkfState& st, const AgentModel& model, const EkfTuning& tuning, double t_sample_s,
              double f_meas_pu, double f_nominal_pu = 1.0);

// True iff the last `consecutive` successive differences are all strictly
// negative. values.front() is oldest.
bool detect_event(std::span<const double> values, int consecutive = 5);

// Least-squares slope over (t, y) pairs; requires >= 2 points.
double ls_slope(std::span<const double> t, std::span<const double> y);

// Initial loss estimate from the post-event window: k_lse * slope(p.u./s).
double lse_estimate(std::span<const double> t_s, std::span<const double> f_hz, double k_lse,
                    double f_nominal_hz);

// One condition check; increments hits when (f, rocof) lands in a row and
// rocof is below the row threshold. Returns shed_needed.
bool check_condition(const cloud::ShedConditionTable& table, double f_hz, double rocof_hz_s,
                     int& hits, int n_required);

double min_shed_requirement_mw(double delta_p_mw, double delta_p_s_mw);

struct AgentConfig {
  cloud::ParameterBundle bundle;
  bool provisioned = true;  // false: inert until a bundle arrives
  int detect_consecutive = 5;
  int lse_window = 10;
  int ekf_iterations = 40;
  int n_required = 15;
  int backup_consecutive = 5;  // debounce on the criterion-2 frequency check
  EkfTuning ekf;
  double sample_period_s = sfr::kSamplePeriod;
  double idle_reset_band_hz = 0.02;
  double idle_reset_hold_s = 1.0;
  std::string outlet_id = "outlet";
  double appliance_power_w = 0.0;
  bool record_estimates = false;  // keep the per-step filter trajectory (replay)
};

struct Action {
  bool switch_off = false;
  Cause cause = Cause::None;
};

struct LogEntry {
  double t_s = 0.0;
  Phase phase = Phase::Idle;
  Cause cause = Cause::None;
  double delta_p_est_pu = 0.0;
  std::string note;
};

// State machine of one smart outlet: detection, condition checking, LSE,
// EKF and the three switching criteria. Single-threaded; distinct agents
// share nothing.
class OutletAgent {
 public:
  explicit OutletAgent(AgentConfig config);

  // Feed one measured sample (f_hz already includes noise). Returns a
  // switch-off action at most once per episode. Out-of-order samples are
  // rejected with std::invalid_argument.
  Action ingest(const sfr::FrequencySample& sample);

  // Criterion 3. An off command switches off from any phase; an on command
  // restores an Off outlet to Idle.
  Action command(bool switch_on, double t_s);

  // Arms (or refreshes) the broadcast parameters. Idempotent for identical
  // bundles; a newer issued_at replaces the stored one.
  void set_bundle(const cloud::ParameterBundle& bundle);
  bool provisioned() const { return provisioned_; }

  Phase phase() const { return phase_; }
  bool shed_needed() const { return shed_needed_; }
  int condition_hits() const { return hits_; }
  bool decision_made() const { return decision_made_; }
  std::optional<double> lse_result_pu() const { return lse_result_pu_; }
  const std::optional<EkfState>& ekf_state() const { return ekf_; }
  std::optional<double> detect_time_s() const { return detect_time_s_; }
  std::optional<double> decision_time_s() const { return decision_time_s_; }
  const std::vector<LogEntry>& decision_log() const { return log_; }
  const std::vector<std::pair<double, double>>& estimate_history() const { return est_history_; }
  const AgentConfig& config() const { return config_; }

 private:
  void log(double t, Cause cause, const char* note);
  void reset_episode();
  Action finish_decision(double t_s);

  AgentConfig config_;
  bool provisioned_ = true;
  Phase phase_ = Phase::Idle;
  std::deque<double> times_;
  std::deque<double> freqs_;
  size_t buffer_cap_ = 0;

  int hits_ = 0;
  bool shed_needed_ = false;
  bool decision_made_ = false;  // criterion-1 evaluation completed this episode
  std::vector<double> lse_t_, lse_f_;
  std::optional<double> lse_result_pu_;
  std::optional<EkfState> ekf_;
  std::optional<double> detect_time_s_;
  std::optional<double> decision_time_s_;
  int backup_below_ = 0;
  int recover_count_ = 0;
  double last_t_ = -1e300;
  std::vector<LogEntry> log_;
  std::vector<std::pair<double, double>> est_history_;
};

}  // namespace gridsense::agent
