#include "gridsense/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gridsense::agent {

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Idle: return "idle";
    case Phase::EventDetected: return "event_detected";
    case Phase::Estimating: return "estimating";
    case Phase::ShedDecided: return "shed_decided";
    case Phase::Off: return "off";
  }
  return "?";
}

const char* cause_name(Cause c) {
  switch (c) {
    case Cause::None: return "none";
    case Cause::ConditionCriterion: return "condition";
    case Cause::BackupFrequency: return "backup_frequency";
    case Cause::Command: return "command";
  }
  return "?";
}

EkfState ekf_init(double delta_p_init_pu, double t_x0_s, const EkfTuning& tuning) {
  EkfState st;
  st.delta_p_pu = delta_p_init_pu;
  st.t_x_s = t_x0_s;
  st.p00 = tuning.p0_delta_p;
  st.p01 = 0.0;
  st.p11 = tuning.p0_t_x;
  st.k = 0;
  return st;
}

void ekf_step(EkfState& st, const AgentModel& m, const EkfTuning& tuning, double t_sample_s,
              double f_meas_pu, double f_nominal_pu) {
  // Predict: identity transition, covariance grows by q.
  double p00 = st.p00 + tuning.q_delta_p;
  double p01 = st.p01;
  double p11 = st.p11 + tuning.q_t_x;

  const double tau = t_sample_s - st.t_x_s;
  const double env = m.alpha * std::exp(-m.zwn * tau);
  const double arg = m.omega_r * tau + m.phi;
  const double s = std::sin(arg);
  const double c = std::cos(arg);

  // Nonlinear prediction and its measurement Jacobian.
  const double hx = f_nominal_pu + m.g1 * st.delta_p_pu * (1.0 + env * s);
  const double h0 = m.g1 * (1.0 + env * s);
  const double h1 = m.g2_factor * m.g1 * st.delta_p_pu * env * (m.zwn * s - m.omega_r * c);

  const double innovation = f_meas_pu - hx;
  const double s_var = h0 * (p00 * h0 + p01 * h1) + h1 * (p01 * h0 + p11 * h1) + tuning.r_meas_pu2;
  if (!(s_var > 0.0)) throw std::runtime_error("ekf_step: innovation variance <= 0");

  const double k0 = (p00 * h0 + p01 * h1) / s_var;
  const double k1 = (p01 * h0 + p11 * h1) / s_var;
  st.delta_p_pu += k0 * innovation;
  st.t_x_s += k1 * innovation;
  if (!std::isfinite(st.delta_p_pu) || !std::isfinite(st.t_x_s))
    throw std::runtime_error("ekf_step: state diverged");

  // Joseph-form covariance update, then symmetrize.
  const double a00 = 1.0 - k0 * h0, a01 = -k0 * h1;
  const double a10 = -k1 * h0, a11 = 1.0 - k1 * h1;
  const double t00 = a00 * p00 + a01 * p01, t01 = a00 * p01 + a01 * p11;
  const double t10 = a10 * p00 + a11 * p01, t11 = a10 * p01 + a11 * p11;
  double n00 = t00 * a00 + t01 * a01 + k0 * k0 * tuning.r_meas_pu2;
  double n01 = t00 * a10 + t01 * a11 + k0 * k1 * tuning.r_meas_pu2;
  double n10 = t10 * a00 + t11 * a01 + k1 * k0 * tuning.r_meas_pu2;
  double n11 = t10 * a10 + t11 * a11 + k1 * k1 * tuning.r_meas_pu2;
  st.p00 = n00;
  st.p01 = 0.5 * (n01 + n10);
  st.p11 = n11;
  ++st.k;
}

bool detect_event(std::span<const double> values, int consecutive) {
  if (static_cast<int>(values.size()) < consecutive + 1) return false;
  const size_t n = values.size();
  for (int i = 0; i < consecutive; ++i) {
    if (!(values[n - 1 - i] < values[n - 2 - i])) return false;
  }
  return true;
}

double ls_slope(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size() || t.size() < 2)
    throw std::invalid_argument("ls_slope: need >= 2 paired points");
  const double n = static_cast<double>(t.size());
  double tm = 0.0, ym = 0.0;
  for (size_t i = 0; i < t.size(); ++i) {
    tm += t[i];
    ym += y[i];
  }
  tm /= n;
  ym /= n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < t.size(); ++i) {
    const double dx = t[i] - tm;
    sxx += dx * dx;
    sxy += dx * (y[i] - ym);
  }
  if (sxx <= 0.0) throw std::invalid_argument("ls_slope: degenerate abscissae");
  return sxy / sxx;
}

double lse_estimate(std::span<const double> t_s, std::span<const double> f_hz, double k_lse,
                    double f_nominal_hz) {
  const double slope_pu = ls_slope(t_s, f_hz) / f_nominal_hz;
  return k_lse * slope_pu;
}

bool check_condition(const cloud::ShedConditionTable& table, double f_hz, double rocof_hz_s,
                     int& hits, int n_required) {
  const auto* row = table.row_for(f_hz);
  if (row && rocof_hz_s < row->rocof_threshold_hz_s) ++hits;
  return hits >= n_required;
}

double min_shed_requirement_mw(double delta_p_mw, double delta_p_s_mw) {
  if (delta_p_s_mw < 0.0) throw std::invalid_argument("min_shed_requirement: delta_p_s must be >= 0");
  return std::max(delta_p_mw - delta_p_s_mw, 0.0);
}

OutletAgent::OutletAgent(AgentConfig config)
    : config_(std::move(config)), provisioned_(config_.provisioned) {
  if (config_.detect_consecutive < 1 || config_.lse_window < 1 || config_.ekf_iterations < 1 ||
      config_.n_required < 1)
    throw std::invalid_argument("OutletAgent: all counts must be >= 1");
  buffer_cap_ = static_cast<size_t>(
      std::max(config_.lse_window, config_.detect_consecutive + 1));
  lse_t_.reserve(config_.lse_window);
  lse_f_.reserve(config_.lse_window);
}

void OutletAgent::log(double t, Cause cause, const char* note) {
  LogEntry e;
  e.t_s = t;
  e.phase = phase_;
  e.cause = cause;
  e.delta_p_est_pu = ekf_ ? ekf_->delta_p_pu : (lse_result_pu_ ? *lse_result_pu_ : 0.0);
  e.note = note;
  log_.push_back(std::move(e));
}

void OutletAgent::reset_episode() {
  phase_ = Phase::Idle;
  hits_ = 0;
  shed_needed_ = false;
  decision_made_ = false;
  lse_t_.clear();
  lse_f_.clear();
  lse_result_pu_.reset();
  ekf_.reset();
  detect_time_s_.reset();
  backup_below_ = 0;
  recover_count_ = 0;
}

Action OutletAgent::finish_decision(double t_s) {
  decision_made_ = true;
  decision_time_s_ = t_s;
  const double est_mw = ekf_->delta_p_pu * config_.bundle.s_base_mva;
  const double shed_req_mw = min_shed_requirement_mw(est_mw, config_.bundle.delta_p_s_mw);
  if (shed_needed_ && shed_req_mw > config_.bundle.accumulated_power_mw) {
    phase_ = Phase::ShedDecided;
    log(t_s, Cause::ConditionCriterion, "shed");
    phase_ = Phase::Off;
    return {true, Cause::ConditionCriterion};
  }
  log(t_s, Cause::None, "stay_on");
  // Episode continues until the frequency recovers; detector stays quiet.
  phase_ = Phase::EventDetected;
  return {};
}

Action OutletAgent::ingest(const sfr::FrequencySample& sample) {
  if (sample.t_s <= last_t_)
    throw std::invalid_argument("OutletAgent::ingest: out-of-order sample");
  last_t_ = sample.t_s;
  if (phase_ == Phase::Off) return {};

  times_.push_back(sample.t_s);
  freqs_.push_back(sample.f_hz);
  if (times_.size() > buffer_cap_) {
    times_.pop_front();
    freqs_.pop_front();
  }
  if (!provisioned_) return {};  // monitoring only until a bundle arrives

  const auto& bundle = config_.bundle;

  // Criterion 2, debounced: active until the primary path has delivered its
  // decision for this episode, so the backup cannot be starved but also does
  // not override a completed stay-on verdict.
  if (!decision_made_) {
    if (sample.f_hz < bundle.switch_off_freq_hz)
      ++backup_below_;
    else
      backup_below_ = 0;
    if (backup_below_ >= config_.backup_consecutive) {
      decision_time_s_ = sample.t_s;
      log(sample.t_s, Cause::BackupFrequency, "backup");
      phase_ = Phase::Off;
      return {true, Cause::BackupFrequency};
    }
  }

  // Episode recovery: frequency back near nominal for a hold period.
  if (phase_ != Phase::Idle) {
    if (sample.f_hz >= bundle.f_nominal_hz - config_.idle_reset_band_hz)
      ++recover_count_;
    else
      recover_count_ = 0;
    if (recover_count_ * config_.sample_period_s >= config_.idle_reset_hold_s) {
      reset_episode();
      return {};
    }
  }

  auto last_drops_all_negative = [&]() {
    const int need = config_.detect_consecutive;
    const auto n = freqs_.size();
    if (static_cast<int>(n) < need + 1) return false;
    for (int i = 0; i < need; ++i) {
      if (!(freqs_[n - 1 - i] < freqs_[n - 2 - i])) return false;
    }
    return true;
  };

  if (phase_ == Phase::Idle) {
    if (last_drops_all_negative()) {
      phase_ = Phase::EventDetected;
      detect_time_s_ = sample.t_s;
      hits_ = 0;
      log(sample.t_s, Cause::None, "detected");
    } else {
      return {};
    }
  } else if (phase_ == Phase::EventDetected && !decision_made_) {
    // Collecting the LSE window: the next lse_window samples after detection.
    lse_t_.push_back(sample.t_s);
    lse_f_.push_back(sample.f_hz);
    if (static_cast<int>(lse_t_.size()) == config_.lse_window) {
      lse_result_pu_ = lse_estimate(lse_t_, lse_f_, bundle.derived.k_lse, bundle.f_nominal_hz);
      const double t_x0 = *detect_time_s_ - config_.detect_consecutive * config_.sample_period_s;
      ekf_ = ekf_init(*lse_result_pu_, t_x0, config_.ekf);
      phase_ = Phase::Estimating;
      log(sample.t_s, Cause::None, "lse_done");
    }
  } else if (phase_ == Phase::Estimating) {
    ekf_step(*ekf_, AgentModel::from_derived(bundle.derived), config_.ekf, sample.t_s,
             sample.f_hz / bundle.f_nominal_hz);
    if (config_.record_estimates) est_history_.emplace_back(sample.t_s, ekf_->delta_p_pu);
  }

  // Condition checking runs from the detection sample through the decision
  // sample, in parallel with the estimation pipeline. The agent forms its
  // own ROCOF as the least-squares slope of its recent buffer.
  if (phase_ != Phase::Idle && !decision_made_ &&
      static_cast<int>(times_.size()) >= config_.lse_window) {
    const size_t n = times_.size();
    const size_t first = n - config_.lse_window;
    double tm = 0.0, fm = 0.0;
    for (size_t i = first; i < n; ++i) {
      tm += times_[i];
      fm += freqs_[i];
    }
    tm /= config_.lse_window;
    fm /= config_.lse_window;
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = first; i < n; ++i) {
      const double dx = times_[i] - tm;
      sxx += dx * dx;
      sxy += dx * (freqs_[i] - fm);
    }
    const double rocof_est = sxy / sxx;
    shed_needed_ = check_condition(bundle.condition_table, sample.f_hz, rocof_est, hits_,
                                   config_.n_required) ||
                   shed_needed_;
  }

  if (phase_ == Phase::Estimating && ekf_->k >= config_.ekf_iterations) return finish_decision(sample.t_s);
  return {};
}

void OutletAgent::set_bundle(const cloud::ParameterBundle& bundle) {
  config_.bundle = bundle;
  provisioned_ = true;
}

Action OutletAgent::command(bool switch_on, double t_s) {
  if (!switch_on) {
    if (phase_ == Phase::Off) return {};
    decision_time_s_ = t_s;
    log(t_s, Cause::Command, "off_command");
    phase_ = Phase::Off;
    return {true, Cause::Command};
  }
  if (phase_ == Phase::Off) {
    reset_episode();
    times_.clear();
    freqs_.clear();
    log(t_s, Cause::Command, "on_command");
  }
  return {};
}

}  // namespace gridsense::agent
