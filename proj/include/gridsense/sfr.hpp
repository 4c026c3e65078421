#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "gridsense/rng.hpp"

namespace gridsense::sfr {

// Raised when the closed-form response does not apply (damping ratio >= 1).
struct UnsupportedRegime : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GeneratorUnit {
  double rating_mva = 0.0;
  double inertia_h = 0.0;  // s
  double droop_r = 0.0;    // p.u.
};

// Physical constants of the equivalent frequency-response model. All
// dynamics run in per-unit on (s_base_mva, f_nominal_hz); MW and Hz appear
// only at API edges.
struct SystemParams {
  double h = 0.0;   // equivalent inertia, s
  double d = 0.0;   // load damping, p.u.
  double r = 0.0;   // equivalent droop, p.u.
  double km = 0.0;  // power gain factor
  double fh = 0.0;  // reheat fraction
  double tr = 0.0;  // reheat time constant, s
  double s_base_mva = 0.0;
  double f_nominal_hz = 0.0;
  double p_load_total_mw = 0.0;

  void validate() const;  // throws std::invalid_argument
  double mw_to_pu(double mw) const { return mw / s_base_mva; }
  double pu_to_mw(double pu) const { return pu * s_base_mva; }
};

// Modal constants of the closed-form step response. Deriving twice from the
// same SystemParams reproduces every field bit-for-bit.
struct DerivedParams {
  double omega_n = 0.0;  // rad/s
  double zeta = 0.0;
  double omega_r = 0.0;  // rad/s
  double alpha = 0.0;
  double phi = 0.0;      // rad, phi1 - phi2
  double phi1 = 0.0;     // rad
  double k_lse = 0.0;    // p.u. power per (p.u. freq)/s
  double g1 = 0.0;       // -r/(d*r + km)
};

struct PowerEvent {
  double time_s = 0.0;
  double delta_p_pu = 0.0;  // positive = loss
};

struct FrequencySample {
  double t_s = 0.0;
  double f_hz = 0.0;
  double rocof_hz_per_s = 0.0;
};

inline constexpr double kSamplePeriod = 0.016;  // s, one measurement every 16 ms

double aggregate_inertia(std::span<const GeneratorUnit> units, double s_base_mva);
double aggregate_droop(std::span<const GeneratorUnit> units, double s_base_mva);

// Modal constants; throws UnsupportedRegime when the response is not
// underdamped (the closed form assumes an oscillatory mode).
DerivedParams derive(const SystemParams& params);

// Frequency deviation (p.u.) for a single step loss at t=0. Zero for t < 0.
double delta_f(const DerivedParams& dv, double delta_p_pu, double t_s);

// Superposition over time-sorted events, each term gated to t >= t_j.
double delta_f_multi(const DerivedParams& dv, std::span<const PowerEvent> events, double t_s);

// Analytic df/dt in p.u./s for a single step loss at t=0.
double rocof(const DerivedParams& dv, double delta_p_pu, double t_s);
double rocof_hz(const DerivedParams& dv, const SystemParams& sys, double delta_p_pu, double t_s);
double rocof_multi(const DerivedParams& dv, std::span<const PowerEvent> events, double t_s);

double t_nadir(const DerivedParams& dv);
double f_nadir_hz(const DerivedParams& dv, const SystemParams& sys, double delta_p_pu);

// Loss magnitude whose nadir equals f_s.
double threshold_power_loss(const DerivedParams& dv, const SystemParams& sys, double f_s_hz);
double threshold_power_loss_mw(const DerivedParams& dv, const SystemParams& sys, double f_s_hz);

// One point of the numerically integrated reference trajectory.
struct OdePoint {
  double t_s = 0.0;
  double delta_f_pu = 0.0;
};

// Fixed-step RK4 integration of the swing equation with the reheat governor
// realized in state space. Independent reference for the closed form; runs
// for overdamped systems too.
std::vector<OdePoint> ode_oracle(const SystemParams& sys, std::span<const PowerEvent> events,
                                 double t_end_s, double dt_s);

// Samples the closed-form trajectory every 16 ms with measurement noise.
// The rocof field is NaN unless with_rocof is set, in which case it carries
// the noiseless analytic value.
std::vector<FrequencySample> sample_trajectory(const DerivedParams& dv, const SystemParams& sys,
                                               std::span<const PowerEvent> events, double duration_s,
                                               const NoiseSpec& noise, uint64_t seed,
                                               bool with_rocof = false);

// Time at which the single-event trajectory first crosses f_hz on the way
// down (bisection over [0, t_nadir]).
double time_at_frequency(const DerivedParams& dv, const SystemParams& sys, double delta_p_pu,
                         double f_hz);

}  // namespace gridsense::sfr
