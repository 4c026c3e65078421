#include "gridsense/sfr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gridsense::sfr {

void SystemParams::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  require(h > 0.0, "SystemParams: h must be > 0");
  require(r > 0.0, "SystemParams: r must be > 0");
  require(tr > 0.0, "SystemParams: tr must be > 0");
  require(s_base_mva > 0.0, "SystemParams: s_base_mva must be > 0");
  require(f_nominal_hz > 0.0, "SystemParams: f_nominal_hz must be > 0");
  require(p_load_total_mw > 0.0, "SystemParams: p_load_total_mw must be > 0");
  require(d >= 0.0, "SystemParams: d must be >= 0");
  require(fh >= 0.0 && fh <= 1.0, "SystemParams: fh must be in [0, 1]");
  require(km > 0.0, "SystemParams: km must be > 0");
}

double aggregate_inertia(std::span<const GeneratorUnit> units, double s_base_mva) {
  if (units.empty()) throw std::invalid_argument("aggregate_inertia: empty unit list");
  if (s_base_mva <= 0.0) throw std::invalid_argument("aggregate_inertia: s_base must be > 0");
  double sum = 0.0;
  for (const auto& u : units) {
    if (u.rating_mva <= 0.0 || u.inertia_h <= 0.0)
      throw std::invalid_argument("aggregate_inertia: unit rating and inertia must be > 0");
    sum += u.inertia_h * u.rating_mva;
  }
  return sum / s_base_mva;
}

double aggregate_droop(std::span<const GeneratorUnit> units, double s_base_mva) {
  if (units.empty()) throw std::invalid_argument("aggregate_droop: empty unit list");
  if (s_base_mva <= 0.0) throw std::invalid_argument("aggregate_droop: s_base must be > 0");
  // Rating-weighted parallel combination: 1/r = sum (S_i/S_base)/R_i.
  double inv = 0.0;
  for (const auto& u : units) {
    if (u.droop_r <= 0.0) throw std::invalid_argument("aggregate_droop: unit droop must be > 0");
    if (u.rating_mva <= 0.0) throw std::invalid_argument("aggregate_droop: unit rating must be > 0");
    inv += (u.rating_mva / s_base_mva) / u.droop_r;
  }
  return 1.0 / inv;
}

DerivedParams derive(const SystemParams& p) {
  p.validate();
  const double dr_km = p.d * p.r + p.km;
  DerivedParams dv;
  dv.omega_n = std::sqrt(dr_km / (2.0 * p.h * p.r * p.tr));
  dv.zeta = (2.0 * p.h * p.r + (p.d * p.r + p.km * p.fh) * p.tr) / (2.0 * dr_km) * dv.omega_n;
  if (dv.zeta >= 1.0)
    throw UnsupportedRegime("derive: damping ratio >= 1, oscillatory closed form not applicable");
  const double root = std::sqrt(1.0 - dv.zeta * dv.zeta);
  dv.omega_r = dv.omega_n * root;
  dv.alpha = std::sqrt((1.0 - 2.0 * p.tr * dv.zeta * dv.omega_n + p.tr * p.tr * dv.omega_n * dv.omega_n) /
                       (1.0 - dv.zeta * dv.zeta));
  // Quadrant-correct phases; the nadir identity g(t_nadir) = 0 depends on
  // phi1 landing in (0, pi).
  dv.phi1 = std::atan2(dv.omega_r * p.tr, 1.0 - dv.zeta * dv.omega_n * p.tr);
  const double phi2 = std::atan2(root, -dv.zeta);
  dv.phi = dv.phi1 - phi2;
  dv.g1 = -p.r / dr_km;
  dv.k_lse = -dr_km / (dv.alpha * dv.omega_n * p.r * std::sin(dv.phi1));
  return dv;
}

double delta_f(const DerivedParams& dv, double delta_p_pu, double t_s) {
  if (t_s < 0.0) return 0.0;
  const double envelope = dv.alpha * std::exp(-dv.zeta * dv.omega_n * t_s) *
                          std::sin(dv.omega_r * t_s + dv.phi);
  return dv.g1 * delta_p_pu * (1.0 + envelope);
}

double delta_f_multi(const DerivedParams& dv, std::span<const PowerEvent> events, double t_s) {
  double sum = 0.0;
  for (const auto& ev : events) {
    if (t_s < ev.time_s) continue;
    sum += delta_f(dv, ev.delta_p_pu, t_s - ev.time_s);
  }
  return sum;
}

double rocof(const DerivedParams& dv, double delta_p_pu, double t_s) {
  if (t_s < 0.0) return 0.0;
  return dv.g1 * delta_p_pu * dv.alpha * dv.omega_n * std::exp(-dv.zeta * dv.omega_n * t_s) *
         std::sin(dv.omega_r * t_s + dv.phi1);
}

double rocof_hz(const DerivedParams& dv, const SystemParams& sys, double delta_p_pu, double t_s) {
  return rocof(dv, delta_p_pu, t_s) * sys.f_nominal_hz;
}

double rocof_multi(const DerivedParams& dv, std::span<const PowerEvent> events, double t_s) {
  double sum = 0.0;
  for (const auto& ev : events) {
    if (t_s < ev.time_s) continue;
    sum += rocof(dv, ev.delta_p_pu, t_s - ev.time_s);
  }
  return sum;
}

double t_nadir(const DerivedParams& dv) {
  return (3.14159265358979323846 - dv.phi1) / dv.omega_r;
}

namespace {

// 1 + alpha e^{-zeta wn t} sin(wr t + phi), evaluated at the nadir.
double nadir_drop_factor(const DerivedParams& dv) {
  const double tn = t_nadir(dv);
  return 1.0 + dv.alpha * std::exp(-dv.zeta * dv.omega_n * tn) * std::sin(dv.omega_r * tn + dv.phi);
}

}  // namespace

double f_nadir_hz(const DerivedParams& dv, const SystemParams& sys, double delta_p_pu) {
  return sys.f_nominal_hz * (1.0 + dv.g1 * delta_p_pu * nadir_drop_factor(dv));
}

double threshold_power_loss(const DerivedParams& dv, const SystemParams& sys, double f_s_hz) {
  // f_s equal to nominal is a zero numerator, hence zero threshold loss.
  if (f_s_hz > sys.f_nominal_hz)
    throw std::invalid_argument("threshold_power_loss: f_s must not exceed nominal frequency");
  const double drop_pu = (sys.f_nominal_hz - f_s_hz) / sys.f_nominal_hz;
  return drop_pu / (-dv.g1 * nadir_drop_factor(dv));
}

double threshold_power_loss_mw(const DerivedParams& dv, const SystemParams& sys, double f_s_hz) {
  return sys.pu_to_mw(threshold_power_loss(dv, sys, f_s_hz));
}

std::vector<OdePoint> ode_oracle(const SystemParams& sys, std::span<const PowerEvent> events,
                                 double t_end_s, double dt_s) {
  sys.validate();
  if (dt_s <= 0.0 || dt_s > 1e-3)
    throw std::invalid_argument("ode_oracle: dt must be in (0, 1e-3] s");

  // States: xf = delta f (p.u.), xg = slow reheat component of governor
  // output. Mechanical power = -km*fh/r * xf + xg, setpoint held at zero.
  struct Deriv {
    double df, dg;
  };
  const double km_fast = sys.km * sys.fh / sys.r;
  const double km_slow = sys.km * (1.0 - sys.fh) / sys.r;
  auto rhs = [&](double xf, double xg, double load_pu) -> Deriv {
    const double pm = -km_fast * xf + xg;
    return {(pm - load_pu - sys.d * xf) / (2.0 * sys.h), (-km_slow * xf - xg) / sys.tr};
  };

  std::vector<OdePoint> out;
  const auto n_total = static_cast<size_t>(std::llround(t_end_s / dt_s));
  out.reserve(n_total + 1);
  out.push_back({0.0, 0.0});

  double xf = 0.0, xg = 0.0;
  double load = 0.0;
  size_t next_event = 0;
  for (size_t i = 0; i < n_total; ++i) {
    const double t = i * dt_s;
    while (next_event < events.size() && events[next_event].time_s <= t + 0.5 * dt_s) {
      load += events[next_event].delta_p_pu;
      ++next_event;
    }
    const Deriv k1 = rhs(xf, xg, load);
    const Deriv k2 = rhs(xf + 0.5 * dt_s * k1.df, xg + 0.5 * dt_s * k1.dg, load);
    const Deriv k3 = rhs(xf + 0.5 * dt_s * k2.df, xg + 0.5 * dt_s * k2.dg, load);
    const Deriv k4 = rhs(xf + dt_s * k3.df, xg + dt_s * k3.dg, load);
    xf += dt_s / 6.0 * (k1.df + 2.0 * k2.df + 2.0 * k3.df + k4.df);
    xg += dt_s / 6.0 * (k1.dg + 2.0 * k2.dg + 2.0 * k3.dg + k4.dg);
    out.push_back({(i + 1) * dt_s, xf});
  }
  return out;
}

std::vector<FrequencySample> sample_trajectory(const DerivedParams& dv, const SystemParams& sys,
                                               std::span<const PowerEvent> events, double duration_s,
                                               const NoiseSpec& noise, uint64_t seed,
                                               bool with_rocof) {
  if (duration_s <= 0.0) throw std::invalid_argument("sample_trajectory: duration must be > 0");
  Rng rng(seed);
  std::vector<FrequencySample> out;
  const auto n = static_cast<size_t>(std::floor(duration_s / kSamplePeriod)) + 1;
  out.reserve(n);
  for (size_t k = 0; k < n; ++k) {
    const double t = k * kSamplePeriod;
    FrequencySample s;
    s.t_s = t;
    s.f_hz = sys.f_nominal_hz * (1.0 + delta_f_multi(dv, events, t)) + noise.sample_hz(rng);
    s.rocof_hz_per_s = with_rocof ? rocof_multi(dv, events, t) * sys.f_nominal_hz
                                  : std::numeric_limits<double>::quiet_NaN();
    out.push_back(s);
  }
  return out;
}

double time_at_frequency(const DerivedParams& dv, const SystemParams& sys, double delta_p_pu,
                         double f_hz) {
  const double target_pu = (f_hz - sys.f_nominal_hz) / sys.f_nominal_hz;
  double lo = 0.0, hi = t_nadir(dv);
  if (delta_f(dv, delta_p_pu, hi) > target_pu)
    throw std::invalid_argument("time_at_frequency: frequency below the trajectory nadir");
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (delta_f(dv, delta_p_pu, mid) > target_pu)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace gridsense::sfr
