#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridsense/agent.hpp"
#include "gridsense/netsim.hpp"
#include "gridsense/sfr.hpp"

namespace gridsense::harness {

inline constexpr const char* kToolVersion = "1.0.0";

struct FleetSpec {
  long outlets = 100000;
  long groups = 1000;
  double watt_min = 10.0;
  double watt_max = 1800.0;
  long full_outlets = 1000000;  // reference population the wattages are scaled to
};

struct AgentTuning {
  int detect_consecutive = 5;
  int lse_window = 10;
  int ekf_iterations = 40;
  int n_required = 15;
  int backup_consecutive = 5;
  double p0_delta_p = 0.09;
  double p0_t_x = 1.1e-3;
  double q_delta_p = 1e-6;
  double q_t_x = 1e-8;
};

struct NetSpec {
  double latency_lo_s = 0.0;
  double latency_hi_s = 0.0;
  double drop_probability = 0.0;
  double bundle_lead_s = 60.0;  // bundles broadcast this long before the event
};

// Fully self-describing experiment description; two runs of the same
// scenario are identical.
struct Scenario {
  std::string name = "scenario";
  sfr::SystemParams system;
  std::vector<sfr::GeneratorUnit> units;  // optional; pins (h, r) when present
  double f_s_hz = 0.0;
  std::vector<sfr::PowerEvent> events;  // p.u. on system.s_base_mva
  FleetSpec fleet;
  NoiseSpec check_noise;       // event detection / condition checking / closed loop
  NoiseSpec estimation_noise;  // LSE / EKF accuracy studies
  double param_noise_frac = 0.0;
  long trials = 10000;
  uint64_t seed = 1;
  double duration_s = 30.0;
  AgentTuning agent;
  NetSpec net;

  sfr::DerivedParams derived() const { return sfr::derive(system); }
  double delta_p_s_mw() const {
    return sfr::threshold_power_loss_mw(derived(), system, f_s_hz);
  }
  // Canonical text form; the scenario hash is the FNV-1a of this string.
  std::string serialize() const;
  std::string hash_hex() const;
};

// Parses the sectioned-text scenario format. Errors carry 1-based line
// numbers. Sections: [system], [fleet], [event], [noise], [run], [agent],
// [net]; unknown sections or keys are errors.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& text, const std::string& name);

// The calibrated modified IEEE 24-bus scenario (bus-23 units removed, UHVDC
// infeed as the contingency). (h, r) are pinned so the threshold power loss
// and nadir time match the reference values; scripts/calibrate_ieee24.py
// reproduces them from the bucketed generator data.
Scenario build_ieee24();

uint64_t fnv1a64(const std::string& bytes);

}  // namespace gridsense::harness
