#include "gridsense/scenario.hpp"

#include <algorithm>

#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gridsense::harness {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void fail(const std::string& name, int line, const std::string& msg) {
  throw std::invalid_argument(name + ":" + std::to_string(line) + ": " + msg);
}

struct Entry {
  std::string value;
  int line = 0;
};

using Sections = std::map<std::string, std::vector<std::pair<std::string, Entry>>>;

double to_double(const std::string& name, const std::pair<std::string, Entry>& kv) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(kv.second.value, &pos);
  } catch (const std::exception&) {
    fail(name, kv.second.line, "expected a number for '" + kv.first + "'");
  }
  if (pos != kv.second.value.size())
    fail(name, kv.second.line, "trailing characters after number for '" + kv.first + "'");
  return v;
}

long to_long(const std::string& name, const std::pair<std::string, Entry>& kv) {
  const double v = to_double(name, kv);
  const long l = static_cast<long>(v);
  if (static_cast<double>(l) != v) fail(name, kv.second.line, "expected an integer for '" + kv.first + "'");
  return l;
}

NoiseModel to_noise_model(const std::string& name, const std::pair<std::string, Entry>& kv) {
  const std::string& v = kv.second.value;
  if (v == "none") return NoiseModel::None;
  if (v == "uniform") return NoiseModel::Uniform;
  if (v == "gauss" || v == "gaussian") return NoiseModel::Gaussian;
  fail(name, kv.second.line, "noise model must be none|uniform|gauss");
}

const char* noise_model_name(NoiseModel m) {
  switch (m) {
    case NoiseModel::None: return "none";
    case NoiseModel::Uniform: return "uniform";
    case NoiseModel::Gaussian: return "gauss";
  }
  return "?";
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string Scenario::serialize() const {
  std::ostringstream os;
  os << "[system]\n";
  for (const auto& u : units)
    os << "unit = " << fmt(u.rating_mva) << ' ' << fmt(u.inertia_h) << ' ' << fmt(u.droop_r) << '\n';
  os << "h = " << fmt(system.h) << "\nr = " << fmt(system.r) << "\nd = " << fmt(system.d)
     << "\nkm = " << fmt(system.km) << "\nfh = " << fmt(system.fh) << "\ntr = " << fmt(system.tr)
     << "\ns_base_mva = " << fmt(system.s_base_mva) << "\nf_nominal_hz = " << fmt(system.f_nominal_hz)
     << "\np_load_total_mw = " << fmt(system.p_load_total_mw) << "\nf_s_hz = " << fmt(f_s_hz) << '\n';
  os << "[fleet]\noutlets = " << fleet.outlets << "\ngroups = " << fleet.groups
     << "\nwatt_min = " << fmt(fleet.watt_min) << "\nwatt_max = " << fmt(fleet.watt_max)
     << "\nfull_outlets = " << fleet.full_outlets << '\n';
  os << "[event]\n";
  for (const auto& ev : events)
    os << "loss = " << fmt(ev.time_s) << ' ' << fmt(ev.delta_p_pu * system.s_base_mva) << '\n';
  os << "[noise]\ncheck_model = " << noise_model_name(check_noise.model)
     << "\ncheck_level_hz = " << fmt(check_noise.level_hz)
     << "\nestimation_model = " << noise_model_name(estimation_noise.model)
     << "\nestimation_level_hz = " << fmt(estimation_noise.level_hz)
     << "\nparam_noise_pct = " << fmt(param_noise_frac * 100.0) << '\n';
  os << "[run]\ntrials = " << trials << "\nseed = " << seed << "\nduration_s = " << fmt(duration_s)
     << '\n';
  os << "[agent]\ndetect_consecutive = " << agent.detect_consecutive
     << "\nlse_window = " << agent.lse_window << "\nekf_iterations = " << agent.ekf_iterations
     << "\nn_required = " << agent.n_required << "\nbackup_consecutive = " << agent.backup_consecutive
     << "\np0_delta_p = " << fmt(agent.p0_delta_p) << "\np0_t_x = " << fmt(agent.p0_t_x)
     << "\nq_delta_p = " << fmt(agent.q_delta_p) << "\nq_t_x = " << fmt(agent.q_t_x) << '\n';
  os << "[net]\nlatency_lo_s = " << fmt(net.latency_lo_s) << "\nlatency_hi_s = " << fmt(net.latency_hi_s)
     << "\ndrop_probability = " << fmt(net.drop_probability)
     << "\nbundle_lead_s = " << fmt(net.bundle_lead_s) << '\n';
  return os.str();
}

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string Scenario::hash_hex() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(serialize()));
  return buf;
}

Scenario parse_scenario(const std::string& text, const std::string& name) {
  static const std::set<std::string> known_sections = {"system", "fleet", "event",
                                                       "noise",  "run",   "agent", "net"};
  Sections sections;
  std::istringstream is(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(name, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_sections.count(section)) fail(name, line_no, "unknown section [" + section + "]");
      sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(name, line_no, "expected 'key = value'");
    if (section.empty()) fail(name, line_no, "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) fail(name, line_no, "empty key or value");
    sections[section].emplace_back(key, Entry{value, line_no});
  }

  Scenario scn;
  scn.name = name;
  bool have_h = false, have_r = false;
  for (const auto& [section_name, entries] : sections) {
    for (const auto& kv : entries) {
      const std::string& k = kv.first;
      if (section_name == "system") {
        if (k == "unit") {
          std::istringstream vs(kv.second.value);
          sfr::GeneratorUnit u;
          if (!(vs >> u.rating_mva >> u.inertia_h >> u.droop_r))
            fail(name, kv.second.line, "unit needs: rating_mva inertia_h droop_r");
          scn.units.push_back(u);
        } else if (k == "h") {
          scn.system.h = to_double(name, kv);
          have_h = true;
        } else if (k == "r") {
          scn.system.r = to_double(name, kv);
          have_r = true;
        } else if (k == "d") {
          scn.system.d = to_double(name, kv);
        } else if (k == "km") {
          scn.system.km = to_double(name, kv);
        } else if (k == "fh") {
          scn.system.fh = to_double(name, kv);
        } else if (k == "tr") {
          scn.system.tr = to_double(name, kv);
        } else if (k == "s_base_mva") {
          scn.system.s_base_mva = to_double(name, kv);
        } else if (k == "f_nominal_hz") {
          scn.system.f_nominal_hz = to_double(name, kv);
        } else if (k == "p_load_total_mw") {
          scn.system.p_load_total_mw = to_double(name, kv);
        } else if (k == "f_s_hz") {
          scn.f_s_hz = to_double(name, kv);
        } else {
          fail(name, kv.second.line, "unknown key '" + k + "' in [system]");
        }
      } else if (section_name == "fleet") {
        if (k == "outlets") scn.fleet.outlets = to_long(name, kv);
        else if (k == "groups") scn.fleet.groups = to_long(name, kv);
        else if (k == "watt_min") scn.fleet.watt_min = to_double(name, kv);
        else if (k == "watt_max") scn.fleet.watt_max = to_double(name, kv);
        else if (k == "full_outlets") scn.fleet.full_outlets = to_long(name, kv);
        else fail(name, kv.second.line, "unknown key '" + k + "' in [fleet]");
      } else if (section_name == "event") {
        if (k == "loss") {
          std::istringstream vs(kv.second.value);
          double t = 0.0, mw = 0.0;
          if (!(vs >> t >> mw)) fail(name, kv.second.line, "loss needs: time_s delta_p_mw");
          scn.events.push_back({t, 0.0});  // converted to p.u. after s_base is known
          scn.events.back().delta_p_pu = mw;  // stash MW; fixed below
        } else {
          fail(name, kv.second.line, "unknown key '" + k + "' in [event]");
        }
      } else if (section_name == "noise") {
        if (k == "check_model") scn.check_noise.model = to_noise_model(name, kv);
        else if (k == "check_level_hz") scn.check_noise.level_hz = to_double(name, kv);
        else if (k == "estimation_model") scn.estimation_noise.model = to_noise_model(name, kv);
        else if (k == "estimation_level_hz") scn.estimation_noise.level_hz = to_double(name, kv);
        else if (k == "param_noise_pct") scn.param_noise_frac = to_double(name, kv) / 100.0;
        else fail(name, kv.second.line, "unknown key '" + k + "' in [noise]");
      } else if (section_name == "run") {
        if (k == "trials") scn.trials = to_long(name, kv);
        else if (k == "seed") scn.seed = static_cast<uint64_t>(to_long(name, kv));
        else if (k == "duration_s") scn.duration_s = to_double(name, kv);
        else fail(name, kv.second.line, "unknown key '" + k + "' in [run]");
      } else if (section_name == "agent") {
        if (k == "detect_consecutive") scn.agent.detect_consecutive = static_cast<int>(to_long(name, kv));
        else if (k == "lse_window") scn.agent.lse_window = static_cast<int>(to_long(name, kv));
        else if (k == "ekf_iterations") scn.agent.ekf_iterations = static_cast<int>(to_long(name, kv));
        else if (k == "n_required") scn.agent.n_required = static_cast<int>(to_long(name, kv));
        else if (k == "backup_consecutive") scn.agent.backup_consecutive = static_cast<int>(to_long(name, kv));
        else if (k == "p0_delta_p") scn.agent.p0_delta_p = to_double(name, kv);
        else if (k == "p0_t_x") scn.agent.p0_t_x = to_double(name, kv);
        else if (k == "q_delta_p") scn.agent.q_delta_p = to_double(name, kv);
        else if (k == "q_t_x") scn.agent.q_t_x = to_double(name, kv);
        else fail(name, kv.second.line, "unknown key '" + k + "' in [agent]");
      } else if (section_name == "net") {
        if (k == "latency_lo_s") scn.net.latency_lo_s = to_double(name, kv);
        else if (k == "latency_hi_s") scn.net.latency_hi_s = to_double(name, kv);
        else if (k == "drop_probability") scn.net.drop_probability = to_double(name, kv);
        else if (k == "bundle_lead_s") scn.net.bundle_lead_s = to_double(name, kv);
        else fail(name, kv.second.line, "unknown key '" + k + "' in [net]");
      }
    }
  }

  if (!scn.units.empty()) {
    if (have_h || have_r)
      fail(name, 1, "[system] must pin either (h, r) or a unit list, not both");
    scn.system.h = sfr::aggregate_inertia(scn.units, scn.system.s_base_mva);
    scn.system.r = sfr::aggregate_droop(scn.units, scn.system.s_base_mva);
  }
  if (scn.system.s_base_mva <= 0.0) fail(name, 1, "[system] s_base_mva missing or invalid");
  for (auto& ev : scn.events) ev.delta_p_pu /= scn.system.s_base_mva;  // MW -> p.u.
  std::sort(scn.events.begin(), scn.events.end(),
            [](const sfr::PowerEvent& a, const sfr::PowerEvent& b) { return a.time_s < b.time_s; });
  scn.system.validate();
  if (scn.f_s_hz <= 0.0 || scn.f_s_hz > scn.system.f_nominal_hz)
    fail(name, 1, "[system] f_s_hz missing or above nominal frequency");
  return scn;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  auto slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  if (base.size() > 4 && base.ends_with(".scn")) base = base.substr(0, base.size() - 4);
  return parse_scenario(ss.str(), base);
}

Scenario build_ieee24() {
  Scenario scn;
  scn.name = "ieee24";
  // Calibrated equivalent constants on the 100 MVA study base; the
  // bucketed post-trip generator fleet they were fitted from is kept in
  // scripts/calibrate_ieee24.py.
  scn.system.h = 269.60156965447976;
  scn.system.r = 0.0013388342630414989;
  scn.system.d = 2.5;
  scn.system.km = 0.95;
  scn.system.fh = 0.3;
  scn.system.tr = 8.0;
  scn.system.s_base_mva = 100.0;
  scn.system.f_nominal_hz = 50.0;
  scn.system.p_load_total_mw = 2850.0;
  scn.f_s_hz = 49.5;
  scn.events = {{0.0, 5.0}};  // 500 MW UHVDC infeed loss
  scn.check_noise = {NoiseModel::Uniform, 0.01};
  scn.estimation_noise = {NoiseModel::Gaussian, 0.01};
  scn.param_noise_frac = 0.05;
  scn.trials = 10000;
  scn.seed = 1;
  scn.duration_s = 30.0;
  return scn;
}

}  // namespace gridsense::harness
