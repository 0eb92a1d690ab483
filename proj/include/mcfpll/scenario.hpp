#pragma once

// Declarative scenario description, its JSON form and validation.
//
// A scenario document may carry an "include" key (a path relative to the
// including file, or "preset:<name>", or a list of those). Included documents
// are merged first, the including document is applied on top as a JSON merge
// patch. Interferometer-indexed sections (detectors, shifters, controllers)
// are objects keyed by "pair_a", "pair_b", "overall"; a "default" entry is
// applied to all three before the specific ones.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcfpll/controller.hpp"
#include "mcfpll/core.hpp"
#include "mcfpll/noise.hpp"
#include "mcfpll/optics.hpp"

namespace mcfpll {

using Json = nlohmann::json;

enum class Action { lock, scan };

struct ScheduleEntry {
  double time = 0.0;
  Interferometer target = Interferometer::pair_a;
  Action action = Action::lock;
  std::optional<double> lock_phase;  // defaults to the controller's lock_phase
};

/// Instantaneous phase step on one core (0-based), for disturbance tests.
struct PhaseEvent {
  double time = 0.0;
  int core = 0;
  double phase_step = 0.0;
};

inline SegmentNoiseMap default_noise() {
  SegmentNoiseMap n;
  n.pigtail = {0.0025, 0.05, 20.0, {}};
  n.strand = {2.5e-5, 0.005, 60.0, {}};
  n.combiner = {0.25, 0.1, 10.0, {}};
  return n;
}

struct ScenarioConfig {
  int strand_count = 4;
  double duration = 600.0;       // s
  double control_rate = 1000.0;  // Hz
  double analysis_rate = 6.0;    // Hz
  std::uint64_t seed = 1;
  SegmentNoiseMap noise = default_noise();
  std::array<DetectorModel, 3> detectors{};
  std::array<PhaseShifterSpec, 3> shifters{};
  std::array<ControllerConfig, 3> controllers{};
  std::vector<ScheduleEntry> schedule;
  std::vector<PhaseEvent> events;
  VisibilityTargets visibility_targets;
  std::optional<std::array<double, 4>> amplitudes;  // overrides visibility_targets
  std::array<double, 4> initial_phases{kPi / 2.0, 0.0, kPi / 2.0, 0.0};  // pairs start in quadrature
  std::array<double, 2> combiner_phases{0.0, 1.1};
  std::array<double, 2> psd_band{0.1, 2.5};  // Hz, band for band-averaged PSD
  std::vector<std::string> outputs{"detectors", "phases", "telemetry", "psd", "summary"};

  NetworkTopology topology() const { return NetworkTopology{strand_count, {0, 1}, {2, 3}, true}; }

  std::array<double, 4> core_amplitudes() const {
    return amplitudes ? *amplitudes : amplitudes_for_visibility(visibility_targets);
  }

  bool wants(const std::string& kind) const {
    return std::find(outputs.begin(), outputs.end(), kind) != outputs.end();
  }
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : Error(ErrorKind::validation, join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& i : v) s += (s.empty() ? "" : "; ") + i;
    return s;
  }
  std::vector<std::string> issues_;
};

inline const std::vector<std::string>& output_kinds() {
  static const std::vector<std::string> k{"detectors", "phases", "telemetry", "psd", "summary"};
  return k;
}

inline std::optional<Interferometer> interferometer_from(const std::string& s) {
  for (Interferometer i : kInterferometers)
    if (s == to_string(i)) return i;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Validation

inline std::vector<std::string> validate(const ScenarioConfig& c) {
  std::vector<std::string> out;
  auto bad = [&](const std::string& p, const std::string& m) { out.push_back(p + ": " + m); };

  if (c.strand_count < 1 || c.strand_count > 4) bad("strand_count", "must be in [1, 4]");
  if (!(c.duration > 0.0)) bad("duration", "must be > 0");
  if (!(c.control_rate > 0.0)) bad("control_rate", "must be > 0");
  if (!(c.analysis_rate > 0.0)) bad("analysis_rate", "must be > 0");
  if (!(c.analysis_rate <= c.control_rate)) bad("analysis_rate", "must be <= control_rate");

  const std::pair<const char*, const NoiseSpec*> specs[] = {
      {"pigtail", &c.noise.pigtail}, {"strand", &c.noise.strand}, {"combiner", &c.noise.combiner}};
  for (auto [name, spec] : specs)
    if (!spec->valid())
      bad(std::string("noise.") + name,
          "needs wiener_diffusion >= 0, ou_sigma >= 0, ou_tau > 0, tone amplitudes >= 0");

  for (Interferometer i : kInterferometers) {
    const auto idx = static_cast<std::size_t>(i);
    const std::string name = to_string(i);
    if (!c.detectors[idx].valid())
      bad("detectors." + name, "needs responsivity > 0, noise_sigma >= 0, lpf_cutoff > 0");
    if (!c.shifters[idx].valid())
      bad("shifters." + name, "gain * (v_max - v_min) must exceed 2pi");
    for (auto& issue : validate(c.controllers[idx], "controllers." + name, &c.shifters[idx]))
      out.push_back(issue);
  }

  auto amps = c.core_amplitudes();
  if (c.amplitudes) {
    for (std::size_t k = 0; k < 4; ++k)
      if (!(amps[k] >= 0.0 && std::isfinite(amps[k])))
        bad("amplitudes[" + std::to_string(k) + "]", "must be finite and >= 0");
  } else {
    const auto& v = c.visibility_targets;
    for (auto [name, val] : {std::pair{"pair_a", v.pair_a}, {"pair_b", v.pair_b}, {"overall", v.overall}})
      if (!(val > 0.0 && val <= 1.0)) bad(std::string("visibility_targets.") + name, "must be in (0, 1]");
  }
  for (std::size_t k = 0; k < 4; ++k)
    if (!std::isfinite(c.initial_phases[k])) bad("initial_phases[" + std::to_string(k) + "]", "must be finite");
  if (!(c.psd_band[0] >= 0.0 && c.psd_band[0] < c.psd_band[1])) bad("psd_band", "needs 0 <= lo < hi");

  // Schedule: the overall loop may only be commanded after both pairs were told to lock.
  std::array<std::optional<double>, 2> pair_lock;
  for (std::size_t k = 0; k < c.schedule.size(); ++k) {
    const auto& e = c.schedule[k];
    const std::string p = "schedule[" + std::to_string(k) + "]";
    if (!(e.time >= 0.0 && e.time <= c.duration)) bad(p + ".time", "must be within [0, duration]");
    if (e.lock_phase && !(*e.lock_phase >= 0.0 && *e.lock_phase < kTwoPi))
      bad(p + ".lock_phase", "must be in [0, 2pi)");
    if (e.action == Action::lock && e.target != Interferometer::overall) {
      auto& slot = pair_lock[static_cast<std::size_t>(e.target)];
      if (!slot || e.time < *slot) slot = e.time;
    }
  }
  for (std::size_t k = 0; k < c.schedule.size(); ++k) {
    const auto& e = c.schedule[k];
    if (e.target != Interferometer::overall) continue;
    for (std::size_t pair = 0; pair < 2; ++pair)
      if (!pair_lock[pair] || !(*pair_lock[pair] < e.time))
        bad("schedule[" + std::to_string(k) + "]",
            std::string("overall interferometer commanded before ") +
                to_string(static_cast<Interferometer>(pair)) + " is locked");
  }
  for (std::size_t k = 0; k < c.events.size(); ++k) {
    const auto& e = c.events[k];
    const std::string p = "events[" + std::to_string(k) + "]";
    if (e.core < 0 || e.core > 3) bad(p + ".core", "must be in [1, 4]");
    if (!std::isfinite(e.phase_step)) bad(p + ".phase_step", "must be finite");
    if (!(e.time >= 0.0 && e.time <= c.duration)) bad(p + ".time", "must be within [0, duration]");
  }
  for (std::size_t k = 0; k < c.outputs.size(); ++k)
    if (std::find(output_kinds().begin(), output_kinds().end(), c.outputs[k]) == output_kinds().end())
      bad("outputs[" + std::to_string(k) + "]", "unknown artifact kind '" + c.outputs[k] + "'");
  return out;
}

inline void validate_or_throw(const ScenarioConfig& c) {
  auto issues = validate(c);
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

// ---------------------------------------------------------------------------
// JSON -> config

namespace detail {

/// Reads fields out of a JSON object, collecting type errors and unknown keys.
class Reader {
 public:
  Reader(const Json& j, std::string path, std::vector<std::string>& issues)
      : j_(j), path_(std::move(path)), issues_(issues) {
    if (!j_.is_object()) issue(path_, "expected an object");
  }
  ~Reader() = default;

  template <typename T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_.is_object() || !j_.contains(key)) return;
    const Json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw std::runtime_error("expected a number");
        out = v.get<double>();
      } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_integer()) throw std::runtime_error("expected an integer");
        out = v.get<T>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::runtime_error("expected a boolean");
        out = v.get<bool>();
      } else {
        out = v.get<T>();
      }
    } catch (const std::exception& e) {
      issue(sub(key), e.what());
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.push_back(key);
    if (!j_.is_object() || !j_.contains(key) || j_.at(key).is_null()) return;
    T tmp{};
    seen_.pop_back();
    get(key, tmp);
    out = tmp;
  }

  const Json* child(const char* key) {
    seen_.push_back(key);
    if (!j_.is_object() || !j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  void finish() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        issue(sub(it.key()), "unknown field");
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void issue(const std::string& p, const std::string& m) { issues_.push_back(p + ": " + m); }

 private:
  const Json& j_;
  std::string path_;
  std::vector<std::string>& issues_;
  std::vector<std::string> seen_;
};

inline void read(const Json& j, const std::string& path, NoiseSpec& s, std::vector<std::string>& issues) {
  Reader r(j, path, issues);
  r.get("wiener_diffusion", s.wiener_diffusion);
  r.get("ou_sigma", s.ou_sigma);
  r.get("ou_tau", s.ou_tau);
  if (const Json* tones = r.child("tones")) {
    s.tones.clear();
    if (!tones->is_array()) {
      issues.push_back(path + ".tones: expected an array");
    } else {
      for (std::size_t k = 0; k < tones->size(); ++k) {
        Tone t;
        Reader tr((*tones)[k], path + ".tones[" + std::to_string(k) + "]", issues);
        tr.get("frequency", t.frequency);
        tr.get("amplitude", t.amplitude);
        tr.finish();
        s.tones.push_back(t);
      }
    }
  }
  r.finish();
}

inline void read(const Json& j, const std::string& path, DetectorModel& d, std::vector<std::string>& issues) {
  Reader r(j, path, issues);
  r.get("responsivity", d.responsivity);
  r.get("noise_sigma", d.noise_sigma);
  r.get("lpf_cutoff", d.lpf_cutoff);
  r.finish();
}

inline void read(const Json& j, const std::string& path, PhaseShifterSpec& s, std::vector<std::string>& issues) {
  Reader r(j, path, issues);
  r.get("gain", s.gain);
  r.get("v_min", s.v_min);
  r.get("v_max", s.v_max);
  r.finish();
}

inline void read(const Json& j, const std::string& path, ControllerConfig& c, std::vector<std::string>& issues) {
  Reader r(j, path, issues);
  r.get("lock_phase", c.lock_phase);
  r.get_optional("th_a", c.th_a);
  r.get_optional("th_b", c.th_b);
  r.get("th_a_fraction", c.th_a_fraction);
  r.get("th_b_fraction", c.th_b_fraction);
  r.get("kp", c.kp);
  r.get("ki", c.ki);
  r.get("kd", c.kd);
  r.get("ramp_min_volts", c.ramp_min_volts);
  r.get("ramp_span_volts", c.ramp_span_volts);
  r.get("ramp_rate", c.ramp_rate);
  r.get("adc_bits", c.adc_bits);
  r.get("dac_bits", c.dac_bits);
  r.get("adc_full_scale", c.adc_full_scale);
  r.get("dac_full_scale", c.dac_full_scale);
  r.get("min_contrast", c.min_contrast);
  r.get("saturation_warn_ticks", c.saturation_warn_ticks);
  r.finish();
}

template <typename T>
void read_per_interferometer(const Json* j, const std::string& path, std::array<T, 3>& out,
                             std::vector<std::string>& issues) {
  if (!j) return;
  if (!j->is_object()) {
    issues.push_back(path + ": expected an object keyed by interferometer");
    return;
  }
  if (j->contains("default"))
    for (auto& item : out) read(j->at("default"), path + ".default", item, issues);
  for (auto it = j->begin(); it != j->end(); ++it) {
    if (it.key() == "default") continue;
    auto which = interferometer_from(it.key());
    if (!which) {
      issues.push_back(path + "." + it.key() + ": unknown interferometer");
      continue;
    }
    read(it.value(), path + "." + it.key(), out[static_cast<std::size_t>(*which)], issues);
  }
}

template <std::size_t N>
void read_array(Reader& r, const char* key, std::array<double, N>& out, std::vector<std::string>& issues) {
  const Json* j = r.child(key);
  if (!j) return;
  if (!j->is_array() || j->size() != N) {
    issues.push_back(r.sub(key) + ": expected an array of " + std::to_string(N) + " numbers");
    return;
  }
  for (std::size_t k = 0; k < N; ++k) {
    if (!(*j)[k].is_number()) {
      issues.push_back(r.sub(key) + "[" + std::to_string(k) + "]: expected a number");
      continue;
    }
    out[k] = (*j)[k].get<double>();
  }
}

}  // namespace detail

/// Builds a config from an include-resolved document; throws ValidationError
/// listing every structural and semantic problem.
inline ScenarioConfig config_from_json(const Json& j) {
  std::vector<std::string> issues;
  ScenarioConfig c;
  {
    detail::Reader r(j, "", issues);
    r.get("strand_count", c.strand_count);
    r.get("duration", c.duration);
    r.get("control_rate", c.control_rate);
    r.get("analysis_rate", c.analysis_rate);
    r.get("seed", c.seed);
    if (const Json* n = r.child("noise")) {
      detail::Reader nr(*n, "noise", issues);
      if (const Json* p = nr.child("pigtail")) detail::read(*p, "noise.pigtail", c.noise.pigtail, issues);
      if (const Json* p = nr.child("strand")) detail::read(*p, "noise.strand", c.noise.strand, issues);
      if (const Json* p = nr.child("combiner")) detail::read(*p, "noise.combiner", c.noise.combiner, issues);
      nr.finish();
    }
    detail::read_per_interferometer(r.child("detectors"), "detectors", c.detectors, issues);
    detail::read_per_interferometer(r.child("shifters"), "shifters", c.shifters, issues);
    detail::read_per_interferometer(r.child("controllers"), "controllers", c.controllers, issues);

    if (const Json* s = r.child("schedule")) {
      if (!s->is_array()) issues.push_back("schedule: expected an array");
      else
        for (std::size_t k = 0; k < s->size(); ++k) {
          const std::string p = "schedule[" + std::to_string(k) + "]";
          detail::Reader er((*s)[k], p, issues);
          ScheduleEntry e;
          std::string target = "pair_a", action = "lock";
          er.get("time", e.time);
          er.get("target", target);
          er.get("action", action);
          er.get_optional("lock_phase", e.lock_phase);
          er.finish();
          if (auto t = interferometer_from(target)) e.target = *t;
          else issues.push_back(p + ".target: unknown interferometer '" + target + "'");
          if (action == "lock") e.action = Action::lock;
          else if (action == "scan") e.action = Action::scan;
          else issues.push_back(p + ".action: expected 'lock' or 'scan'");
          c.schedule.push_back(e);
        }
    }
    if (const Json* ev = r.child("events")) {
      if (!ev->is_array()) issues.push_back("events: expected an array");
      else
        for (std::size_t k = 0; k < ev->size(); ++k) {
          detail::Reader er((*ev)[k], "events[" + std::to_string(k) + "]", issues);
          PhaseEvent e;
          int core = 1;
          er.get("time", e.time);
          er.get("core", core);
          er.get("phase_step", e.phase_step);
          er.finish();
          e.core = core - 1;
          c.events.push_back(e);
        }
    }
    if (const Json* v = r.child("visibility_targets")) {
      detail::Reader vr(*v, "visibility_targets", issues);
      vr.get("pair_a", c.visibility_targets.pair_a);
      vr.get("pair_b", c.visibility_targets.pair_b);
      vr.get("overall", c.visibility_targets.overall);
      vr.finish();
    }
    if (const Json* a = r.child("amplitudes"); a && !a->is_null()) {
      std::array<double, 4> amps{};
      if (!a->is_array() || a->size() != 4) issues.push_back("amplitudes: expected an array of 4 numbers");
      else {
        for (std::size_t k = 0; k < 4; ++k) amps[k] = (*a)[k].is_number() ? (*a)[k].get<double>() : -1.0;
        c.amplitudes = amps;
      }
    }
    detail::read_array(r, "initial_phases", c.initial_phases, issues);
    detail::read_array(r, "combiner_phases", c.combiner_phases, issues);
    detail::read_array(r, "psd_band", c.psd_band, issues);
    r.get("outputs", c.outputs);
    r.child("include");  // resolved before parsing; tolerated if still present
    r.finish();
  }
  for (auto& ctl : c.controllers) ctl.loop_rate = c.control_rate;
  if (issues.empty()) issues = validate(c);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return c;
}

// ---------------------------------------------------------------------------
// config -> JSON (complete echo, stable key order)

inline Json to_json(const NoiseSpec& s) {
  Json tones = Json::array();
  for (const Tone& t : s.tones) tones.push_back({{"frequency", t.frequency}, {"amplitude", t.amplitude}});
  return {{"wiener_diffusion", s.wiener_diffusion}, {"ou_sigma", s.ou_sigma}, {"ou_tau", s.ou_tau},
          {"tones", tones}};
}

inline Json to_json(const ControllerConfig& c) {
  Json j{{"lock_phase", c.lock_phase},
         {"th_a_fraction", c.th_a_fraction},
         {"th_b_fraction", c.th_b_fraction},
         {"kp", c.kp},
         {"ki", c.ki},
         {"kd", c.kd},
         {"ramp_min_volts", c.ramp_min_volts},
         {"ramp_span_volts", c.ramp_span_volts},
         {"ramp_rate", c.ramp_rate},
         {"adc_bits", c.adc_bits},
         {"dac_bits", c.dac_bits},
         {"adc_full_scale", c.adc_full_scale},
         {"dac_full_scale", c.dac_full_scale},
         {"min_contrast", c.min_contrast},
         {"saturation_warn_ticks", c.saturation_warn_ticks}};
  j["th_a"] = c.th_a ? Json(*c.th_a) : Json(nullptr);
  j["th_b"] = c.th_b ? Json(*c.th_b) : Json(nullptr);
  return j;
}

inline Json to_json(const ScenarioConfig& c) {
  Json j;
  j["strand_count"] = c.strand_count;
  j["duration"] = c.duration;
  j["control_rate"] = c.control_rate;
  j["analysis_rate"] = c.analysis_rate;
  j["seed"] = c.seed;
  j["noise"] = {{"pigtail", to_json(c.noise.pigtail)},
                {"strand", to_json(c.noise.strand)},
                {"combiner", to_json(c.noise.combiner)}};
  for (Interferometer i : kInterferometers) {
    const auto k = static_cast<std::size_t>(i);
    const auto& d = c.detectors[k];
    const auto& s = c.shifters[k];
    j["detectors"][to_string(i)] = {
        {"responsivity", d.responsivity}, {"noise_sigma", d.noise_sigma}, {"lpf_cutoff", d.lpf_cutoff}};
    j["shifters"][to_string(i)] = {{"gain", s.gain}, {"v_min", s.v_min}, {"v_max", s.v_max}};
    j["controllers"][to_string(i)] = to_json(c.controllers[k]);
  }
  j["schedule"] = Json::array();
  for (const auto& e : c.schedule) {
    Json ej{{"time", e.time},
            {"target", to_string(e.target)},
            {"action", e.action == Action::lock ? "lock" : "scan"}};
    if (e.lock_phase) ej["lock_phase"] = *e.lock_phase;
    j["schedule"].push_back(ej);
  }
  j["events"] = Json::array();
  for (const auto& e : c.events)
    j["events"].push_back({{"time", e.time}, {"core", e.core + 1}, {"phase_step", e.phase_step}});
  j["visibility_targets"] = {{"pair_a", c.visibility_targets.pair_a},
                             {"pair_b", c.visibility_targets.pair_b},
                             {"overall", c.visibility_targets.overall}};
  j["amplitudes"] = c.amplitudes ? Json(*c.amplitudes) : Json(nullptr);
  j["initial_phases"] = c.initial_phases;
  j["combiner_phases"] = c.combiner_phases;
  j["psd_band"] = c.psd_band;
  j["outputs"] = c.outputs;
  return j;
}

/// FNV-1a over the canonical JSON echo.
inline std::uint64_t config_hash(const ScenarioConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Presets

/// The four shipped experiments, as partial documents over the defaults.
inline const std::map<std::string, std::string>& preset_sources() {
  static const std::map<std::string, std::string> presets{
      {"fringe-scan", R"({
  "description": "Visibility: ramp both pairs, lock them at half fringe, then ramp the overall interferometer",
  "duration": 6.5,
  "analysis_rate": 1000,
  "schedule": [
    {"time": 0.0, "target": "pair_a", "action": "scan"},
    {"time": 0.0, "target": "pair_b", "action": "scan"},
    {"time": 2.0, "target": "pair_a", "action": "lock", "lock_phase": 1.5707963267948966},
    {"time": 2.0, "target": "pair_b", "action": "lock", "lock_phase": 1.5707963267948966},
    {"time": 3.5, "target": "overall", "action": "scan"}
  ]
})"},
      {"drift-unlocked", R"({
  "description": "Ten minutes of free-running drift on all three interferometers",
  "duration": 600,
  "analysis_rate": 50
})"},
      {"drift-locked", R"({
  "description": "Ten minutes with all three loops locked: pairs first, overall after",
  "duration": 600,
  "analysis_rate": 50,
  "schedule": [
    {"time": 0.0, "target": "pair_a", "action": "lock"},
    {"time": 0.0, "target": "pair_b", "action": "lock"},
    {"time": 5.0, "target": "overall", "action": "lock"}
  ]
})"},
      {"strand-sweep", R"({
  "description": "Thirty-minute free-running acquisitions at 6 Hz for spectral analysis",
  "duration": 1800,
  "control_rate": 120,
  "analysis_rate": 6,
  "outputs": ["psd", "summary"]
})"},
  };
  return presets;
}

/// Presets carry a free-text "description" that is not part of the config.
inline Json strip_description(Json j) {
  if (j.is_object()) j.erase("description");
  return j;
}

inline Json load_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorKind::io, "cannot open " + p.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError({p.string() + ": " + e.what()});
  }
}

/// Expands "include" references recursively and merges them.
inline Json resolve_includes(Json doc, const std::filesystem::path& base_dir, int depth = 0) {
  if (depth > 16) throw ValidationError({"include: nesting deeper than 16 (cycle?)"});
  if (!doc.is_object()) throw ValidationError({"<root>: expected an object"});
  doc = strip_description(std::move(doc));
  if (!doc.contains("include")) return doc;

  Json includes = doc["include"];
  doc.erase("include");
  if (includes.is_string()) includes = Json::array({includes});
  if (!includes.is_array()) throw ValidationError({"include: expected a string or array of strings"});

  Json merged = Json::object();
  for (const Json& inc : includes) {
    if (!inc.is_string()) throw ValidationError({"include: entries must be strings"});
    const std::string ref = inc.get<std::string>();
    Json base;
    std::filesystem::path next_dir = base_dir;
    if (ref.rfind("preset:", 0) == 0) {
      const std::string name = ref.substr(7);
      auto it = preset_sources().find(name);
      if (it == preset_sources().end()) throw ValidationError({"include: unknown preset '" + name + "'"});
      base = Json::parse(it->second);
    } else {
      const std::filesystem::path p = base_dir / ref;
      base = load_json_file(p);
      next_dir = p.parent_path();
    }
    merged.merge_patch(resolve_includes(std::move(base), next_dir, depth + 1));
  }
  merged.merge_patch(doc);
  return merged;
}

inline ScenarioConfig preset(const std::string& name) {
  auto it = preset_sources().find(name);
  if (it == preset_sources().end()) throw ValidationError({"unknown preset '" + name + "'"});
  return config_from_json(resolve_includes(Json::parse(it->second), "."));
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  return config_from_json(resolve_includes(load_json_file(path), path.parent_path()));
}

inline ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError({std::string("<document>: ") + e.what()});
  }
  return config_from_json(resolve_includes(std::move(j), base_dir));
}

}  // namespace mcfpll
