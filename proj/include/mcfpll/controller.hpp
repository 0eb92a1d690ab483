#pragma once

// Per-interferometer phase lock loop: a stage machine
//
//   Idle --lock--> Calibrate --> Approach --> Hold
//                     ^  |          |          |
//                     |  +<-exhausted          |
//                     +-------- |FS-LP| >= Th_B
//
// driven once per loop tick by a 12-bit ADC reading, emitting a 12-bit DAC
// code for the phase-shifter driver. All step functions are pure: state in,
// state out.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mcfpll/core.hpp"
#include "mcfpll/optics.hpp"

namespace mcfpll {

// ---------------------------------------------------------------------------
// Converters

inline double quantizer_lsb(int bits, double full_scale) {
  return full_scale / static_cast<double>(std::uint64_t{1} << bits);
}

/// Saturating quantizer: levels at k * full_scale / 2^bits, round half up.
inline std::uint32_t quantize(double value, int bits, double full_scale) {
  const auto top = static_cast<double>((std::uint64_t{1} << bits) - 1);
  const double v = std::clamp(value, 0.0, full_scale);
  const double code = std::floor(v / quantizer_lsb(bits, full_scale) + 0.5);
  return static_cast<std::uint32_t>(std::min(code, top));
}

inline double dequantize(std::uint32_t code, int bits, double full_scale) {
  return static_cast<double>(code) * quantizer_lsb(bits, full_scale);
}

// ---------------------------------------------------------------------------
// Configuration and state

struct ControllerConfig {
  double lock_phase = kPi / 2.0;  // rad, [0, 2pi)
  // Absolute thresholds in detector volts; when unset the fractions of the
  // calibrated contrast (M - m) are used.
  std::optional<double> th_a;
  std::optional<double> th_b;
  double th_a_fraction = 0.02;
  double th_b_fraction = 0.10;
  double kp = 0.15;
  double ki = 100.0;
  double kd = 0.0;
  double loop_rate = 1000.0;       // Hz
  double ramp_min_volts = 8.9;
  double ramp_span_volts = 2.2;    // 2.2 pi of phase at pi rad/V
  double ramp_rate = 11.0;         // V/s
  int adc_bits = 12;
  int dac_bits = 12;
  double adc_full_scale = 2.5;     // V
  double dac_full_scale = 20.0;    // V
  double min_contrast = 0.05;      // V; smaller fringes are degenerate
  int saturation_warn_ticks = 100;

  double dt() const { return 1.0 / loop_rate; }
  double dac_max_volts() const {
    return dequantize((1u << dac_bits) - 1u, dac_bits, dac_full_scale);
  }
};

/// Problems with a controller configuration, each prefixed by `path`.
inline std::vector<std::string> validate(const ControllerConfig& c, const std::string& path,
                                         const PhaseShifterSpec* shifter = nullptr) {
  std::vector<std::string> out;
  auto bad = [&](const std::string& field, const std::string& msg) {
    out.push_back(path + "." + field + ": " + msg);
  };
  if (!(c.lock_phase >= 0.0 && c.lock_phase < kTwoPi)) bad("lock_phase", "must be in [0, 2pi)");
  if (c.th_a.has_value() != c.th_b.has_value())
    bad("th_a", "absolute th_a and th_b must be given together");
  if (c.th_a && c.th_b) {
    if (!(*c.th_a > 0.0)) bad("th_a", "must be > 0");
    if (!(*c.th_a <= *c.th_b)) bad("th_b", "must be >= th_a");
  } else {
    if (!(c.th_a_fraction > 0.0)) bad("th_a_fraction", "must be > 0");
    if (!(c.th_a_fraction <= c.th_b_fraction)) bad("th_b_fraction", "must be >= th_a_fraction");
    if (!(c.th_b_fraction < 0.5)) bad("th_b_fraction", "must be < 0.5 (half the fringe contrast)");
  }
  for (auto [name, g] : {std::pair{"kp", c.kp}, {"ki", c.ki}, {"kd", c.kd}})
    if (!std::isfinite(g)) bad(name, "must be finite");
  if (!(c.loop_rate > 0.0)) bad("loop_rate", "must be > 0");
  if (!(c.ramp_span_volts >= 0.0)) bad("ramp_span_volts", "must be >= 0");
  if (!(c.ramp_rate > 0.0)) bad("ramp_rate", "must be > 0");
  if (c.adc_bits < 1 || c.adc_bits > 24) bad("adc_bits", "must be in [1, 24]");
  if (c.dac_bits < 1 || c.dac_bits > 24) bad("dac_bits", "must be in [1, 24]");
  if (!(c.adc_full_scale > 0.0)) bad("adc_full_scale", "must be > 0");
  if (!(c.dac_full_scale > 0.0)) bad("dac_full_scale", "must be > 0");
  if (!(c.ramp_min_volts >= 0.0 && c.ramp_min_volts + c.ramp_span_volts <= c.dac_full_scale))
    bad("ramp_min_volts", "ramp must lie inside the DAC range");
  if (!(c.min_contrast >= 0.0)) bad("min_contrast", "must be >= 0");
  if (c.saturation_warn_ticks < 1) bad("saturation_warn_ticks", "must be >= 1");
  if (shifter) {
    if (!(c.ramp_span_volts * shifter->gain > kTwoPi))
      bad("ramp_span_volts", "ramp must scan more than 2pi of phase");
    if (!(shifter->v_min <= 0.0 && shifter->v_max >= c.dac_full_scale))
      bad("dac_full_scale", "DAC range exceeds the phase-shifter range");
  }
  return out;
}

enum class Stage { idle, calibrate, approach, hold };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::idle: return "idle";
    case Stage::calibrate: return "calibrate";
    case Stage::approach: return "approach";
    case Stage::hold: return "hold";
  }
  return "?";
}

/// Edges of the lock flowchart (plus self-loops and the degenerate-fringe abort).
inline bool is_legal_transition(Stage from, Stage to) {
  if (from == to) return true;
  switch (from) {
    case Stage::idle: return to == Stage::calibrate;
    case Stage::calibrate: return to == Stage::approach || to == Stage::idle;
    case Stage::approach: return to == Stage::hold || to == Stage::calibrate;
    case Stage::hold: return to == Stage::calibrate;
  }
  return false;
}

struct ControllerState {
  Stage stage = Stage::idle;
  std::optional<FringeCalibration> fringe;
  double lock_phase = kPi / 2.0;
  double locking_point = 0.0;
  int slope_sign = 1;
  double th_a = 0.0;  // resolved at calibration
  double th_b = 0.0;
  double integrator = 0.0;
  double prev_error = 0.0;
  bool has_prev_error = false;
  std::uint32_t dac_code = 0;
  std::uint64_t relock_count = 0;

  // scan bookkeeping (Calibrate / Approach)
  std::int64_t scan_index = 0;
  double scan_max = 0.0;
  double scan_min = 0.0;
  double prev_fs = 0.0;
  bool has_prev_fs = false;
  double frozen_volts = 0.0;

  // free-running triangular ramp (Idle scan mode)
  bool free_ramp = false;
  double ramp_position = 0.0;
  int ramp_direction = 1;

  int saturated_ticks = 0;
};

inline ControllerState initial_state(const ControllerConfig& cfg) {
  ControllerState s;
  s.lock_phase = cfg.lock_phase;
  s.dac_code = quantize(cfg.ramp_min_volts, cfg.dac_bits, cfg.dac_full_scale);
  return s;
}

struct Command {
  enum class Kind { none, lock, scan } kind = Kind::none;
  double lock_phase = 0.0;

  static Command none() { return {}; }
  static Command lock(double phase) { return {Kind::lock, phase}; }
  static Command scan() { return {Kind::scan, 0.0}; }
};

enum class Fault { none, degenerate_fringe, threshold_invalid };

inline const char* to_string(Fault f) {
  switch (f) {
    case Fault::none: return "none";
    case Fault::degenerate_fringe: return "degenerate-fringe";
    case Fault::threshold_invalid: return "threshold-invalid";
  }
  return "?";
}

struct StepResult {
  ControllerState state;
  std::uint32_t dac_code = 0;
  double effort = 0.0;  // PID output u (Hold only)
  Fault fault = Fault::none;
  bool saturation_warning = false;
};

// ---------------------------------------------------------------------------
// Locking point

/// Sign of dFS/dphi at the lock phase; +1 at the fringe extrema by convention.
inline int slope_sign_for_phase(double lock_phase) {
  return std::sin(lock_phase) > 0.0 ? -1 : 1;
}

inline double locking_point_from_phase(double lock_phase,
                                       const std::optional<FringeCalibration>& cal) {
  if (!cal) throw Error(ErrorKind::not_calibrated, "locking point requested before calibration");
  return fringe_signal(lock_phase, *cal);
}

// ---------------------------------------------------------------------------
// Ramp

/// Number of ramp increments covering the span (0 for a zero-span ramp).
inline std::int64_t scan_ticks(const ControllerConfig& cfg, double dt) {
  if (cfg.ramp_span_volts <= 0.0) return 0;
  return static_cast<std::int64_t>(std::ceil(cfg.ramp_span_volts / (cfg.ramp_rate * dt) - 1e-9));
}

inline double ramp_volts(const ControllerConfig& cfg, std::int64_t index, double dt) {
  return cfg.ramp_min_volts +
         std::min(static_cast<double>(index) * cfg.ramp_rate * dt, cfg.ramp_span_volts);
}

inline std::uint32_t dac_for(const ControllerConfig& cfg, double volts) {
  return quantize(volts, cfg.dac_bits, cfg.dac_full_scale);
}

/// Advances the free triangular ramp by one tick; returns the new voltage.
inline double advance_triangle(const ControllerConfig& cfg, ControllerState& s, double dt) {
  const double span = cfg.ramp_span_volts;
  if (span <= 0.0) return cfg.ramp_min_volts;
  double p = s.ramp_position + s.ramp_direction * cfg.ramp_rate * dt;
  while (p > span || p < 0.0) {
    if (p > span) {
      p = 2.0 * span - p;
      s.ramp_direction = -1;
    } else {
      p = -p;
      s.ramp_direction = 1;
    }
  }
  s.ramp_position = p;
  return cfg.ramp_min_volts + p;
}

// ---------------------------------------------------------------------------
// Stages

namespace detail {

inline void clear_pid(ControllerState& s) {
  s.integrator = 0.0;
  s.prev_error = 0.0;
  s.has_prev_error = false;
  s.saturated_ticks = 0;
}

inline StepResult enter_calibrate(const ControllerConfig& cfg, ControllerState s, double dt) {
  s.stage = Stage::calibrate;
  s.scan_index = 0;
  s.scan_max = -std::numeric_limits<double>::infinity();
  s.scan_min = std::numeric_limits<double>::infinity();
  s.has_prev_fs = false;
  s.free_ramp = false;
  clear_pid(s);
  s.dac_code = dac_for(cfg, ramp_volts(cfg, 0, dt));
  return {s, s.dac_code};
}

inline StepResult enter_approach(const ControllerConfig& cfg, ControllerState s, double dt) {
  s.stage = Stage::approach;
  s.scan_index = 0;
  s.has_prev_fs = false;
  s.dac_code = dac_for(cfg, ramp_volts(cfg, 0, dt));
  return {s, s.dac_code};
}

inline double reading_volts(const ControllerConfig& cfg, std::uint32_t adc_code) {
  return dequantize(adc_code, cfg.adc_bits, cfg.adc_full_scale);
}

}  // namespace detail

/// Stage 1: scan the ramp once, tracking the fringe extrema.
/// The reading at each tick reflects the DAC output of the previous tick.
inline StepResult calibrate_step(const ControllerConfig& cfg, ControllerState s,
                                 std::uint32_t adc_code, double dt) {
  const double fs = detail::reading_volts(cfg, adc_code);
  s.scan_max = std::max(s.scan_max, fs);
  s.scan_min = std::min(s.scan_min, fs);
  if (s.scan_index < scan_ticks(cfg, dt)) {
    ++s.scan_index;
    s.dac_code = dac_for(cfg, ramp_volts(cfg, s.scan_index, dt));
    return {s, s.dac_code};
  }

  const FringeCalibration cal{s.scan_max, s.scan_min};
  if (!(cal.contrast() >= cfg.min_contrast) || !cal.valid()) {
    s.stage = Stage::idle;
    s.fringe.reset();
    StepResult r{s, s.dac_code};
    r.fault = Fault::degenerate_fringe;
    return r;
  }
  const double th_a = cfg.th_a ? *cfg.th_a : cfg.th_a_fraction * cal.contrast();
  const double th_b = cfg.th_b ? *cfg.th_b : cfg.th_b_fraction * cal.contrast();
  if (!(th_a >= 0.0 && th_a <= th_b && th_b < cal.half_amplitude())) {
    s.stage = Stage::idle;
    StepResult r{s, s.dac_code};
    r.fault = Fault::threshold_invalid;
    return r;
  }
  s.fringe = cal;
  s.th_a = th_a;
  s.th_b = th_b;
  s.locking_point = locking_point_from_phase(s.lock_phase, s.fringe);
  s.slope_sign = slope_sign_for_phase(s.lock_phase);
  return detail::enter_approach(cfg, s, dt);
}

/// Stage 2: rescan from the ramp minimum until |FS-LP| < Th_A on the selected slope.
inline StepResult approach_step(const ControllerConfig& cfg, ControllerState s,
                                std::uint32_t adc_code, double dt) {
  const double fs = detail::reading_volts(cfg, adc_code);
  const bool close = std::abs(fs - s.locking_point) < s.th_a;
  const bool slope_ok = s.has_prev_fs && (fs - s.prev_fs) * s.slope_sign > 0.0;
  if (close && slope_ok) {
    s.stage = Stage::hold;
    s.frozen_volts = dequantize(s.dac_code, cfg.dac_bits, cfg.dac_full_scale);
    detail::clear_pid(s);
    return {s, s.dac_code};
  }
  if (s.scan_index >= scan_ticks(cfg, dt)) return detail::enter_calibrate(cfg, s, dt);
  s.prev_fs = fs;
  s.has_prev_fs = true;
  ++s.scan_index;
  s.dac_code = dac_for(cfg, ramp_volts(cfg, s.scan_index, dt));
  return {s, s.dac_code};
}

/// Stage 3: discrete PID around the frozen ramp voltage.
inline StepResult pid_step(const ControllerConfig& cfg, ControllerState s, std::uint32_t adc_code,
                           double dt) {
  const double fs = detail::reading_volts(cfg, adc_code);
  const double deviation = fs - s.locking_point;
  if (!(std::abs(deviation) < s.th_b)) {
    ++s.relock_count;
    return detail::enter_calibrate(cfg, s, dt);
  }

  const double e = deviation * s.slope_sign;
  const double integrator = s.integrator + e * dt;
  const double derivative = s.has_prev_error ? (e - s.prev_error) / dt : 0.0;
  const double u = cfg.kp * e + cfg.ki * integrator + cfg.kd * derivative;
  double volts = s.frozen_volts - u;

  const double lo = 0.0;
  const double hi = cfg.dac_max_volts();
  const bool saturated = volts < lo || volts > hi;
  if (saturated) {
    volts = std::clamp(volts, lo, hi);
    ++s.saturated_ticks;
  } else {
    s.integrator = integrator;
    s.saturated_ticks = 0;
  }
  s.prev_error = e;
  s.has_prev_error = true;
  s.dac_code = dac_for(cfg, volts);

  StepResult r{s, s.dac_code, u};
  r.saturation_warning = s.saturated_ticks >= cfg.saturation_warn_ticks;
  return r;
}

inline StepResult idle_step(const ControllerConfig& cfg, ControllerState s, double dt,
                            const Command& cmd) {
  if (cmd.kind == Command::Kind::lock) {
    s.lock_phase = cmd.lock_phase;
    return detail::enter_calibrate(cfg, s, dt);
  }
  if (cmd.kind == Command::Kind::scan && !s.free_ramp) {
    s.free_ramp = true;
    s.ramp_position = 0.0;
    s.ramp_direction = 1;
    s.dac_code = dac_for(cfg, cfg.ramp_min_volts);
    return {s, s.dac_code};
  }
  if (s.free_ramp) s.dac_code = dac_for(cfg, advance_triangle(cfg, s, dt));
  return {s, s.dac_code};
}

/// One loop tick. Commands are honoured only in Idle.
inline StepResult controller_step(const ControllerConfig& cfg, const ControllerState& s,
                                  std::uint32_t adc_code, double dt,
                                  const Command& cmd = Command::none()) {
  switch (s.stage) {
    case Stage::idle: return idle_step(cfg, s, dt, cmd);
    case Stage::calibrate: return calibrate_step(cfg, s, adc_code, dt);
    case Stage::approach: return approach_step(cfg, s, adc_code, dt);
    case Stage::hold: return pid_step(cfg, s, adc_code, dt);
  }
  return {s, s.dac_code};
}

/// Signed control error as reported in telemetry (0 before calibration).
inline double control_error(const ControllerState& s, double fs) {
  if (!s.fringe) return 0.0;
  return (fs - s.locking_point) * s.slope_sign;
}

/// Convenience owner of one loop's configuration and state.
class PhaseLockController {
 public:
  explicit PhaseLockController(ControllerConfig cfg)
      : cfg_(std::move(cfg)), state_(initial_state(cfg_)) {}

  StepResult step(std::uint32_t adc_code, const Command& cmd = Command::none()) {
    StepResult r = controller_step(cfg_, state_, adc_code, cfg_.dt(), cmd);
    state_ = r.state;
    return r;
  }

  const ControllerConfig& config() const { return cfg_; }
  const ControllerState& state() const { return state_; }
  double output_volts() const { return dequantize(state_.dac_code, cfg_.dac_bits, cfg_.dac_full_scale); }

 private:
  ControllerConfig cfg_;
  ControllerState state_;
};

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
};

/// Classic Ziegler-Nichols PID rule from ultimate gain and oscillation period.
inline PidGains ziegler_nichols(double ultimate_gain, double ultimate_period) {
  if (!(ultimate_gain > 0.0 && ultimate_period > 0.0))
    throw Error(ErrorKind::parameter, "ziegler_nichols: ultimate gain and period must be > 0");
  return {0.6 * ultimate_gain, 1.2 * ultimate_gain / ultimate_period,
          0.075 * ultimate_gain * ultimate_period};
}

}  // namespace mcfpll
