#pragma once

// Closed-loop scenario runner: drift -> optics -> detectors -> ADC ->
// controllers -> DAC -> shifters, one control tick at a time.
//
// Evaluation order within a tick is fixed: drift step, scheduled phase
// events, propagation, detector reads, controllers (pair A, pair B,
// overall), recording.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "mcfpll/analysis.hpp"
#include "mcfpll/controller.hpp"
#include "mcfpll/noise.hpp"
#include "mcfpll/optics.hpp"
#include "mcfpll/scenario.hpp"

namespace mcfpll {

struct InterferometerRecord {
  TimeSeries detector;                  // V, at analysis_rate
  TimeSeries drift_phase;               // rad, fibre-only relative phase (shifters excluded)
  TimeSeries total_phase;               // rad, including shifters (overall wrapped to (-pi, pi])
  std::vector<TelemetryRecord> telemetry;
  TimeSeries scan;                      // detector samples taken while free-ramping
  std::optional<VisibilityEstimate> scan_visibility;
  std::optional<FringeCalibration> first_calibration;
  std::optional<LockMetrics> metrics;
  std::optional<PsdEstimate> psd;
  std::optional<double> psd_band_average;
  double drift_excursion = 0.0;         // max - min of drift_phase
};

struct RunRecord {
  std::uint64_t config_hash = 0;
  ScenarioConfig config;
  std::array<InterferometerRecord, 3> interferometers;
  std::vector<std::string> warnings;
  double runtime_seconds = 0.0;  // wall clock; not part of emitted artifacts

  InterferometerRecord& at(Interferometer i) { return interferometers[static_cast<std::size_t>(i)]; }
  const InterferometerRecord& at(Interferometer i) const {
    return interferometers[static_cast<std::size_t>(i)];
  }
};

namespace detail {

inline double wrap_pi(double x) { return x - kTwoPi * std::floor((x + kPi) / kTwoPi); }

inline std::string fmt_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "t=%.3f s", t);
  return buf;
}

}  // namespace detail

inline RunRecord run_scenario(const ScenarioConfig& config) {
  validate_or_throw(config);
  const auto wall_start = std::chrono::steady_clock::now();

  RunRecord rec;
  rec.config = config;
  rec.config_hash = config_hash(config);

  const NetworkTopology topo = config.topology();
  const double dt = 1.0 / config.control_rate;
  const auto ticks = std::max<std::int64_t>(1, std::llround(config.duration * config.control_rate));
  const double ticks_per_sample = config.control_rate / config.analysis_rate;

  PlantState plant;
  const auto amps = config.core_amplitudes();
  for (std::size_t c = 0; c < 4; ++c) plant.cores[c] = {config.initial_phases[c], amps[c]};
  plant.combiner_phase = config.combiner_phases;

  DriftField drift(config.noise, config.strand_count, config.seed);
  std::array<Rng, 3> detector_rng{make_stream(config.seed, SegmentKind::detector, 0, 0),
                                  make_stream(config.seed, SegmentKind::detector, 0, 1),
                                  make_stream(config.seed, SegmentKind::detector, 0, 2)};
  std::array<DetectorFilter, 3> filters{};

  std::array<ControllerConfig, 3> cfg = config.controllers;
  std::array<ControllerState, 3> state{};
  std::array<double, 3> volts{};
  for (std::size_t i = 0; i < 3; ++i) {
    cfg[i].loop_rate = config.control_rate;
    state[i] = initial_state(cfg[i]);
    volts[i] = dequantize(state[i].dac_code, cfg[i].dac_bits, cfg[i].dac_full_scale);
  }
  const std::array<double, 3> zero_volts{};

  for (auto& ir : rec.interferometers) {
    for (TimeSeries* ts : {&ir.detector, &ir.drift_phase, &ir.total_phase}) ts->dt = 1.0 / config.analysis_rate;
    ir.scan.dt = 1.0 / config.analysis_rate;
  }

  std::vector<bool> issued(config.schedule.size(), false);
  std::vector<bool> applied(config.events.size(), false);
  std::array<std::optional<Command>, 3> pending;
  std::array<bool, 3> saturation_reported{};

  double overall_drift_unwrapped = 0.0;
  double overall_drift_last = 0.0;
  std::int64_t next_sample = 0;

  for (std::int64_t k = 0; k < ticks; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k > 0) apply_increments(plant, drift.step(dt));
    for (std::size_t e = 0; e < config.events.size(); ++e) {
      if (applied[e] || config.events[e].time > t + 1e-12) continue;
      plant.cores[static_cast<std::size_t>(config.events[e].core)].phase += config.events[e].phase_step;
      applied[e] = true;
    }

    const auto intensity = propagate(plant, topo, config.shifters, volts);
    std::array<double, 3> analog{};
    std::array<std::uint32_t, 3> adc{};
    for (std::size_t i = 0; i < 3; ++i) {
      analog[i] = detector_read(intensity[i], config.detectors[i], dt, filters[i], detector_rng[i]);
      adc[i] = quantize(analog[i], cfg[i].adc_bits, cfg[i].adc_full_scale);
    }

    for (std::size_t s = 0; s < config.schedule.size(); ++s) {
      const auto& entry = config.schedule[s];
      if (issued[s] || entry.time > t + 1e-12) continue;
      const auto idx = static_cast<std::size_t>(entry.target);
      pending[idx] = entry.action == Action::scan
                         ? Command::scan()
                         : Command::lock(entry.lock_phase.value_or(cfg[idx].lock_phase));
      issued[s] = true;
    }

    for (std::size_t i = 0; i < 3; ++i) {
      Command cmd = Command::none();
      if (pending[i]) {
        const bool gated = i == static_cast<std::size_t>(Interferometer::overall) &&
                           !(state[0].stage == Stage::hold && state[1].stage == Stage::hold);
        if (!gated) {
          cmd = *pending[i];
          pending[i].reset();
        }
      }
      const Stage before = state[i].stage;
      StepResult r = controller_step(cfg[i], state[i], adc[i], dt, cmd);
      const auto name = std::string(to_string(static_cast<Interferometer>(i)));
      if (r.fault != Fault::none)
        rec.warnings.push_back(detail::fmt_time(t) + " " + name + ": " + to_string(r.fault));
      if (r.saturation_warning && !saturation_reported[i]) {
        rec.warnings.push_back(detail::fmt_time(t) + " " + name + ": actuator saturated");
        saturation_reported[i] = true;
      }
      if (!r.saturation_warning) saturation_reported[i] = false;
      if (before == Stage::calibrate && r.state.stage == Stage::approach &&
          !rec.interferometers[i].first_calibration)
        rec.interferometers[i].first_calibration = r.state.fringe;
      state[i] = r.state;
      volts[i] = dequantize(r.dac_code, cfg[i].dac_bits, cfg[i].dac_full_scale);
    }

    // Fibre-only overall phase, unwrapped at the control rate.
    const auto drift_phase = relative_phases(plant, topo, config.shifters, zero_volts);
    if (k == 0) {
      overall_drift_unwrapped = drift_phase[2];
    } else {
      overall_drift_unwrapped += detail::wrap_pi(drift_phase[2] - overall_drift_last);
    }
    overall_drift_last = drift_phase[2];

    if (k == std::llround(static_cast<double>(next_sample) * ticks_per_sample)) {
      const auto total = relative_phases(plant, topo, config.shifters, volts);
      for (std::size_t i = 0; i < 3; ++i) {
        auto& ir = rec.interferometers[i];
        ir.detector.samples.push_back(analog[i]);
        ir.drift_phase.samples.push_back(i == 2 ? overall_drift_unwrapped : drift_phase[i]);
        ir.total_phase.samples.push_back(i == 2 ? detail::wrap_pi(total[i]) : total[i]);
        const double fs = dequantize(adc[i], cfg[i].adc_bits, cfg[i].adc_full_scale);
        ir.telemetry.push_back(make_record(t, state[i], fs));
        if (state[i].stage == Stage::idle && state[i].free_ramp) {
          if (ir.scan.samples.empty()) ir.scan.t0 = t;
          ir.scan.samples.push_back(analog[i]);
        }
      }
      ++next_sample;
    }
  }

  for (std::size_t i = 0; i < 3; ++i) {
    auto& ir = rec.interferometers[i];
    if (!ir.drift_phase.samples.empty()) {
      const auto [lo, hi] = std::minmax_element(ir.drift_phase.samples.begin(), ir.drift_phase.samples.end());
      ir.drift_excursion = *hi - *lo;
    }
    if (ir.scan.size() >= 3) {
      try {
        ir.scan_visibility = estimate_visibility(ir.scan);
      } catch (const Error& e) {
        rec.warnings.push_back(std::string(to_string(static_cast<Interferometer>(i))) + ": " + e.what());
      }
    }
    if (!ir.telemetry.empty() &&
        std::any_of(ir.telemetry.begin(), ir.telemetry.end(),
                    [](const TelemetryRecord& r) { return r.stage != Stage::idle; }))
      ir.metrics = lock_metrics(ir.telemetry);
    if (config.wants("psd") && ir.detector.size() >= 16) {
      ir.psd = welch_psd(ir.detector);
      try {
        ir.psd_band_average = band_average(*ir.psd, config.psd_band[0], config.psd_band[1]);
      } catch (const Error&) {
      }
    }
  }

  rec.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return rec;
}

/// Runs strand_count = 1..4 on the same seed. Pigtail and combiner streams do
/// not depend on the strand count, so only strand noise differs between runs.
inline std::vector<RunRecord> sweep_strands(const ScenarioConfig& base, bool parallel = true) {
  validate_or_throw(base);
  std::vector<RunRecord> out;
  if (!parallel) {
    for (int n = 1; n <= 4; ++n) {
      ScenarioConfig c = base;
      c.strand_count = n;
      out.push_back(run_scenario(c));
    }
    return out;
  }
  std::vector<std::future<RunRecord>> jobs;
  for (int n = 1; n <= 4; ++n) {
    ScenarioConfig c = base;
    c.strand_count = n;
    jobs.push_back(std::async(std::launch::async, [c] { return run_scenario(c); }));
  }
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

}  // namespace mcfpll
