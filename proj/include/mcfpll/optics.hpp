#pragma once

// Optical network model: 1x4 split, four MCF cores, two pair interferometers
// whose spare ports feed a third 2x2 combiner, three photodetectors.

#include <array>
#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <tuple>
#include <utility>

#include "mcfpll/core.hpp"

namespace mcfpll {

using Rng = std::mt19937_64;
using Field = std::complex<double>;

struct CoreState {
  double phase = 0.0;      // rad, unwrapped
  double amplitude = 0.5;  // field amplitude
};

/// Extrema (M, m) of one interferometer fringe, in detector units.
struct FringeCalibration {
  double max = 1.0;
  double min = 0.0;

  bool valid() const { return std::isfinite(max) && std::isfinite(min) && max > min && min >= 0.0; }
  double contrast() const { return max - min; }
  double half_amplitude() const { return 0.5 * (max - min); }
  double mid() const { return 0.5 * (max + min); }
  double visibility() const { return (max - min) / (max + min); }
};

inline void check(const FringeCalibration& cal) {
  if (!(cal.max > cal.min) || !(cal.min >= 0.0) || !std::isfinite(cal.max))
    throw Error(ErrorKind::calibration,
                "fringe extrema must satisfy max > min >= 0 (max=" + std::to_string(cal.max) +
                    ", min=" + std::to_string(cal.min) + ")");
}

/// FS(phi) = (M-m)/2 cos(phi) + (M+m)/2.
inline double fringe_signal(double phi, const FringeCalibration& cal) {
  check(cal);
  return cal.half_amplitude() * std::cos(phi) + cal.mid();
}

struct DetectorModel {
  double responsivity = 4.0;  // V per unit optical intensity
  double noise_sigma = 1e-3;  // V, white Gaussian before the low-pass
  double lpf_cutoff = 1000.0; // Hz

  bool valid() const { return responsivity > 0.0 && noise_sigma >= 0.0 && lpf_cutoff > 0.0; }
  double time_constant() const { return 1.0 / (kTwoPi * lpf_cutoff); }
};

/// Single-pole low-pass state. Starts discharged.
struct DetectorFilter {
  double output = 0.0;
};

/// Per-tick smoothing factor of the discretized single-pole filter.
inline double lpf_alpha(const DetectorModel& det, double dt) {
  return 1.0 - std::exp(-dt / det.time_constant());
}

inline double detector_read(double intensity, const DetectorModel& det, double dt,
                            DetectorFilter& filter, Rng& rng) {
  if (!(dt > 0.0)) throw Error(ErrorKind::parameter, "detector_read: dt must be > 0");
  double x = det.responsivity * intensity;
  if (det.noise_sigma > 0.0) x += det.noise_sigma * std::normal_distribution<double>{}(rng);
  filter.output += lpf_alpha(det, dt) * (x - filter.output);
  return filter.output;
}

struct PhaseShifterSpec {
  double gain = kPi;  // rad/V
  double v_min = 0.0;
  double v_max = 20.0;

  bool valid() const { return gain * (v_max - v_min) > kTwoPi; }
};

inline double apply_shifter(double volts, const PhaseShifterSpec& spec) {
  if (!(volts >= spec.v_min && volts <= spec.v_max))
    throw Error(ErrorKind::actuation, "shifter voltage " + std::to_string(volts) +
                                          " V outside [" + std::to_string(spec.v_min) + ", " +
                                          std::to_string(spec.v_max) + "]");
  return spec.gain * volts;
}

/// Which interferometer a detector / shifter / controller belongs to.
enum class Interferometer { pair_a = 0, pair_b = 1, overall = 2 };

inline constexpr std::array<Interferometer, 3> kInterferometers{
    Interferometer::pair_a, Interferometer::pair_b, Interferometer::overall};

inline const char* to_string(Interferometer i) {
  switch (i) {
    case Interferometer::pair_a: return "pair_a";
    case Interferometer::pair_b: return "pair_b";
    case Interferometer::overall: return "overall";
  }
  return "?";
}

/// Shifter 0 sits on the first core of pair A, shifter 1 on the first core of
/// pair B, shifter 2 on pair A's spare-port arm in front of the third combiner.
struct NetworkTopology {
  int strand_count = 4;
  std::array<int, 2> pair_a{0, 1};
  std::array<int, 2> pair_b{2, 3};
  bool combiner_stage = true;

  double length_km() const { return strand_count * kStrandLengthKm; }

  bool valid() const {
    if (strand_count < 1 || strand_count > 4) return false;
    std::array<int, 4> seen{};
    for (int c : {pair_a[0], pair_a[1], pair_b[0], pair_b[1]}) {
      if (c < 0 || c > 3) return false;
      ++seen[static_cast<std::size_t>(c)];
    }
    for (int n : seen)
      if (n != 1) return false;
    return true;
  }
};

struct PlantState {
  std::array<CoreState, 4> cores{};
  std::array<double, 2> combiner_phase{};  // arm phases in front of the third combiner (A, B)
};

/// Lossless 50:50 coupler: (a+b)/sqrt2 on the monitored port, (a-b)/sqrt2 on the spare.
inline std::pair<Field, Field> combine_2x2(Field a, Field b) {
  constexpr double s = 0.70710678118654752440;
  return {(a + b) * s, (a - b) * s};
}

struct NetworkFields {
  Field pair_a_monitor, pair_a_spare;
  Field pair_b_monitor, pair_b_spare;
  Field overall_monitor, overall_spare;
  Field overall_in_a, overall_in_b;  // what reaches the third combiner
};

inline NetworkFields propagate_fields(const PlantState& plant, const NetworkTopology& topo,
                                      const std::array<PhaseShifterSpec, 3>& shifters,
                                      const std::array<double, 3>& volts) {
  std::array<double, 3> shift{};
  for (std::size_t i = 0; i < 3; ++i) shift[i] = apply_shifter(volts[i], shifters[i]);

  auto field = [&](int core, double extra) {
    const CoreState& c = plant.cores[static_cast<std::size_t>(core)];
    return std::polar(c.amplitude, c.phase + extra);
  };

  NetworkFields f;
  std::tie(f.pair_a_monitor, f.pair_a_spare) =
      combine_2x2(field(topo.pair_a[0], shift[0]), field(topo.pair_a[1], 0.0));
  std::tie(f.pair_b_monitor, f.pair_b_spare) =
      combine_2x2(field(topo.pair_b[0], shift[1]), field(topo.pair_b[1], 0.0));
  f.overall_in_a = f.pair_a_spare * std::polar(1.0, shift[2] + plant.combiner_phase[0]);
  f.overall_in_b = f.pair_b_spare * std::polar(1.0, plant.combiner_phase[1]);
  if (topo.combiner_stage)
    std::tie(f.overall_monitor, f.overall_spare) = combine_2x2(f.overall_in_a, f.overall_in_b);
  return f;
}

/// Optical intensities at the three monitored ports.
inline std::array<double, 3> propagate(const PlantState& plant, const NetworkTopology& topo,
                                       const std::array<PhaseShifterSpec, 3>& shifters,
                                       const std::array<double, 3>& volts) {
  const NetworkFields f = propagate_fields(plant, topo, shifters, volts);
  return {std::norm(f.pair_a_monitor), std::norm(f.pair_b_monitor), std::norm(f.overall_monitor)};
}

/// True relative phases seen by each interferometer (pairs unwrapped, overall in (-pi, pi]).
inline std::array<double, 3> relative_phases(const PlantState& plant, const NetworkTopology& topo,
                                             const std::array<PhaseShifterSpec, 3>& shifters,
                                             const std::array<double, 3>& volts) {
  const auto& c = plant.cores;
  auto ph = [&](int i) { return c[static_cast<std::size_t>(i)].phase; };
  const double a = ph(topo.pair_a[0]) + shifters[0].gain * volts[0] - ph(topo.pair_a[1]);
  const double b = ph(topo.pair_b[0]) + shifters[1].gain * volts[1] - ph(topo.pair_b[1]);
  const NetworkFields f = propagate_fields(plant, topo, shifters, volts);
  const double o = std::arg(f.overall_in_a * std::conj(f.overall_in_b));
  return {a, b, o};
}

/// Intensity ratio (weak/strong, <= 1) of two interfering beams giving visibility v.
inline double intensity_ratio_for_visibility(double v) {
  if (!(v > 0.0 && v <= 1.0)) throw Error(ErrorKind::domain, "visibility must be in (0, 1]");
  const double r = (1.0 - std::sqrt(1.0 - v * v)) / v;  // amplitude ratio
  return r * r;
}

struct VisibilityTargets {
  double pair_a = 0.981;
  double pair_b = 0.945;
  double overall = 0.989;
};

/// Core field amplitudes (total intensity 1) realising the target visibilities,
/// the overall one assuming both pairs sit at half fringe.
inline std::array<double, 4> amplitudes_for_visibility(const VisibilityTargets& v) {
  const double rho_o = intensity_ratio_for_visibility(v.overall);
  const double p_a = 1.0 / (1.0 + rho_o);
  const double p_b = rho_o / (1.0 + rho_o);
  auto split = [](double power, double vis) {
    const double rho = intensity_ratio_for_visibility(vis);
    return std::pair{std::sqrt(power / (1.0 + rho)), std::sqrt(power * rho / (1.0 + rho))};
  };
  const auto [a1, a2] = split(p_a, v.pair_a);
  const auto [a3, a4] = split(p_b, v.pair_b);
  return {a1, a2, a3, a4};
}

}  // namespace mcfpll
