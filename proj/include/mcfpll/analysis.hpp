#pragma once

// Post-processing of recorded signals: visibility, phase reconstruction,
// Welch spectra and lock-quality metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mcfpll/controller.hpp"
#include "mcfpll/core.hpp"
#include "mcfpll/fft.hpp"
#include "mcfpll/optics.hpp"

namespace mcfpll {

struct TimeSeries {
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<double> samples;

  std::size_t size() const { return samples.size(); }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
  double sample_rate() const { return 1.0 / dt; }
};

inline void check(const TimeSeries& s) {
  if (!(s.dt > 0.0)) throw Error(ErrorKind::parameter, "time series dt must be > 0");
  if (s.samples.size() < 2) throw Error(ErrorKind::parameter, "time series needs >= 2 samples");
  for (double x : s.samples)
    if (!std::isfinite(x)) throw Error(ErrorKind::parameter, "time series contains non-finite samples");
}

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Population variance.
inline double variance(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double mu = mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - mu) * (v - mu);
  return acc / static_cast<double>(x.size());
}

/// Sub-series with samples in [t_begin, t_end).
inline TimeSeries slice(const TimeSeries& s, double t_begin, double t_end) {
  TimeSeries out{0.0, s.dt, {}};
  bool first = true;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = s.time(i);
    if (t + 1e-12 < t_begin || t >= t_end - 1e-12) continue;
    if (first) out.t0 = t;
    first = false;
    out.samples.push_back(s.samples[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Visibility

struct VisibilityEstimate {
  double visibility = 0.0;
  double max = 0.0;
  double min = 0.0;
};

/// V = (M-m)/(M+m), M and m the means of the top and bottom 1% of samples.
inline VisibilityEstimate estimate_visibility(const TimeSeries& scan, double band = 0.01) {
  const auto& x = scan.samples;
  if (x.size() < 3) throw Error(ErrorKind::insufficient_scan, "fringe scan needs >= 3 samples");
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  if (*hi_it > *lo_it) {
    const auto last = static_cast<std::ptrdiff_t>(x.size() - 1);
    auto at_edge = [&](auto it) {
      const auto i = it - x.begin();
      return i == 0 || i == last;
    };
    if (at_edge(lo_it) && at_edge(hi_it))
      throw Error(ErrorKind::insufficient_scan, "fringe scan is monotone; no extremum pair found");
  }
  std::vector<double> sorted(x);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t k =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(band * static_cast<double>(sorted.size()))));
  const double m = mean(std::span(sorted).first(k));
  const double M = mean(std::span(sorted).last(k));
  VisibilityEstimate est{0.0, M, m};
  if (M + m > 0.0) est.visibility = std::clamp((M - m) / (M + m), 0.0, 1.0);
  return est;
}

/// Expected error rate of a two-outcome interferometric measurement.
inline double visibility_to_error_rate(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::domain, "visibility must be in [0, 1]");
  return (1.0 - v) / 2.0;
}

// ---------------------------------------------------------------------------
// Phase reconstruction

struct PhaseTrajectory {
  TimeSeries phase;                 // rad, unwrapped
  std::vector<std::size_t> breaks;  // indices where a new continuous piece starts
};

/// Inverts the fringe model sample by sample. arccos leaves the sign open; the
/// branch is chosen to continue the previous two samples' trend, which is
/// exact unless the trajectory turns around right at a fringe extremum.
inline PhaseTrajectory phase_from_signal(const TimeSeries& fs, const FringeCalibration& cal,
                                         double tolerance = 0.05) {
  check(cal);
  check(fs);
  const double eps = tolerance * cal.contrast();
  PhaseTrajectory out{{fs.t0, fs.dt, {}}, {}};
  auto& phi = out.phase.samples;
  phi.reserve(fs.size());
  std::size_t piece_start = 0;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const double v = fs.samples[i];
    if (v < cal.min - eps || v > cal.max + eps)
      throw Error(ErrorKind::domain, "sample " + std::to_string(i) + " outside fringe range");
    const double a = std::acos(std::clamp((2.0 * v - (cal.max + cal.min)) / cal.contrast(), -1.0, 1.0));
    if (i == 0) {
      phi.push_back(a);
      continue;
    }
    const double prev = phi[i - 1];
    const double pred = (i - piece_start >= 2) ? 2.0 * prev - phi[i - 2] : prev;
    double best = 0.0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (double base : {a, -a}) {
      const double cand = base + kTwoPi * std::round((pred - base) / kTwoPi);
      const double d = std::abs(cand - pred);
      if (d < best_dist) {
        best = cand;
        best_dist = d;
      }
    }
    if (std::abs(best - prev) >= kPi) {
      out.breaks.push_back(i);
      piece_start = i;
    }
    phi.push_back(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Welch PSD

enum class Window { hann, rectangular };
enum class Detrend { none, mean };

inline const char* to_string(Window w) { return w == Window::hann ? "hann" : "rectangular"; }

struct WelchOptions {
  std::size_t segment_length = 0;  // 0: one eighth of the record
  std::ptrdiff_t overlap = -1;     // samples; -1: half a segment
  Window window = Window::hann;
  Detrend detrend = Detrend::mean;
};

struct PsdEstimate {
  std::vector<double> freqs;  // Hz
  std::vector<double> power;  // units^2/Hz, one-sided
  std::size_t segment_length = 0;
  std::size_t overlap = 0;
  std::size_t segments = 0;
  Window window = Window::hann;

  double resolution() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }
};

inline std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (w == Window::hann)
    for (std::size_t i = 0; i < n; ++i)
      out[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  return out;
}

/// Averaged modified periodograms, one-sided density: sum(power) * df equals
/// the window-weighted mean square of the (detrended) segments.
inline PsdEstimate welch_psd(const TimeSeries& series, const WelchOptions& opt = {}) {
  check(series);
  const std::size_t n = series.size();
  const std::size_t len = opt.segment_length ? opt.segment_length : n / 8;
  if (len < 2 || len > n)
    throw Error(ErrorKind::parameter, "welch_psd: segment length must be in [2, record length]");
  const std::size_t overlap = opt.overlap < 0 ? len / 2 : static_cast<std::size_t>(opt.overlap);
  if (overlap >= len) throw Error(ErrorKind::parameter, "welch_psd: overlap must be < segment length");

  const std::vector<double> w = make_window(opt.window, len);
  const double wpow = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
  const double fs = series.sample_rate();
  const std::size_t bins = len / 2 + 1;

  PsdEstimate est;
  est.segment_length = len;
  est.overlap = overlap;
  est.window = opt.window;
  est.power.assign(bins, 0.0);
  est.freqs.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) est.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(len);

  RealFft fft(len);
  std::vector<double> buf(len);
  const std::size_t hop = len - overlap;
  for (std::size_t start = 0; start + len <= n; start += hop) {
    const auto seg = std::span(series.samples).subspan(start, len);
    const double mu = opt.detrend == Detrend::mean ? mean(seg) : 0.0;
    for (std::size_t i = 0; i < len; ++i) buf[i] = (seg[i] - mu) * w[i];
    const auto spec = fft.forward(buf);
    for (std::size_t k = 0; k < bins; ++k) {
      const bool unpaired = k == 0 || (len % 2 == 0 && k == len / 2);
      est.power[k] += (unpaired ? 1.0 : 2.0) * std::norm(spec[k]);
    }
    ++est.segments;
  }
  const double scale = 1.0 / (fs * wpow * static_cast<double>(est.segments));
  for (double& p : est.power) p *= scale;
  return est;
}

/// Mean density over bins with f_lo <= f <= f_hi.
inline double band_average(const PsdEstimate& psd, double f_lo, double f_hi) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    if (psd.freqs[k] < f_lo || psd.freqs[k] > f_hi) continue;
    acc += psd.power[k];
    ++count;
  }
  if (count == 0) throw Error(ErrorKind::parameter, "band_average: no bins in band");
  return acc / static_cast<double>(count);
}

/// Trapezoidal integral of the density over frequency.
inline double integrate_trapezoid(std::span<const double> f, std::span<const double> p) {
  double acc = 0.0;
  for (std::size_t k = 1; k < f.size(); ++k) acc += 0.5 * (p[k] + p[k - 1]) * (f[k] - f[k - 1]);
  return acc;
}

// ---------------------------------------------------------------------------
// Lock metrics

struct TelemetryRecord {
  double time = 0.0;
  Stage stage = Stage::idle;
  double fs = 0.0;
  double lp = 0.0;
  std::uint32_t dac_code = 0;
  double error = 0.0;
  std::uint64_t relock_count = 0;
  double fringe_min = 0.0;
  double fringe_max = 0.0;
  double lock_phase = 0.0;
};

inline TelemetryRecord make_record(double time, const ControllerState& s, double fs) {
  TelemetryRecord r;
  r.time = time;
  r.stage = s.stage;
  r.fs = fs;
  r.lp = s.fringe ? s.locking_point : 0.0;
  r.dac_code = s.dac_code;
  r.error = control_error(s, fs);
  r.relock_count = s.relock_count;
  if (s.fringe) {
    r.fringe_min = s.fringe->min;
    r.fringe_max = s.fringe->max;
  }
  r.lock_phase = s.lock_phase;
  return r;
}

struct LockMetrics {
  double residual_rms = 0.0;  // rad
  double time_in_hold_fraction = 0.0;
  std::uint64_t relock_count = 0;
  double mean_acquisition_time = 0.0;  // s
  std::size_t acquisitions = 0;
};

/// Principal-branch phase offset of an FS sample from the lock phase.
inline double residual_phase(const TelemetryRecord& r) {
  const FringeCalibration cal{r.fringe_max, r.fringe_min};
  if (!cal.valid()) return 0.0;
  const double c = std::clamp((2.0 * r.fs - (cal.max + cal.min)) / cal.contrast(), -1.0, 1.0);
  return std::acos(c) - std::acos(std::cos(r.lock_phase));
}

/// Metrics over the records from the first non-Idle one onwards.
inline LockMetrics lock_metrics(std::span<const TelemetryRecord> telemetry) {
  if (telemetry.empty()) throw Error(ErrorKind::parameter, "lock_metrics: empty telemetry");
  LockMetrics m;
  m.relock_count = telemetry.back().relock_count;
  const auto first = std::find_if(telemetry.begin(), telemetry.end(),
                                  [](const TelemetryRecord& r) { return r.stage != Stage::idle; });
  if (first == telemetry.end()) return m;

  std::size_t considered = 0, hold = 0;
  double sq = 0.0, acq_total = 0.0;
  bool acquiring = false;
  double acq_start = 0.0;
  Stage prev = Stage::idle;
  for (auto it = first; it != telemetry.end(); ++it) {
    ++considered;
    const bool scanning = it->stage == Stage::calibrate || it->stage == Stage::approach;
    if (scanning && !acquiring && (prev == Stage::idle || prev == Stage::hold)) {
      acquiring = true;
      acq_start = it->time;
    }
    if (it->stage == Stage::hold) {
      ++hold;
      const double r = residual_phase(*it);
      sq += r * r;
      if (acquiring) {
        acq_total += it->time - acq_start;
        ++m.acquisitions;
        acquiring = false;
      }
    }
    if (it->stage == Stage::idle) acquiring = false;
    prev = it->stage;
  }
  m.time_in_hold_fraction = static_cast<double>(hold) / static_cast<double>(considered);
  m.residual_rms = hold ? std::sqrt(sq / static_cast<double>(hold)) : 0.0;
  m.mean_acquisition_time = m.acquisitions ? acq_total / static_cast<double>(m.acquisitions) : 0.0;
  return m;
}

}  // namespace mcfpll
