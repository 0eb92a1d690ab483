#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mcfpll/mcfpll.hpp"

using namespace mcfpll;

namespace {

TimeSeries cosine_fringe(const FringeCalibration& cal, double periods, std::size_t n) {
  TimeSeries s{0.0, 1e-3, {}};
  for (std::size_t k = 0; k < n; ++k)
    s.samples.push_back(fringe_signal(kTwoPi * periods * static_cast<double>(k) / static_cast<double>(n), cal));
  return s;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::simulation;
}

}  // namespace

// ---------------------------------------------------------------------------
// Visibility

TEST(Visibility, Examples) {
  EXPECT_NEAR(estimate_visibility(cosine_fringe({1.0, 0.0}, 3, 3000)).visibility, 1.0, 1e-3);
  TimeSeries flat{0.0, 1e-3, std::vector<double>(100, 0.7)};
  EXPECT_EQ(estimate_visibility(flat).visibility, 0.0);
  const auto est = estimate_visibility(cosine_fringe({3.0, 1.0}, 2, 4000));
  EXPECT_NEAR(est.visibility, 0.5, 1e-3);
  EXPECT_NEAR(est.max, 3.0, 1e-3);
  EXPECT_NEAR(est.min, 1.0, 1e-3);
}

TEST(Visibility, RecoversNinetyFourPointFive) {
  const double v = 0.945;
  const FringeCalibration cal{1.0 + v, 1.0 - v};
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 1e-3);
  TimeSeries s = cosine_fringe(cal, 4, 8000);
  for (double& x : s.samples) x += noise(rng);
  EXPECT_NEAR(estimate_visibility(s).visibility, v, 0.003);
}

TEST(Visibility, ScaleInvariantAndOffsetPredictable) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int k = 0; k < 200; ++k) {
    const double m = u(rng) * 0.2;
    const FringeCalibration cal{m + u(rng), m};
    const TimeSeries s = cosine_fringe(cal, 3, 1500);
    const auto base = estimate_visibility(s);
    const double c = u(rng), b = u(rng);
    TimeSeries scaled = s, shifted = s;
    for (double& x : scaled.samples) x *= c;
    for (double& x : shifted.samples) x += b;
    ASSERT_NEAR(estimate_visibility(scaled).visibility, base.visibility, 1e-12);
    ASSERT_NEAR(estimate_visibility(shifted).visibility,
                (base.max - base.min) / (base.max + base.min + 2.0 * b), 1e-12);
  }
}

TEST(Visibility, InsufficientScan) {
  EXPECT_EQ(kind_of([] { estimate_visibility(TimeSeries{0.0, 1.0, {1.0, 2.0}}); }),
            ErrorKind::insufficient_scan);
  TimeSeries ramp{0.0, 1.0, {}};
  for (int k = 0; k < 100; ++k) ramp.samples.push_back(0.01 * k);
  EXPECT_EQ(kind_of([&] { estimate_visibility(ramp); }), ErrorKind::insufficient_scan);
}

TEST(ErrorRate, Examples) {
  EXPECT_NEAR(visibility_to_error_rate(0.989), 0.0055, 1e-12);
  EXPECT_NEAR(visibility_to_error_rate(0.981), 0.0095, 1e-12);
  EXPECT_NEAR(visibility_to_error_rate(0.945), 0.0275, 1e-12);
  EXPECT_EQ(visibility_to_error_rate(1.0), 0.0);
  EXPECT_EQ(visibility_to_error_rate(0.0), 0.5);
  EXPECT_EQ(kind_of([] { visibility_to_error_rate(1.01); }), ErrorKind::domain);
  EXPECT_EQ(kind_of([] { visibility_to_error_rate(-0.1); }), ErrorKind::domain);
}

// ---------------------------------------------------------------------------
// Phase reconstruction

TEST(PhaseFromSignal, ConstantAtMaximumIsZero) {
  const FringeCalibration cal{2.0, 0.5};
  const TimeSeries s{0.0, 1e-3, std::vector<double>(50, 2.0)};
  const auto p = phase_from_signal(s, cal);
  for (double x : p.phase.samples) EXPECT_NEAR(x, 0.0, 1e-12);
  EXPECT_TRUE(p.breaks.empty());
}

TEST(PhaseFromSignal, LinearPhaseGivesConstantSlope) {
  const FringeCalibration cal{1.0, 0.0};
  const double period = 0.25, dt = 1e-3;
  TimeSeries s{0.0, dt, {}};
  for (int k = 0; k < 2000; ++k) s.samples.push_back(fringe_signal(0.3 + kTwoPi * k * dt / period, cal));
  const auto p = phase_from_signal(s, cal);
  const auto& phi = p.phase.samples;
  const double slope = (phi.back() - phi.front()) / (dt * static_cast<double>(phi.size() - 1));
  EXPECT_NEAR(slope, kTwoPi / period, 0.01 * kTwoPi / period);
  EXPECT_TRUE(p.breaks.empty());
}

TEST(PhaseFromSignal, RoundTripsAdmissibleTrajectories) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const FringeCalibration cal{1.8, 0.1};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> truth;
    if (trial % 2 == 0) {
      // Constant velocity through many fringes. The direction of travel is
      // unobservable if the very first step straddles an extremum, so such
      // starts are excluded.
      double start = 0.0, rate = 0.0;
      do {
        start = -10.0 + 20.0 * u(rng);
        rate = (u(rng) - 0.5) * 0.4;
      } while (std::floor(start / kPi) != std::floor((start + rate) / kPi));
      for (int k = 0; k < 1000; ++k) truth.push_back(start + rate * k);
    } else {
      // Slow wander confined between the fringe extrema.
      const double centre = 0.6 + (kPi - 1.2) * u(rng), amp = 0.3 * u(rng), w = 0.01 + 0.02 * u(rng);
      for (int k = 0; k < 1000; ++k) truth.push_back(centre + amp * std::sin(w * k));
    }
    TimeSeries s{0.0, 1e-3, {}};
    for (double x : truth) s.samples.push_back(fringe_signal(x, cal));
    const auto p = phase_from_signal(s, cal);
    ASSERT_TRUE(p.breaks.empty()) << trial;
    const double sign = std::abs(truth[0] - std::floor(truth[0] / kTwoPi) * kTwoPi) <= kPi ? 1.0 : -1.0;
    const double offset = p.phase.samples[0] - sign * truth[0];
    for (std::size_t k = 0; k < truth.size(); ++k)
      ASSERT_NEAR(p.phase.samples[k], sign * truth[k] + offset, 1e-6) << trial << " @ " << k;
    ASSERT_NEAR(std::remainder(offset, kTwoPi), 0.0, 1e-6);
  }
}

TEST(PhaseFromSignal, FlagsHalfFringeJump) {
  const FringeCalibration cal{1.0, 0.0};
  TimeSeries s{0.0, 1e-3, {1.0, 1.0, 1.0, 0.0, 0.0}};
  const auto p = phase_from_signal(s, cal);
  ASSERT_EQ(p.breaks.size(), 1u);
  EXPECT_EQ(p.breaks[0], 3u);
}

TEST(PhaseFromSignal, Errors) {
  const FringeCalibration cal{1.0, 0.0};
  EXPECT_EQ(kind_of([&] { phase_from_signal(TimeSeries{0.0, 1e-3, {0.5, 1.2}}, cal); }), ErrorKind::domain);
  EXPECT_EQ(kind_of([&] { phase_from_signal(TimeSeries{0.0, 1e-3, {0.5, 0.5}}, FringeCalibration{1.0, 1.0}); }),
            ErrorKind::calibration);
  EXPECT_EQ(kind_of([&] { phase_from_signal(TimeSeries{0.0, 1e-3, {0.5}}, cal); }), ErrorKind::parameter);
}

// ---------------------------------------------------------------------------
// Welch PSD

TEST(Welch, SinusoidPowerConcentratesAtItsFrequency) {
  const double fs = 1000.0, f0 = 62.5, a = 1.3;
  TimeSeries s{0.0, 1.0 / fs, {}};
  for (int k = 0; k < 16384; ++k) s.samples.push_back(a * std::sin(kTwoPi * f0 * k / fs) + 0.2);
  const PsdEstimate p = welch_psd(s);
  const auto peak = std::max_element(p.power.begin(), p.power.end()) - p.power.begin();
  EXPECT_NEAR(p.freqs[static_cast<std::size_t>(peak)], f0, p.resolution());
  double near = 0.0;
  for (std::size_t k = 0; k < p.freqs.size(); ++k)
    if (std::abs(p.freqs[k] - f0) <= 3.0 * p.resolution()) near += p.power[k] * p.resolution();
  EXPECT_NEAR(near, a * a / 2.0, 0.02 * a * a / 2.0);
}

TEST(Welch, WhiteNoiseParsevalAndLevel) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.7);
    const double fs = 200.0;
    TimeSeries s{0.0, 1.0 / fs, {}};
    for (int k = 0; k < 40000; ++k) s.samples.push_back(g(rng));
    const PsdEstimate p = welch_psd(s);
    double total = 0.0;
    for (double x : p.power) total += x * p.resolution();
    EXPECT_NEAR(total, variance(s.samples), 0.05 * variance(s.samples));
    EXPECT_NEAR(band_average(p, 10.0, 90.0), 2.0 * 0.49 / fs, 0.05 * 2.0 * 0.49 / fs);
  }
}

TEST(Welch, ParsevalOnColouredProcesses) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 0.8);
  for (int trial = 0; trial < 20; ++trial) {
    const double r = u(rng);
    TimeSeries s{0.0, 0.01, {}};
    double x = 0.0;
    for (int k = 0; k < 32768; ++k) {
      x = r * x + g(rng);
      s.samples.push_back(x + 0.3 * std::sin(0.37 * k));
    }
    const PsdEstimate p = welch_psd(s);
    const double total = integrate_trapezoid(p.freqs, p.power);
    EXPECT_NEAR(total, variance(s.samples), 0.05 * variance(s.samples)) << r;
  }
}

TEST(Welch, ShapeInvariants) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  TimeSeries s{0.0, 1.0 / 6.0, {}};
  for (int k = 0; k < 10800; ++k) s.samples.push_back(g(rng));
  const PsdEstimate p = welch_psd(s);
  EXPECT_EQ(p.segment_length, 1350u);
  EXPECT_EQ(p.overlap, 675u);
  EXPECT_EQ(p.segments, 15u);
  EXPECT_EQ(p.freqs.front(), 0.0);
  EXPECT_NEAR(p.freqs.back(), 3.0, 1e-12);
  for (std::size_t k = 1; k < p.freqs.size(); ++k) ASSERT_GT(p.freqs[k], p.freqs[k - 1]);
  for (double x : p.power) ASSERT_GE(x, 0.0);
}

TEST(Welch, RectangularWindowMatchesPeriodogramOfWholeRecord) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  TimeSeries s{0.0, 1.0, {}};
  for (int k = 0; k < 64; ++k) s.samples.push_back(g(rng));
  WelchOptions o;
  o.segment_length = 64;
  o.overlap = 0;
  o.window = Window::rectangular;
  o.detrend = Detrend::none;
  const PsdEstimate p = welch_psd(s, o);
  // Direct DFT oracle.
  for (std::size_t k = 0; k <= 32; ++k) {
    std::complex<double> acc{};
    for (std::size_t n = 0; n < 64; ++n)
      acc += s.samples[n] * std::polar(1.0, -kTwoPi * static_cast<double>(k * n) / 64.0);
    const double scale = (k == 0 || k == 32) ? 1.0 : 2.0;
    ASSERT_NEAR(p.power[k], scale * std::norm(acc) / 64.0, 1e-10);
  }
}

TEST(Welch, ParameterErrors) {
  TimeSeries s{0.0, 1.0, std::vector<double>(100, 1.0)};
  WelchOptions too_long;
  too_long.segment_length = 101;
  EXPECT_EQ(kind_of([&] { welch_psd(s, too_long); }), ErrorKind::parameter);
  WelchOptions bad_overlap;
  bad_overlap.segment_length = 20;
  bad_overlap.overlap = 20;
  EXPECT_EQ(kind_of([&] { welch_psd(s, bad_overlap); }), ErrorKind::parameter);
  EXPECT_EQ(kind_of([&] { welch_psd(TimeSeries{0.0, 0.0, {1.0, 2.0, 3.0}}); }), ErrorKind::parameter);
  const PsdEstimate p = welch_psd(s);
  EXPECT_EQ(kind_of([&] { band_average(p, 10.0, 20.0); }), ErrorKind::parameter);
}

// ---------------------------------------------------------------------------
// Lock metrics

namespace {

TelemetryRecord rec(double t, Stage st, double fs, std::uint64_t relocks = 0) {
  TelemetryRecord r;
  r.time = t;
  r.stage = st;
  r.fs = fs;
  r.relock_count = relocks;
  if (st != Stage::idle) {
    r.fringe_min = 0.0;
    r.fringe_max = 2.0;
    r.lp = 1.0;
  }
  r.lock_phase = kPi / 2.0;
  return r;
}

}  // namespace

TEST(LockMetrics, PerfectHold) {
  std::vector<TelemetryRecord> t;
  for (int k = 0; k < 100; ++k) t.push_back(rec(k, Stage::hold, 1.0));
  const LockMetrics m = lock_metrics(t);
  EXPECT_NEAR(m.residual_rms, 0.0, 1e-12);
  EXPECT_EQ(m.time_in_hold_fraction, 1.0);
  EXPECT_EQ(m.relock_count, 0u);
}

TEST(LockMetrics, AcquisitionAndRelock) {
  std::vector<TelemetryRecord> t;
  for (int k = 0; k < 10; ++k) t.push_back(rec(k, Stage::idle, 0.3));
  for (int k = 10; k < 15; ++k) t.push_back(rec(k, Stage::calibrate, 0.3));
  for (int k = 15; k < 40; ++k) t.push_back(rec(k, Stage::hold, 1.0 + 2.0 * std::sin(0.1) / 2.0 * (k % 2 ? 1 : -1)));
  for (int k = 40; k < 43; ++k) t.push_back(rec(k, Stage::calibrate, 0.3, 1));
  for (int k = 43; k < 50; ++k) t.push_back(rec(k, Stage::hold, 1.0, 1));
  const LockMetrics m = lock_metrics(t);
  EXPECT_NEAR(m.time_in_hold_fraction, 32.0 / 40.0, 1e-12);
  EXPECT_EQ(m.relock_count, 1u);
  EXPECT_EQ(m.acquisitions, 2u);
  EXPECT_NEAR(m.mean_acquisition_time, (5.0 + 3.0) / 2.0, 1e-12);
  // 25 samples at +-0.1 rad, 7 at 0.
  EXPECT_NEAR(m.residual_rms, std::sqrt(25.0 * 0.01 / 32.0), 1e-9);
}

TEST(LockMetrics, EmptyTelemetryIsAnError) {
  EXPECT_EQ(kind_of([] { lock_metrics({}); }), ErrorKind::parameter);
}

TEST(TimeSeriesTools, SliceAndMoments) {
  TimeSeries s{1.0, 0.5, {1, 2, 3, 4, 5, 6}};
  const TimeSeries mid = slice(s, 2.0, 3.0);
  EXPECT_EQ(mid.samples, (std::vector<double>{3, 4}));
  EXPECT_EQ(mid.t0, 2.0);
  EXPECT_NEAR(variance(s.samples), 35.0 / 12.0, 1e-12);
  EXPECT_NEAR(integrate_trapezoid(std::vector<double>{0, 1, 2}, std::vector<double>{1, 1, 3}), 3.0, 1e-15);
}
