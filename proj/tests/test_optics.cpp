#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mcfpll/mcfpll.hpp"

using namespace mcfpll;

namespace {

PlantState plant_with(std::array<double, 4> phases, std::array<double, 4> amps) {
  PlantState p;
  for (std::size_t k = 0; k < 4; ++k) p.cores[k] = {phases[k], amps[k]};
  return p;
}

const std::array<PhaseShifterSpec, 3> kShifters{};
const NetworkTopology kTopo{};

}  // namespace

// ---------------------------------------------------------------------------
// Fringe model

TEST(Fringe, Examples) {
  const FringeCalibration cal{1.0, 0.0};
  EXPECT_NEAR(fringe_signal(0.0, cal), 1.0, 1e-15);
  EXPECT_NEAR(fringe_signal(kPi, cal), 0.0, 1e-15);
  EXPECT_NEAR(fringe_signal(kPi / 2.0, cal), 0.5, 1e-15);
  EXPECT_NEAR(fringe_signal(0.0, FringeCalibration{3.0, 1.0}), 3.0, 1e-15);
}

TEST(Fringe, RejectsInvalidCalibration) {
  for (FringeCalibration bad : {FringeCalibration{1.0, 1.0}, FringeCalibration{0.5, 1.0},
                                FringeCalibration{1.0, -0.1}}) {
    try {
      fringe_signal(0.3, bad);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::calibration);
    }
  }
}

TEST(Fringe, RangeSymmetryAndPeriod) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> phase(-50.0, 50.0), lo(0.0, 2.0), span(1e-3, 3.0);
  for (int k = 0; k < 20000; ++k) {
    const double m = lo(rng);
    const FringeCalibration cal{m + span(rng), m};
    const double phi = phase(rng);
    const double v = fringe_signal(phi, cal);
    ASSERT_GE(v, cal.min - 1e-12);
    ASSERT_LE(v, cal.max + 1e-12);
    ASSERT_NEAR(v, fringe_signal(-phi, cal), 1e-12);
    ASSERT_NEAR(v, fringe_signal(phi + kTwoPi, cal), 1e-11);
  }
}

// ---------------------------------------------------------------------------
// Phase shifter

TEST(Shifter, Examples) {
  const PhaseShifterSpec s;
  EXPECT_EQ(apply_shifter(0.0, s), 0.0);
  EXPECT_NEAR(apply_shifter(1.0, s), kPi, 1e-15);
  EXPECT_NEAR(apply_shifter(2.2, s), 2.2 * kPi, 1e-15);
  EXPECT_GT(apply_shifter(2.2, s) - apply_shifter(0.0, s), kTwoPi);
}

TEST(Shifter, OutOfRangeIsActuationError) {
  const PhaseShifterSpec s;
  for (double v : {-0.01, 20.01, std::nan("")}) {
    try {
      apply_shifter(v, s);
      FAIL() << v;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::actuation);
    }
  }
}

// ---------------------------------------------------------------------------
// Network

TEST(Network, CouplerConservesEnergy) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int k = 0; k < 100000; ++k) {
    const Field a{g(rng), g(rng)}, b{g(rng), g(rng)};
    const auto [o1, o2] = combine_2x2(a, b);
    const double in = std::norm(a) + std::norm(b);
    ASSERT_NEAR(std::norm(o1) + std::norm(o2), in, 1e-12 * std::max(1.0, in));
  }
}

TEST(Network, TotalOutputEqualsInput) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ph(-10.0, 10.0), amp(0.0, 1.0), volts(0.0, 20.0);
  for (int k = 0; k < 20000; ++k) {
    PlantState p = plant_with({ph(rng), ph(rng), ph(rng), ph(rng)}, {amp(rng), amp(rng), amp(rng), amp(rng)});
    p.combiner_phase = {ph(rng), ph(rng)};
    const std::array<double, 3> v{volts(rng), volts(rng), volts(rng)};
    const NetworkFields f = propagate_fields(p, kTopo, kShifters, v);
    double in = 0.0;
    for (const auto& c : p.cores) in += c.amplitude * c.amplitude;
    const double out = std::norm(f.pair_a_monitor) + std::norm(f.pair_b_monitor) +
                       std::norm(f.overall_monitor) + std::norm(f.overall_spare);
    ASSERT_NEAR(out, in, 1e-12 * std::max(1.0, in));
  }
}

TEST(Network, EqualAmplitudeExtrema) {
  // In phase: all power on the monitored port; in antiphase: none.
  const auto bright = propagate(plant_with({0.3, 0.3, 0, 0}, {0.5, 0.5, 0.5, 0.5}), kTopo, kShifters, {0, 0, 0});
  EXPECT_NEAR(bright[0], 0.5, 1e-15);
  const auto dark = propagate(plant_with({kPi, 0.0, 0, 0}, {0.5, 0.5, 0.5, 0.5}), kTopo, kShifters, {0, 0, 0});
  EXPECT_NEAR(dark[0], 0.0, 1e-15);
}

TEST(Network, PairsAreIndependent) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ph(-10.0, 10.0);
  const std::array<double, 4> amps{0.6, 0.4, 0.5, 0.45};
  for (int k = 0; k < 1000; ++k) {
    const double p1 = ph(rng), p2 = ph(rng), p3 = ph(rng), p4 = ph(rng);
    const auto base = propagate(plant_with({p1, p2, p3, p4}, amps), kTopo, kShifters, {1, 2, 3});
    const auto b_moved = propagate(plant_with({p1, p2, ph(rng), ph(rng)}, amps), kTopo, kShifters, {1, 5, 3});
    const auto a_moved = propagate(plant_with({ph(rng), ph(rng), p3, p4}, amps), kTopo, kShifters, {7, 2, 3});
    ASSERT_EQ(base[0], b_moved[0]);
    ASSERT_EQ(base[1], a_moved[1]);
  }
}

TEST(Network, CommonModePhaseIsInvisible) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ph(-10.0, 10.0);
  const std::array<double, 4> amps{0.6, 0.4, 0.5, 0.45};
  for (int k = 0; k < 1000; ++k) {
    std::array<double, 4> p{ph(rng), ph(rng), ph(rng), ph(rng)};
    const auto base = propagate(plant_with(p, amps), kTopo, kShifters, {1, 2, 3});
    const double c = ph(rng);
    for (double& x : p) x += c;
    const auto shifted = propagate(plant_with(p, amps), kTopo, kShifters, {1, 2, 3});
    for (std::size_t i = 0; i < 3; ++i) ASSERT_NEAR(base[i], shifted[i], 1e-12);
  }
}

TEST(Network, OverallDetectorFollowsCosineOfThirdShifter) {
  // Equal amplitudes a and both pairs at quadrature put a^2 on each spare port,
  // so the third detector reads a^2 (1 + cos(theta - theta0)).
  const double a = 0.5;
  const PlantState p = plant_with({kPi / 2.0, 0.0, kPi / 2.0, 0.0}, {a, a, a, a});
  std::vector<double> d3;
  double vmax = -1.0, theta0 = 0.0;
  for (int k = 0; k < 3600; ++k) {
    const double theta = kTwoPi * k / 3600.0;
    const double v = propagate(p, kTopo, kShifters, {0.0, 0.0, theta / kPi})[2];
    d3.push_back(v);
    if (v > vmax) {
      vmax = v;
      theta0 = theta;
    }
  }
  EXPECT_NEAR(vmax, 2.0 * a * a, 1e-12);
  EXPECT_NEAR(*std::min_element(d3.begin(), d3.end()), 0.0, 1e-5);
  for (int k = 0; k < 3600; ++k) {
    const double theta = kTwoPi * k / 3600.0;
    ASSERT_NEAR(d3[static_cast<std::size_t>(k)], a * a * (1.0 + std::cos(theta - theta0)), 1e-5);
  }
}

TEST(Network, RelativePhasesIncludeShifters) {
  const PlantState p = plant_with({0.4, 0.1, 1.0, 0.2}, {0.5, 0.5, 0.5, 0.5});
  const auto r = relative_phases(p, kTopo, kShifters, {0.5, 0.25, 0.0});
  EXPECT_NEAR(r[0], 0.3 + 0.5 * kPi, 1e-12);
  EXPECT_NEAR(r[1], 0.8 + 0.25 * kPi, 1e-12);
}

TEST(Network, TopologyValidity) {
  EXPECT_TRUE(NetworkTopology{}.valid());
  EXPECT_FALSE((NetworkTopology{0, {0, 1}, {2, 3}, true}.valid()));
  EXPECT_FALSE((NetworkTopology{5, {0, 1}, {2, 3}, true}.valid()));
  EXPECT_FALSE((NetworkTopology{4, {0, 1}, {1, 3}, true}.valid()));
  EXPECT_NEAR(NetworkTopology{}.length_km(), 25.16, 1e-12);
  EXPECT_NEAR((NetworkTopology{1, {0, 1}, {2, 3}, true}.length_km()), 6.29, 1e-12);
}

// ---------------------------------------------------------------------------
// Amplitudes for target visibilities

TEST(Amplitudes, ReproduceTargetVisibilities) {
  const VisibilityTargets t;
  const auto a = amplitudes_for_visibility(t);
  auto vis = [](double x, double y) { return 2.0 * x * y / (x * x + y * y); };
  EXPECT_NEAR(vis(a[0], a[1]), t.pair_a, 1e-12);
  EXPECT_NEAR(vis(a[2], a[3]), t.pair_b, 1e-12);
  // Each pair at quadrature sends half its power to the spare port.
  const double pa = a[0] * a[0] + a[1] * a[1], pb = a[2] * a[2] + a[3] * a[3];
  EXPECT_NEAR(vis(std::sqrt(pa / 2), std::sqrt(pb / 2)), t.overall, 1e-12);
  EXPECT_NEAR(pa + pb, 1.0, 1e-12);
  EXPECT_THROW(intensity_ratio_for_visibility(0.0), Error);
  EXPECT_THROW(intensity_ratio_for_visibility(1.1), Error);
  EXPECT_EQ(intensity_ratio_for_visibility(1.0), 1.0);
}

// ---------------------------------------------------------------------------
// Detector

TEST(Detector, NoiselessSettlesToScaledIntensity) {
  const DetectorModel det{4.0, 0.0, 1000.0};
  DetectorFilter f;
  Rng rng(1);
  double y = 0.0;
  for (int k = 0; k < 100; ++k) y = detector_read(0.3, det, 1e-3, f, rng);
  EXPECT_NEAR(y, 1.2, 1e-6);
}

TEST(Detector, StepResponseIsExponential) {
  const DetectorModel det{1.0, 0.0, 50.0};
  const double tau = det.time_constant();
  const double dt = tau / 100.0;
  DetectorFilter f;
  Rng rng(1);
  for (int k = 1; k <= 300; ++k) {
    const double y = detector_read(1.0, det, dt, f, rng);
    ASSERT_NEAR(y, 1.0 - std::exp(-k * dt / tau), 1e-12);
  }
}

TEST(Detector, FilteredNoiseVarianceMatchesImpulseResponseSum) {
  const DetectorModel det{1.0, 0.01, 1000.0};
  const double dt = 5e-5;
  const double alpha = lpf_alpha(det, dt);
  // y = sum_k alpha (1-alpha)^k x_{n-k}: Var = sigma^2 sum_k alpha^2 (1-alpha)^(2k).
  double gain = 0.0;
  for (int k = 0; k < 100000; ++k) gain += alpha * alpha * std::pow(1.0 - alpha, 2.0 * k);
  const double expected = det.noise_sigma * std::sqrt(gain);

  DetectorFilter f;
  f.output = 0.5;
  Rng rng(99);
  std::vector<double> y;
  for (int k = 0; k < 1000; ++k) detector_read(0.5, det, dt, f, rng);
  for (int k = 0; k < 200000; ++k) y.push_back(detector_read(0.5, det, dt, f, rng));
  EXPECT_NEAR(std::sqrt(variance(y)), expected, 0.02 * expected);
  EXPECT_NEAR(mean(y), 0.5, 1e-4);
}

TEST(Detector, RejectsNonPositiveStep) {
  DetectorFilter f;
  Rng rng(1);
  EXPECT_THROW(detector_read(1.0, DetectorModel{}, 0.0, f, rng), Error);
}
