#pragma once

// Stochastic phase drift: each segment of each core carries a Wiener walk,
// an Ornstein-Uhlenbeck wander and optional deterministic tones.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mcfpll/core.hpp"
#include "mcfpll/optics.hpp"

namespace mcfpll {

struct Tone {
  double frequency = 0.0;  // Hz
  double amplitude = 0.0;  // rad
};

struct NoiseSpec {
  double wiener_diffusion = 0.0;  // rad^2/s; Var[phase(t)] = D t
  double ou_sigma = 0.0;          // rad, stationary std dev
  double ou_tau = 1.0;            // s
  std::vector<Tone> tones;

  bool valid() const {
    if (!(wiener_diffusion >= 0.0 && ou_sigma >= 0.0 && ou_tau > 0.0)) return false;
    for (const Tone& t : tones)
      if (!(t.amplitude >= 0.0) || !std::isfinite(t.frequency)) return false;
    return true;
  }
  bool silent() const {
    if (wiener_diffusion != 0.0 || ou_sigma != 0.0) return false;
    for (const Tone& t : tones)
      if (t.amplitude != 0.0) return false;
    return true;
  }
};

/// Noise on the fan-in/fan-out pigtails (once per core), on every strand
/// (per strand per core) and on the two arms feeding the third combiner.
struct SegmentNoiseMap {
  NoiseSpec pigtail;
  NoiseSpec strand;
  NoiseSpec combiner;
};

enum class SegmentKind : std::uint32_t { pigtail = 1, strand = 2, combiner = 3, detector = 4 };

/// Independent stream per (seed, segment kind, strand, index). Streams for a
/// given segment do not depend on how many other segments exist.
inline Rng make_stream(std::uint64_t seed, SegmentKind kind, std::uint32_t strand,
                       std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(kind), strand, index};
  return Rng(seq);
}

/// One drift process and its RNG stream.
class NoiseProcess {
 public:
  NoiseProcess(const NoiseSpec& spec, Rng rng) : spec_(spec), rng_(std::move(rng)) {
    if (spec_.ou_sigma > 0.0) ou_ = spec_.ou_sigma * gauss();
  }

  /// Advances by dt and returns the phase increment.
  double step(double dt) {
    double inc = 0.0;
    if (spec_.wiener_diffusion > 0.0) inc += std::sqrt(spec_.wiener_diffusion * dt) * gauss();
    if (spec_.ou_sigma > 0.0) {
      const double decay = std::exp(-dt / spec_.ou_tau);
      const double next =
          ou_ * decay + spec_.ou_sigma * std::sqrt(1.0 - decay * decay) * gauss();
      inc += next - ou_;
      ou_ = next;
    }
    const double t1 = time_ + dt;
    for (const Tone& tone : spec_.tones) {
      if (tone.amplitude == 0.0) continue;
      inc += tone.amplitude *
             (std::sin(kTwoPi * tone.frequency * t1) - std::sin(kTwoPi * tone.frequency * time_));
    }
    time_ = t1;
    accumulated_ += inc;
    return inc;
  }

  double accumulated() const { return accumulated_; }

 private:
  double gauss() { return std::normal_distribution<double>{}(rng_); }

  NoiseSpec spec_;
  Rng rng_;
  double ou_ = 0.0;
  double time_ = 0.0;
  double accumulated_ = 0.0;
};

struct PhaseIncrements {
  std::array<double, 4> core{};
  std::array<double, 2> combiner{};
};

/// All drift processes of one plant.
class DriftField {
 public:
  DriftField(const SegmentNoiseMap& map, int strand_count, std::uint64_t seed)
      : strand_count_(strand_count) {
    if (strand_count < 1 || strand_count > 4)
      throw Error(ErrorKind::parameter, "strand_count must be in [1, 4]");
    for (std::uint32_t c = 0; c < 4; ++c) {
      pigtail_.emplace_back(map.pigtail, make_stream(seed, SegmentKind::pigtail, 0, c));
      for (std::uint32_t s = 0; s < static_cast<std::uint32_t>(strand_count); ++s)
        strand_.emplace_back(map.strand, make_stream(seed, SegmentKind::strand, s, c));
    }
    for (std::uint32_t a = 0; a < 2; ++a)
      combiner_.emplace_back(map.combiner, make_stream(seed, SegmentKind::combiner, 0, a));
  }

  int strand_count() const { return strand_count_; }

  PhaseIncrements step(double dt) {
    if (!(dt > 0.0)) throw Error(ErrorKind::parameter, "step_noise: dt must be > 0");
    PhaseIncrements out;
    for (std::size_t c = 0; c < 4; ++c) {
      double inc = pigtail_[c].step(dt);
      for (int s = 0; s < strand_count_; ++s) inc += strand_at(s, c).step(dt);
      out.core[c] = inc;
    }
    for (std::size_t a = 0; a < 2; ++a) out.combiner[a] = combiner_[a].step(dt);
    return out;
  }

  /// Accumulated drift of one core: pigtail plus every strand it traverses.
  double core_phase(int core) const {
    const auto c = static_cast<std::size_t>(core);
    double total = pigtail_.at(c).accumulated();
    for (int s = 0; s < strand_count_; ++s) total += strand_at(s, c).accumulated();
    return total;
  }

  double pigtail_phase(int core) const {
    return pigtail_.at(static_cast<std::size_t>(core)).accumulated();
  }
  double strand_phase(int strand, int core) const {
    return strand_at(strand, static_cast<std::size_t>(core)).accumulated();
  }
  double combiner_phase(int arm) const {
    return combiner_.at(static_cast<std::size_t>(arm)).accumulated();
  }

 private:
  NoiseProcess& strand_at(int s, std::size_t c) {
    return strand_[c * static_cast<std::size_t>(strand_count_) + static_cast<std::size_t>(s)];
  }
  const NoiseProcess& strand_at(int s, std::size_t c) const {
    return strand_.at(c * static_cast<std::size_t>(strand_count_) + static_cast<std::size_t>(s));
  }

  int strand_count_;
  std::vector<NoiseProcess> pigtail_;
  std::vector<NoiseProcess> strand_;
  std::vector<NoiseProcess> combiner_;
};

inline PhaseIncrements step_noise(DriftField& field, double dt) { return field.step(dt); }

inline double compose_core_phase(const DriftField& field, int core) {
  return field.core_phase(core);
}

/// Adds one step of drift to the plant.
inline void apply_increments(PlantState& plant, const PhaseIncrements& inc) {
  for (std::size_t c = 0; c < 4; ++c) plant.cores[c].phase += inc.core[c];
  for (std::size_t a = 0; a < 2; ++a) plant.combiner_phase[a] += inc.combiner[a];
}

}  // namespace mcfpll
