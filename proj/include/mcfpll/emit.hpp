#pragma once

// Artifact writers. CSV files start with a "# mcfpll <kind> v1" schema line,
// then a header row; numbers are printed with %.10g so re-emission of the same
// record is byte-identical.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mcfpll/analysis.hpp"
#include "mcfpll/scenario.hpp"
#include "mcfpll/simulation.hpp"

namespace mcfpll {

inline constexpr const char* kSummarySchema = "mcfpll-summary/1";

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + p.string() + " for writing");
  out << content;
  out.close();
  if (!out) throw Error(ErrorKind::io, "failed writing " + p.string());
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace detail

inline std::string telemetry_csv(const RunRecord& rec) {
  std::ostringstream os;
  os << "# mcfpll telemetry v1\n";
  os << "time,interferometer,stage,fs,lp,dac_code,error,relock_count,fringe_min,fringe_max,lock_phase\n";
  for (Interferometer i : kInterferometers)
    for (const TelemetryRecord& r : rec.at(i).telemetry)
      os << detail::num(r.time) << ',' << to_string(i) << ',' << to_string(r.stage) << ','
         << detail::num(r.fs) << ',' << detail::num(r.lp) << ',' << r.dac_code << ','
         << detail::num(r.error) << ',' << r.relock_count << ',' << detail::num(r.fringe_min) << ','
         << detail::num(r.fringe_max) << ',' << detail::num(r.lock_phase) << '\n';
  return os.str();
}

inline std::string detectors_csv(const RunRecord& rec) {
  std::ostringstream os;
  os << "# mcfpll detectors v1\n";
  os << "time,pair_a,pair_b,overall\n";
  const auto& a = rec.at(Interferometer::pair_a).detector;
  for (std::size_t k = 0; k < a.size(); ++k) {
    os << detail::num(rec.at(Interferometer::pair_a).telemetry[k].time);
    for (Interferometer i : kInterferometers) os << ',' << detail::num(rec.at(i).detector.samples[k]);
    os << '\n';
  }
  return os.str();
}

inline std::string phases_csv(const RunRecord& rec) {
  std::ostringstream os;
  os << "# mcfpll phases v1\n";
  os << "time,drift_pair_a,drift_pair_b,drift_overall,total_pair_a,total_pair_b,total_overall\n";
  const std::size_t n = rec.at(Interferometer::pair_a).drift_phase.size();
  for (std::size_t k = 0; k < n; ++k) {
    os << detail::num(rec.at(Interferometer::pair_a).telemetry[k].time);
    for (Interferometer i : kInterferometers) os << ',' << detail::num(rec.at(i).drift_phase.samples[k]);
    for (Interferometer i : kInterferometers) os << ',' << detail::num(rec.at(i).total_phase.samples[k]);
    os << '\n';
  }
  return os.str();
}

inline std::string psd_csv(const PsdEstimate& psd) {
  std::ostringstream os;
  os << "# mcfpll psd v1 window=" << to_string(psd.window) << " segment_length=" << psd.segment_length
     << " overlap=" << psd.overlap << " segments=" << psd.segments << '\n';
  os << "freq,power\n";
  for (std::size_t k = 0; k < psd.freqs.size(); ++k)
    os << detail::num(psd.freqs[k]) << ',' << detail::num(psd.power[k]) << '\n';
  return os.str();
}

inline Json to_json(const LockMetrics& m) {
  return {{"residual_rms", m.residual_rms},
          {"time_in_hold_fraction", m.time_in_hold_fraction},
          {"relock_count", m.relock_count},
          {"mean_acquisition_time", m.mean_acquisition_time},
          {"acquisitions", m.acquisitions}};
}

inline Json summary_json(const RunRecord& rec) {
  Json j;
  j["schema"] = kSummarySchema;
  j["config_hash"] = hex(rec.config_hash);
  j["seed"] = rec.config.seed;
  j["strand_count"] = rec.config.strand_count;
  j["length_km"] = rec.config.topology().length_km();
  for (Interferometer i : kInterferometers) {
    const auto& ir = rec.at(i);
    Json e;
    e["visibility_scan"] = ir.scan_visibility ? Json(ir.scan_visibility->visibility) : Json(nullptr);
    e["visibility_calibration"] =
        ir.first_calibration ? Json(ir.first_calibration->visibility()) : Json(nullptr);
    e["error_rate_scan"] =
        ir.scan_visibility ? Json(visibility_to_error_rate(ir.scan_visibility->visibility)) : Json(nullptr);
    e["lock_metrics"] = ir.metrics ? to_json(*ir.metrics) : Json(nullptr);
    e["psd_band_average"] = ir.psd_band_average ? Json(*ir.psd_band_average) : Json(nullptr);
    e["drift_excursion"] = ir.drift_excursion;
    e["detector_variance"] = variance(ir.detector.samples);
    j["interferometers"][to_string(i)] = e;
  }
  j["warnings"] = rec.warnings;
  j["config"] = to_json(rec.config);
  return j;
}

/// Writes the artifacts requested by the record's config into `dir`.
/// Returns the paths written.
inline std::vector<std::filesystem::path> emit(const RunRecord& rec, const std::filesystem::path& dir) {
  detail::ensure_dir(dir);
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& content) {
    const auto p = dir / name;
    detail::write_file(p, content);
    written.push_back(p);
  };
  const auto& c = rec.config;
  if (c.wants("detectors")) put("detectors.csv", detectors_csv(rec));
  if (c.wants("phases")) put("phases.csv", phases_csv(rec));
  if (c.wants("telemetry")) put("telemetry.csv", telemetry_csv(rec));
  if (c.wants("psd"))
    for (Interferometer i : kInterferometers)
      if (rec.at(i).psd) put(std::string("psd_") + to_string(i) + ".csv", psd_csv(*rec.at(i).psd));
  if (c.wants("summary")) put("summary.json", summary_json(rec).dump(2) + "\n");
  return written;
}

/// Sweep layout: one subdirectory per strand count plus a comparison summary.
inline std::vector<std::filesystem::path> emit_sweep(const std::vector<RunRecord>& runs,
                                                     const std::filesystem::path& dir) {
  detail::ensure_dir(dir);
  std::vector<std::filesystem::path> written;
  Json sweep;
  sweep["schema"] = "mcfpll-sweep/1";
  for (const RunRecord& r : runs) {
    const std::string sub = "strands_" + std::to_string(r.config.strand_count);
    auto files = emit(r, dir / sub);
    written.insert(written.end(), files.begin(), files.end());
    Json row{{"strand_count", r.config.strand_count}, {"config_hash", hex(r.config_hash)}};
    for (Interferometer i : kInterferometers) {
      const auto& avg = r.at(i).psd_band_average;
      row["psd_band_average"][to_string(i)] = avg ? Json(*avg) : Json(nullptr);
    }
    sweep["runs"].push_back(row);
  }
  const auto p = dir / "sweep_summary.json";
  detail::write_file(p, sweep.dump(2) + "\n");
  written.push_back(p);
  return written;
}

}  // namespace mcfpll
