// mcfpll: run multicore-fibre phase-lock scenarios from the command line.
//
//   mcfpll run <config> [--seed N] [--out DIR]
//   mcfpll sweep <config> [--seed N] [--out DIR]
//   mcfpll validate <config>
//   mcfpll presets [NAME]
//
// <config> is a JSON scenario file or "preset:<name>". The output directory
// defaults to $MCFPLL_OUT_DIR, then ./mcfpll-out.
//
// Exit codes: 0 ok, 1 usage, 2 validation, 3 simulation, 4 I/O.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mcfpll/mcfpll.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kValidation = 2, kSimulation = 3, kIo = 4 };

mcfpll::ScenarioConfig load(const std::string& ref, std::optional<std::uint64_t> seed) {
  mcfpll::ScenarioConfig cfg;
  if (ref.rfind("preset:", 0) == 0)
    cfg = mcfpll::preset(ref.substr(7));
  else
    cfg = mcfpll::load_config(ref);
  if (seed) cfg.seed = *seed;
  mcfpll::validate_or_throw(cfg);
  return cfg;
}

std::string default_out_dir() {
  if (const char* env = std::getenv("MCFPLL_OUT_DIR"); env && *env) return env;
  return "mcfpll-out";
}

void print_run(const mcfpll::RunRecord& r) {
  std::printf("config %s  strands=%d  seed=%llu  runtime %.2f s\n", mcfpll::hex(r.config_hash).c_str(),
              r.config.strand_count, static_cast<unsigned long long>(r.config.seed), r.runtime_seconds);
  for (mcfpll::Interferometer i : mcfpll::kInterferometers) {
    const auto& ir = r.at(i);
    std::printf("  %-8s", mcfpll::to_string(i));
    if (ir.scan_visibility) std::printf("  V_scan=%.4f", ir.scan_visibility->visibility);
    if (ir.first_calibration) std::printf("  V_cal=%.4f", ir.first_calibration->visibility());
    if (ir.metrics)
      std::printf("  hold=%.3f  rms=%.4f rad  relocks=%llu", ir.metrics->time_in_hold_fraction,
                  ir.metrics->residual_rms, static_cast<unsigned long long>(ir.metrics->relock_count));
    if (ir.psd_band_average) std::printf("  psd_band=%.4g", *ir.psd_band_average);
    std::printf("  drift_excursion=%.3f rad\n", ir.drift_excursion);
  }
  for (const auto& w : r.warnings) std::printf("  warning: %s\n", w.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multicore-fibre interferometer phase-lock simulator"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string out_dir = default_out_dir();
  std::string config_ref;
  std::string preset_name;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_ref, "Scenario JSON file or preset:<name>")->required();
    sub->add_option("--seed", seed, "Override the scenario seed");
    sub->add_option("--out", out_dir, "Output directory (default $MCFPLL_OUT_DIR or ./mcfpll-out)");
  };
  auto* run = app.add_subcommand("run", "Run one scenario and write its artifacts");
  add_common(run);
  auto* sweep = app.add_subcommand("sweep", "Run the scenario for strand counts 1-4");
  add_common(sweep);
  auto* validate = app.add_subcommand("validate", "Check a scenario without running it");
  validate->add_option("config", config_ref, "Scenario JSON file or preset:<name>")->required();
  validate->add_option("--seed", seed, "Override the scenario seed");
  auto* presets = app.add_subcommand("presets", "List presets, or print one as JSON");
  presets->add_option("name", preset_name, "Preset to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*presets) {
      if (preset_name.empty()) {
        for (const auto& [name, src] : mcfpll::preset_sources()) {
          const auto j = mcfpll::Json::parse(src);
          std::printf("%-16s %s\n", name.c_str(), j.value("description", "").c_str());
        }
      } else {
        std::cout << mcfpll::to_json(mcfpll::preset(preset_name)).dump(2) << '\n';
      }
      return kOk;
    }
    const mcfpll::ScenarioConfig cfg = load(config_ref, seed);
    if (*validate) {
      std::printf("ok  %s\n", mcfpll::hex(mcfpll::config_hash(cfg)).c_str());
      return kOk;
    }
    if (*run) {
      const auto rec = mcfpll::run_scenario(cfg);
      print_run(rec);
      for (const auto& p : mcfpll::emit(rec, out_dir)) std::printf("wrote %s\n", p.string().c_str());
      return kOk;
    }
    if (*sweep) {
      const auto recs = mcfpll::sweep_strands(cfg);
      for (const auto& r : recs) print_run(r);
      for (const auto& p : mcfpll::emit_sweep(recs, out_dir)) std::printf("wrote %s\n", p.string().c_str());
      return kOk;
    }
  } catch (const mcfpll::ValidationError& e) {
    std::fprintf(stderr, "invalid scenario:\n");
    for (const auto& issue : e.issues()) std::fprintf(stderr, "  %s\n", issue.c_str());
    return kValidation;
  } catch (const mcfpll::Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    switch (e.kind()) {
      case mcfpll::ErrorKind::io: return kIo;
      case mcfpll::ErrorKind::validation: return kValidation;
      default: return kSimulation;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kSimulation;
  }
  return kUsage;
}
