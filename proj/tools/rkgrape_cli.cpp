// Copyright 2026 The rkgrape Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Batch front-end: calibrate, simulate, optimize, sweep, benchmark.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rkgrape/config.hpp"
#include "rkgrape/cqed.hpp"
#include "rkgrape/error.hpp"
#include "rkgrape/io.hpp"
#include "rkgrape/liouville.hpp"
#include "rkgrape/units.hpp"

namespace fs = std::filesystem;
using namespace rkgrape;

namespace {

enum Exit : int { kOk = 0, kConfig = 1, kCalibration = 2, kStalled = 3, kIntegration = 4 };

constexpr double kReferenceEpsMhz = 1.595;

constexpr const char* kUnitsTable = R"(Units (config keys and outputs):
  key                 unit        meaning
  chi_mhz             MHz         dispersive shift chi/2pi
  kerr_khz            kHz         Kerr coefficient K/2pi
  kappa_mhz           MHz         cavity decay rate kappa/2pi
  detuning_mhz        MHz         cavity-drive detuning delta/2pi
  bandwidth_mhz       MHz         filter 3 dB bandwidth omega_B/2pi
  eps_one_photon_mhz  MHz         one-photon drive amplitude/2pi
  horizon_ns          ns          reset duration T
  pixel_dt_ns         ns          control pixel length
  subpixel_dt_ns      ns          filtered-pulse subpixel length
  measurement_ns      ns          measurement pulse length (0: 5/kappa)
  p_norm              1           drive power over one-photon power
  beta_over_T         1           penalty weight beta times T
  Pulse CSV amplitudes are in MHz (amplitude/2pi); photon numbers are bare.

Exit codes: 0 ok, 1 config error, 2 calibration error, 3 optimizer stalled,
            4 integration failure.)";

struct Common {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  int jobs = 0;
  bool quick = false;
  std::string pulse_path;
};

ScenarioConfig load(const Common& c, const std::string& command) {
  ScenarioConfig cfg = load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.quick) apply_quick(cfg);
  require_for_command(cfg, command);
  return cfg;
}

RunManifest start_manifest(const Common& c, const std::string& command, std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.config_path = c.config_path;
  m.output_dir = c.out_dir;
  m.seed = seed;
  m.quick = c.quick;
  m.started_utc = utc_timestamp();
  return m;
}

void finish_manifest(const fs::path& dir, RunManifest m) {
  m.finished_utc = utc_timestamp();
  write_manifest(dir, m);
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

double calibrated_eps(const ScenarioConfig& cfg, const fs::path& dir) {
  if (cfg.eps_one_photon_mhz) return units::from_mhz(*cfg.eps_one_photon_mhz);
  std::cerr << "calibrating one-photon drive (" << to_string(cfg.calibration) << ")\n";
  CalibrationOptions opts;
  opts.integrator = to_integrator(cfg);
  const auto cal = calibrate_one_photon(to_model(cfg), cfg.calibration, opts);
  write_text(dir / "calibration.json", to_json(cal).dump(2) + "\n");
  return cal.eps_one_photon;
}

void print_summary(const ResetReport& r) {
  std::cout << std::setprecision(6) << "mode " << to_string(r.mode) << ": final <n> g=" << r.final_ground
            << " e=" << r.final_excited << ", max <n> g=" << r.max_ground << " e=" << r.max_excited
            << ", phi0=" << r.phi0 << ", n_RK/M=" << r.rk_steps_per_subpixel
            << ", wall=" << r.wall_time_s << " s\n";
  if (!r.truncation_ok)
    std::cerr << "warning: truncation leak " << r.max_leak << " exceeds 1e-6; raise fock_dim\n";
}

void write_reset_outputs(const fs::path& dir, const ResetReport& r) {
  write_text(dir / "report.json", to_json(r).dump(2) + "\n");
  write_text(dir / "photon_vs_time.csv", render([&](std::ostream& os) { write_photon_csv(os, r); }));
  if (r.mode == ResetMode::passive && r.history.empty() && r.pulse.values.isZero(0.0)) return;
  write_text(dir / "pulse.csv", render([&](std::ostream& os) { write_pixel_csv(os, r.pulse); }));
  write_text(dir / "pulse_filtered.csv",
             render([&](std::ostream& os) { write_subpixel_csv(os, r.filtered); }));
  if (!r.history.empty())
    write_text(dir / "history.csv", render([&](std::ostream& os) { write_history_csv(os, r.history); }));
}

int cmd_calibrate(const Common& c) {
  const ScenarioConfig cfg = load(c, "calibrate");
  const fs::path dir = c.out_dir;
  auto manifest = start_manifest(c, "calibrate", cfg.seed);
  const DispersiveModel model = to_model(cfg);
  CalibrationOptions opts;
  opts.integrator = to_integrator(cfg);
  const auto analytic = calibrate_one_photon(model, CalibrationMethod::analytic, opts);
  const auto numeric = calibrate_one_photon(model, CalibrationMethod::numeric, opts);
  const double ref = units::from_mhz(kReferenceEpsMhz);
  nlohmann::json j;
  j["analytic"] = to_json(analytic);
  j["numeric"] = to_json(numeric);
  j["numeric_vs_analytic_rel"] =
      std::abs(numeric.eps_one_photon - analytic.eps_one_photon) / analytic.eps_one_photon;
  j["reference_eps_mhz"] = kReferenceEpsMhz;
  j["deviation_vs_reference_rel"] = {{"analytic", (analytic.eps_one_photon - ref) / ref},
                                     {"numeric", (numeric.eps_one_photon - ref) / ref}};
  write_text(dir / "calibration.json", j.dump(2) + "\n");
  finish_manifest(dir, manifest);
  std::cout << std::setprecision(8) << "eps_1ph/2pi analytic " << units::to_mhz(analytic.eps_one_photon)
            << " MHz, numeric " << units::to_mhz(numeric.eps_one_photon) << " MHz (residual "
            << numeric.residual << "), reference " << kReferenceEpsMhz << " MHz\n";
  return kOk;
}

int cmd_simulate(const Common& c) {
  const ScenarioConfig cfg = load(c, "simulate");
  const fs::path dir = c.out_dir;
  auto manifest = start_manifest(c, "simulate", cfg.seed);
  const ResetScenario scenario = to_scenario(cfg, calibrated_eps(cfg, dir));
  ResetReport r;
  if (!c.pulse_path.empty()) {
    std::ifstream in(c.pulse_path);
    if (!in) throw ConfigError("cannot open pulse file '" + c.pulse_path + "'");
    ControlGrid pulse = read_pixel_csv(in);
    r = simulate_reset(scenario, pulse, cfg.polyfit);
  } else if (cfg.mode == ResetMode::passive || cfg.mode == ResetMode::clear) {
    r = run_reset(scenario, cfg.mode);
  } else {
    throw ConfigError("simulate: mode '" + to_string(cfg.mode) +
                      "' needs --pulse; use optimize to run GRAPE");
  }
  write_reset_outputs(dir, r);
  finish_manifest(dir, manifest);
  print_summary(r);
  return kOk;
}

int cmd_optimize(const Common& c) {
  const ScenarioConfig cfg = load(c, "optimize");
  const fs::path dir = c.out_dir;
  auto manifest = start_manifest(c, "optimize", cfg.seed);
  const ResetScenario scenario = to_scenario(cfg, calibrated_eps(cfg, dir));
  ResetOptions opts;
  opts.polyfit = cfg.polyfit;
  if (!c.pulse_path.empty()) {
    std::ifstream in(c.pulse_path);
    if (!in) throw ConfigError("cannot open pulse file '" + c.pulse_path + "'");
    ControlGrid init = read_pixel_csv(in);
    init.pinned.assign(static_cast<std::size_t>(init.n_controls()), PinMask{true, true});
    opts.initial = init;
  }
  opts.progress = [](const IterationRecord& rec) {
    std::cerr << std::setprecision(10) << "iter " << rec.iter << " phi " << rec.phi << " phi0 "
              << rec.phi0 << " |g| " << rec.grad_inf_norm << '\n';
  };
  const ResetReport r = run_reset(scenario, cfg.mode, opts);
  write_reset_outputs(dir, r);
  finish_manifest(dir, manifest);
  print_summary(r);
  if (r.stalled) {
    std::cerr << "optimizer stalled: " << r.stop_reason << '\n';
    return kStalled;
  }
  return kOk;
}

int cmd_sweep(const Common& c) {
  const ScenarioConfig cfg = load(c, "sweep");
  const fs::path dir = c.out_dir;
  auto manifest = start_manifest(c, "sweep", cfg.seed);
  ScenarioConfig base_cfg = cfg;
  base_cfg.beta_over_T = 0.0;
  if (!base_cfg.horizon_ns) base_cfg.horizon_ns = cfg.sweep_horizon_ns.front();
  const ResetScenario base = to_scenario(base_cfg, calibrated_eps(cfg, dir));
  const SweepResult s = speed_limit_sweep(base, cfg.sweep_p_norm, cfg.sweep_horizon_ns, c.jobs);
  write_text(dir / "sweep.csv", render([&](std::ostream& os) { write_sweep_csv(os, s); }));
  write_text(dir / "sweep.json", to_json(s).dump(2) + "\n");
  finish_manifest(dir, manifest);
  for (std::size_t i = 0; i < s.p_norms.size(); ++i)
    std::cout << "P_norm " << s.p_norms[i] << ": T* = " << s.speed_limit[i] << " ns\n";
  if (s.fit_valid)
    std::cout << "alpha = " << s.fit.exponent << " +- " << s.fit.exponent_stderr << '\n';
  if (!s.monotone) std::cerr << "note: T* is not monotone in P_norm\n";
  return kOk;
}

int cmd_benchmark(const Common& c) {
  const ScenarioConfig cfg = load(c, "benchmark");
  const fs::path dir = c.out_dir;
  auto manifest = start_manifest(c, "benchmark", cfg.seed);
  BenchmarkConfig bc;
  bc.dims = cfg.benchmark_dims;
  bc.n_pixels = cfg.benchmark_pixels;
  bc.repetitions = cfg.benchmark_repetitions;
  bc.integrator = to_integrator(cfg);
  const BenchmarkResult b = benchmark_scaling(bc);
  write_text(dir / "benchmark.csv", render([&](std::ostream& os) { write_benchmark_csv(os, b); }));
  write_text(dir / "benchmark.json", to_json(b).dump(2) + "\n");
  finish_manifest(dir, manifest);
  write_benchmark_csv(std::cout, b);
  if (b.rows.size() >= 2)
    std::cout << "expm exponent " << b.expm_fit.exponent << ", rk exponent " << b.rk_fit.exponent
              << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rkgrape: open-system GRAPE with Runge-Kutta propagation"};
  app.footer(kUnitsTable);
  app.require_subcommand(1);

  Common common;
  const auto add_common = [&](CLI::App* sub, bool pulse) {
    sub->add_option("--config", common.config_path, "Scenario config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", common.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", common.seed, "Override the config seed");
    sub->add_option("--jobs", common.jobs, "Worker threads for sweeps (0: all)")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("--quick", common.quick, "fock_dim 20, subpixel 0.5 ns, at most 50 iterations");
    if (pulse) sub->add_option("--pulse", common.pulse_path, "Pixel pulse CSV (MHz)");
  };

  int (*handler)(const Common&) = nullptr;
  const auto sub = [&](const char* name, const char* help, int (*fn)(const Common&), bool pulse) {
    CLI::App* s = app.add_subcommand(name, help);
    add_common(s, pulse);
    s->footer(kUnitsTable);
    s->callback([&handler, fn] { handler = fn; });
  };
  sub("calibrate", "Find the one-photon drive amplitude (analytic and numeric)", cmd_calibrate, false);
  sub("simulate", "Propagate a passive/clear reset or a given pulse", cmd_simulate, true);
  sub("optimize", "Run the configured reset mode (GRAPE modes optimize)", cmd_optimize, true);
  sub("sweep", "Speed-limit sweep over P_norm x T with power-law fit", cmd_sweep, false);
  sub("benchmark", "Liouville expm vs Runge-Kutta scaling benchmark", cmd_benchmark, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    return handler(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << '\n';
    return kCalibration;
  } catch (const IntegrationFailure& e) {
    std::cerr << "integration failure at subpixel " << e.subpixel() << ": " << e.what() << '\n';
    return kIntegration;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
}
