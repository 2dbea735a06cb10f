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

#pragma once

// Dispersive readout resonator with Kerr correction, and the reset
// scenarios built on it: passive ring-down, a two-step CLEAR-like drive,
// GRAPE-optimized reset with and without a photon-number penalty, and the
// speed-limit sweep.
//
// Frame: rotating at the drive frequency. Per qubit branch the drift is
//   H0 = (delta + s chi) n + K n^2,   s = +ground_sign (g) / -ground_sign (e),
// and the drive is eps_X (a^+ + a) + eps_Y i(a^+ - a).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rkgrape/controls_filter.hpp"
#include "rkgrape/fit.hpp"
#include "rkgrape/grape.hpp"
#include "rkgrape/optimizer.hpp"
#include "rkgrape/propagation.hpp"

namespace rkgrape {

enum class QubitState { ground, excited };

struct DispersiveModel {
  double chi = 0.0;        // rad/ns
  double kerr = 0.0;       // rad/ns
  double kappa = 0.0;      // rad/ns
  double detuning = 0.0;   // delta = omega_r - omega_d, rad/ns
  Index fock_dim = 40;
  double n_crit = 29.0;
  int ground_sign = +1;    // sign of chi on the ground branch

  /// chi = 2pi 1.3 MHz, K = -2pi 2.1 kHz, kappa = 2pi 1.1 MHz, delta = 0.
  static DispersiveModel reference();

  double branch_detuning(QubitState q) const;
  void validate() const;
};

struct BranchHamiltonians {
  Operator drift;
  std::vector<Operator> controls;  // {H_X, H_Y}
};

BranchHamiltonians build_branch_hamiltonians(const DispersiveModel& model, QubitState q);

/// eps^2 / ((delta +- chi)^2 + (kappa/2)^2), Kerr ignored.
double steady_state_photon_analytic(const DispersiveModel& model, QubitState q, double eps);

enum class CalibrationMethod { analytic, numeric };

std::string to_string(CalibrationMethod m);

struct CalibrationScanPoint {
  double eps = 0.0;
  double photons = 0.0;  // branch-averaged
};

struct CalibrationResult {
  double eps_one_photon = 0.0;  // rad/ns
  CalibrationMethod method = CalibrationMethod::analytic;
  double residual = 0.0;        // |n(eps) - 1| under the method's own model
  std::vector<CalibrationScanPoint> scan;
};

struct CalibrationOptions {
  double settle_kappa_times = 20.0;  // propagate to settle_kappa_times / kappa
  double segment_dt = 10.0;          // ns per constant-drive segment
  IntegratorConfig integrator;
  int max_bracket_doublings = 20;
};

/// Branch-averaged steady photon number at constant X drive eps, from RK
/// propagation of vacuum under the full model.
double settled_photon_number(const DispersiveModel& model, double eps,
                             const CalibrationOptions& opts = {});

CalibrationResult calibrate_one_photon(const DispersiveModel& model, CalibrationMethod method,
                                       const CalibrationOptions& opts = {});

struct GridSpec {
  double pixel_dt = 1.0;       // ns
  double subpixel_dt = 0.1;    // ns
  double bandwidth_3db = 0.0;  // rad/ns; 0 selects 2pi x 100 MHz

  double bandwidth() const;
};

enum class Quadratures { x_only, x_and_y };

struct ResetScenario {
  DispersiveModel model;
  double p_norm = 1.0;
  double horizon = 300.0;  // ns
  GridSpec grid;
  Quadratures quadratures = Quadratures::x_and_y;
  double penalty_beta = 0.0;  // 1/ns; 0 disables
  std::uint64_t seed = 0;
  double eps_one_photon = 0.0;        // rad/ns, from calibration
  double measurement_duration = 0.0;  // ns; 0 selects 5/kappa
  IntegratorConfig integrator;
  OptimizerConfig optimizer;
  /// First trial step of the optimizer as a fraction of the drive amplitude.
  double initial_step_fraction = 0.05;
  int clear_max_evaluations = 200;
  int polyfit_degree = 8;

  double drive_amplitude() const;  // sqrt(p_norm) * eps_one_photon
  double measurement_time() const;
  Index n_pixels() const;
  Index n_controls() const { return quadratures == Quadratures::x_only ? 1 : 2; }
  void validate() const;
};

struct MeasurementStates {
  DensityState ground;
  DensityState excited;
  double end_amplitude = 0.0;  // X pixel value at the end of the pulse
  double leak = 0.0;           // largest top-two-level population seen
  Index n_pixels = 0;
};

MeasurementStates prepare_measurement_state(const ResetScenario& scenario);

OptimizationProblem build_reset_problem(const ResetScenario& scenario,
                                        const MeasurementStates& states, bool with_penalty);

/// Zero pulse with the boundary pixels pinned: X starts at the measurement
/// amplitude, every quadrature ends at zero.
ControlGrid pinned_zero_pulse(const ResetScenario& scenario, const MeasurementStates& states);

struct ClearSearch {
  ControlGrid guess;
  double a1 = 0.0;
  double a2 = 0.0;
  double phi0 = 0.0;
  int evaluations = 0;
};

/// Two-step drive on X from compass search over the two segment amplitudes,
/// with Y seeded uniformly in [-eps/10, eps/10].
ClearSearch clear_initial_guess(const ResetScenario& scenario, const MeasurementStates& states);

enum class ResetMode { passive, clear, grape, grape_penalized };

std::string to_string(ResetMode m);
ResetMode parse_reset_mode(const std::string& s);

struct ResetReport {
  ResetMode mode = ResetMode::passive;
  double eps_one_photon = 0.0;
  double drive_amplitude = 0.0;
  double horizon = 0.0;
  Index n_subpixels = 0;

  std::vector<double> time_ns;  // subpixel boundaries
  std::vector<double> n_ground;
  std::vector<double> n_excited;
  double final_ground = 0.0;
  double final_excited = 0.0;
  double max_ground = 0.0;
  double max_excited = 0.0;
  double initial_ground = 0.0;
  double initial_excited = 0.0;

  double phi = 0.0;
  double phi0 = 0.0;
  double phi_p = 0.0;
  std::vector<double> overlaps;

  ControlGrid pulse;
  SubpixelGrid filtered;
  std::vector<IterationRecord> history;
  int iterations = 0;
  bool stalled = false;
  std::string stop_reason;

  std::int64_t rk_steps = 0;          // forward steps of the reported pulse, both branches
  double rk_steps_per_subpixel = 0.0; // per branch
  double wall_time_s = 0.0;
  double max_leak = 0.0;
  bool truncation_ok = true;

  std::optional<double> polyfit_final_ground;
  std::optional<double> polyfit_final_excited;
};

struct ResetOptions {
  /// Starting pulse for the GRAPE modes. grape_penalized without one runs the
  /// unpenalized optimization first.
  std::optional<ControlGrid> initial;
  ProgressFn progress;
  bool polyfit = false;
};

ResetReport run_reset(const ResetScenario& scenario, ResetMode mode,
                      const ResetOptions& options = {});

/// Report for a given pixel pulse without optimization. Boundary pixels are
/// taken as given.
ResetReport simulate_reset(const ResetScenario& scenario, const ControlGrid& pulse,
                           bool polyfit = false);

struct SweepPoint {
  double p_norm = 0.0;
  double horizon = 0.0;
  double final_ground = 0.0;
  double final_excited = 0.0;
  bool failed = false;
  bool stalled = false;
  std::string error;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<double> p_norms;
  std::vector<double> speed_limit;  // T* per p_norm; NaN if every T failed
  PowerLawFit fit;
  bool fit_valid = false;
  bool monotone = true;
};

/// Branch failure: either final photon number above `threshold`, or the
/// larger over the smaller above `ratio` once the larger reaches `ratio_floor`.
bool reset_failed(double final_ground, double final_excited, double threshold = 1e-2,
                  double ratio = 10.0, double ratio_floor = 1e-3);

SweepResult speed_limit_sweep(const ResetScenario& base, const std::vector<double>& p_norms,
                              const std::vector<double>& horizons, int jobs = 0);

}  // namespace rkgrape
