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

// Scenario configuration files (JSON). Frequencies are given as f = omega/2pi
// in MHz (kHz for the Kerr term), times in ns.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rkgrape/cqed.hpp"
#include "rkgrape/liouville.hpp"

namespace rkgrape {

inline constexpr const char* kConfigSchemaVersion = "1";

struct ScenarioConfig {
  // Model; always required.
  double chi_mhz = 0.0;
  double kerr_khz = 0.0;
  double kappa_mhz = 0.0;
  Index fock_dim = 0;
  // Scenario; required by simulate/optimize.
  std::optional<double> p_norm;
  std::optional<double> horizon_ns;

  double pixel_dt_ns = 1.0;
  double subpixel_dt_ns = 0.1;
  double bandwidth_mhz = 100.0;
  double beta_over_T = 0.0;
  Quadratures quadratures = Quadratures::x_and_y;
  std::uint64_t seed = 0;
  ResetMode mode = ResetMode::grape;

  double detuning_mhz = 0.0;
  int ground_sign = 1;
  double measurement_ns = 0.0;  // 0 selects 5/kappa
  CalibrationMethod calibration = CalibrationMethod::numeric;
  std::optional<double> eps_one_photon_mhz;  // skips calibration when set

  int max_iters = 500;
  QuasiNewton optimizer = QuasiNewton::bfgs;
  double tol_grad = 1e-7;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  RkMethod integrator = RkMethod::dormand_prince45;
  bool polyfit = false;
  int polyfit_degree = 8;

  std::vector<double> sweep_p_norm{2, 4, 6, 8};
  std::vector<double> sweep_horizon_ns{40, 55, 70, 90, 110, 150};
  std::vector<Index> benchmark_dims{8, 12, 16, 24, 32, 48};
  Index benchmark_pixels = 100;
  int benchmark_repetitions = 3;
};

/// Throws ConfigError naming the offending key.
ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ScenarioConfig& cfg);

/// Throws ConfigError unless the keys needed by `command` are present.
void require_for_command(const ScenarioConfig& cfg, const std::string& command);

/// fock_dim 20, subpixel 0.5 ns, at most 50 optimizer iterations.
void apply_quick(ScenarioConfig& cfg);

DispersiveModel to_model(const ScenarioConfig& cfg);
IntegratorConfig to_integrator(const ScenarioConfig& cfg);
/// eps_one_photon in rad/ns.
ResetScenario to_scenario(const ScenarioConfig& cfg, double eps_one_photon);

std::string to_string(Quadratures q);
std::string to_string(RkMethod m);
std::string to_string(QuasiNewton m);

}  // namespace rkgrape
