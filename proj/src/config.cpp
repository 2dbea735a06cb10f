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

#include "rkgrape/config.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <string_view>

#include "rkgrape/error.hpp"
#include "rkgrape/units.hpp"

namespace rkgrape {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 4> kModelKeys{"chi_mhz", "kerr_khz", "kappa_mhz", "fock_dim"};

constexpr std::array<std::string_view, 35> kKnownKeys{
    "chi_mhz", "kerr_khz", "kappa_mhz", "fock_dim", "p_norm", "horizon_ns", "pixel_dt_ns",
    "subpixel_dt_ns", "bandwidth_mhz", "beta_over_T", "quadratures", "seed", "mode",
    "detuning_mhz", "ground_sign", "measurement_ns", "calibration", "eps_one_photon_mhz",
    "max_iters", "optimizer", "tol_grad", "rel_tol", "abs_tol", "integrator", "polyfit",
    "polyfit_degree", "sweep_p_norm", "sweep_horizon_ns", "benchmark_dims", "benchmark_pixels",
    "benchmark_repetitions", "schema_version", "description", "output", "notes"};

template <typename T>
T get(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

template <typename T>
void read(const json& j, const std::string& key, T& out) {
  if (j.contains(key)) out = get<T>(j, key);
}

template <typename T>
void read(const json& j, const std::string& key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = get<T>(j, key);
}

template <typename E>
E parse_enum(const json& j, const std::string& key,
             std::initializer_list<std::pair<std::string_view, E>> table) {
  const auto s = get<std::string>(j, key);
  for (const auto& [name, value] : table)
    if (s == name) return value;
  std::string allowed;
  for (const auto& [name, value] : table) allowed += (allowed.empty() ? "" : "|") + std::string(name);
  throw ConfigError("config key '" + key + "': unknown value '" + s + "' (" + allowed + ")");
}

void positive(double v, const char* key) {
  if (!(v > 0.0)) throw ConfigError(std::string("config key '") + key + "': must be > 0");
}

}  // namespace

std::string to_string(Quadratures q) { return q == Quadratures::x_only ? "x" : "xy"; }

std::string to_string(RkMethod m) {
  return m == RkMethod::classical_rk4 ? "rk4" : "dp45";
}

std::string to_string(QuasiNewton m) { return m == QuasiNewton::bfgs ? "bfgs" : "lbfgs"; }

ScenarioConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end())
      throw ConfigError("config key '" + key + "': unknown key");
  }
  for (const auto key : kModelKeys) {
    if (!j.contains(std::string(key)))
      throw ConfigError("config: missing required key '" + std::string(key) + "'");
  }

  ScenarioConfig c;
  read(j, "chi_mhz", c.chi_mhz);
  read(j, "kerr_khz", c.kerr_khz);
  read(j, "kappa_mhz", c.kappa_mhz);
  read(j, "fock_dim", c.fock_dim);
  read(j, "p_norm", c.p_norm);
  read(j, "horizon_ns", c.horizon_ns);
  read(j, "pixel_dt_ns", c.pixel_dt_ns);
  read(j, "subpixel_dt_ns", c.subpixel_dt_ns);
  read(j, "bandwidth_mhz", c.bandwidth_mhz);
  read(j, "beta_over_T", c.beta_over_T);
  if (j.contains("quadratures"))
    c.quadratures = parse_enum<Quadratures>(j, "quadratures",
                                            {{"x", Quadratures::x_only}, {"xy", Quadratures::x_and_y}});
  read(j, "seed", c.seed);
  if (j.contains("mode")) {
    try {
      c.mode = parse_reset_mode(get<std::string>(j, "mode"));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config key 'mode': ") + e.what());
    }
  }
  read(j, "detuning_mhz", c.detuning_mhz);
  read(j, "ground_sign", c.ground_sign);
  read(j, "measurement_ns", c.measurement_ns);
  if (j.contains("calibration"))
    c.calibration = parse_enum<CalibrationMethod>(
        j, "calibration",
        {{"numeric", CalibrationMethod::numeric}, {"analytic", CalibrationMethod::analytic}});
  read(j, "eps_one_photon_mhz", c.eps_one_photon_mhz);
  read(j, "max_iters", c.max_iters);
  if (j.contains("optimizer"))
    c.optimizer = parse_enum<QuasiNewton>(j, "optimizer",
                                          {{"bfgs", QuasiNewton::bfgs}, {"lbfgs", QuasiNewton::lbfgs}});
  read(j, "tol_grad", c.tol_grad);
  read(j, "rel_tol", c.rel_tol);
  read(j, "abs_tol", c.abs_tol);
  if (j.contains("integrator"))
    c.integrator = parse_enum<RkMethod>(
        j, "integrator", {{"dp45", RkMethod::dormand_prince45}, {"rk4", RkMethod::classical_rk4}});
  read(j, "polyfit", c.polyfit);
  read(j, "polyfit_degree", c.polyfit_degree);
  read(j, "sweep_p_norm", c.sweep_p_norm);
  read(j, "sweep_horizon_ns", c.sweep_horizon_ns);
  read(j, "benchmark_dims", c.benchmark_dims);
  read(j, "benchmark_pixels", c.benchmark_pixels);
  read(j, "benchmark_repetitions", c.benchmark_repetitions);

  positive(c.kappa_mhz, "kappa_mhz");
  if (c.fock_dim < 2) throw ConfigError("config key 'fock_dim': must be >= 2");
  positive(c.pixel_dt_ns, "pixel_dt_ns");
  positive(c.subpixel_dt_ns, "subpixel_dt_ns");
  positive(c.bandwidth_mhz, "bandwidth_mhz");
  if (c.beta_over_T < 0.0) throw ConfigError("config key 'beta_over_T': must be >= 0");
  if (c.p_norm && *c.p_norm < 0.0) throw ConfigError("config key 'p_norm': must be >= 0");
  if (c.horizon_ns) positive(*c.horizon_ns, "horizon_ns");
  if (c.ground_sign != 1 && c.ground_sign != -1)
    throw ConfigError("config key 'ground_sign': must be +1 or -1");
  if (c.max_iters < 1) throw ConfigError("config key 'max_iters': must be >= 1");
  if (c.polyfit_degree < 0) throw ConfigError("config key 'polyfit_degree': must be >= 0");
  if (c.eps_one_photon_mhz) positive(*c.eps_one_photon_mhz, "eps_one_photon_mhz");
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["chi_mhz"] = c.chi_mhz;
  j["kerr_khz"] = c.kerr_khz;
  j["kappa_mhz"] = c.kappa_mhz;
  j["fock_dim"] = c.fock_dim;
  if (c.p_norm) j["p_norm"] = *c.p_norm;
  if (c.horizon_ns) j["horizon_ns"] = *c.horizon_ns;
  j["pixel_dt_ns"] = c.pixel_dt_ns;
  j["subpixel_dt_ns"] = c.subpixel_dt_ns;
  j["bandwidth_mhz"] = c.bandwidth_mhz;
  j["beta_over_T"] = c.beta_over_T;
  j["quadratures"] = to_string(c.quadratures);
  j["seed"] = c.seed;
  j["mode"] = to_string(c.mode);
  j["detuning_mhz"] = c.detuning_mhz;
  j["ground_sign"] = c.ground_sign;
  j["measurement_ns"] = c.measurement_ns;
  j["calibration"] = c.calibration == CalibrationMethod::numeric ? "numeric" : "analytic";
  if (c.eps_one_photon_mhz) j["eps_one_photon_mhz"] = *c.eps_one_photon_mhz;
  j["max_iters"] = c.max_iters;
  j["optimizer"] = to_string(c.optimizer);
  j["tol_grad"] = c.tol_grad;
  j["rel_tol"] = c.rel_tol;
  j["abs_tol"] = c.abs_tol;
  j["integrator"] = to_string(c.integrator);
  j["polyfit"] = c.polyfit;
  j["polyfit_degree"] = c.polyfit_degree;
  j["sweep_p_norm"] = c.sweep_p_norm;
  j["sweep_horizon_ns"] = c.sweep_horizon_ns;
  j["benchmark_dims"] = c.benchmark_dims;
  j["benchmark_pixels"] = c.benchmark_pixels;
  j["benchmark_repetitions"] = c.benchmark_repetitions;
  return j;
}

void require_for_command(const ScenarioConfig& cfg, const std::string& command) {
  if (command == "simulate" || command == "optimize") {
    if (!cfg.p_norm) throw ConfigError("config: missing required key 'p_norm' for " + command);
    if (!cfg.horizon_ns)
      throw ConfigError("config: missing required key 'horizon_ns' for " + command);
  }
  if (command == "sweep" && (cfg.sweep_p_norm.empty() || cfg.sweep_horizon_ns.empty()))
    throw ConfigError("config: 'sweep_p_norm' and 'sweep_horizon_ns' must be non-empty");
  if (command == "benchmark" && cfg.benchmark_dims.empty())
    throw ConfigError("config: 'benchmark_dims' must be non-empty");
}

void apply_quick(ScenarioConfig& cfg) {
  cfg.fock_dim = 20;
  cfg.subpixel_dt_ns = 0.5;
  cfg.max_iters = std::min(cfg.max_iters, 50);
}

DispersiveModel to_model(const ScenarioConfig& c) {
  DispersiveModel m;
  m.chi = units::from_mhz(c.chi_mhz);
  m.kerr = units::from_khz(c.kerr_khz);
  m.kappa = units::from_mhz(c.kappa_mhz);
  m.detuning = units::from_mhz(c.detuning_mhz);
  m.fock_dim = c.fock_dim;
  m.ground_sign = c.ground_sign;
  return m;
}

IntegratorConfig to_integrator(const ScenarioConfig& c) {
  IntegratorConfig ic;
  ic.method = c.integrator;
  ic.rel_tol = c.rel_tol;
  ic.abs_tol = c.abs_tol;
  return ic;
}

ResetScenario to_scenario(const ScenarioConfig& c, double eps_one_photon) {
  ResetScenario s;
  s.model = to_model(c);
  s.p_norm = c.p_norm.value_or(1.0);
  s.horizon = c.horizon_ns.value_or(0.0);
  s.grid.pixel_dt = c.pixel_dt_ns;
  s.grid.subpixel_dt = c.subpixel_dt_ns;
  s.grid.bandwidth_3db = units::from_mhz(c.bandwidth_mhz);
  s.quadratures = c.quadratures;
  s.penalty_beta = s.horizon > 0.0 ? c.beta_over_T / s.horizon : 0.0;
  s.seed = c.seed;
  s.eps_one_photon = eps_one_photon;
  s.measurement_duration = c.measurement_ns;
  s.integrator = to_integrator(c);
  s.optimizer.method = c.optimizer;
  s.optimizer.max_iters = c.max_iters;
  s.optimizer.tol_grad = c.tol_grad;
  s.optimizer.seed = c.seed;
  s.polyfit_degree = c.polyfit_degree;
  return s;
}

}  // namespace rkgrape
