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

#include "rkgrape/io.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/Core>

#include "rkgrape/config.hpp"
#include "rkgrape/error.hpp"
#include "rkgrape/units.hpp"

#ifndef RKGRAPE_VERSION
#define RKGRAPE_VERSION "0.0.0"
#endif

namespace rkgrape {

using nlohmann::json;

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string library_version() { return RKGRAPE_VERSION; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json to_json(const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["config_path"] = m.config_path;
  j["output_dir"] = m.output_dir;
  j["seed"] = m.seed;
  j["quick"] = m.quick;
  j["versions"] = {{"rkgrape", library_version()},
                   {"config_schema", kConfigSchemaVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  j["timestamps"] = {{"started_utc", m.started_utc}, {"finished_utc", m.finished_utc}};
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  write_text(dir / "manifest.json", to_json(m).dump(2) + "\n");
}

void write_photon_csv(std::ostream& os, const ResetReport& r) {
  os << "t_ns,n_ground,n_excited\n" << std::setprecision(17);
  for (std::size_t k = 0; k < r.time_ns.size(); ++k)
    os << r.time_ns[k] << ',' << r.n_ground[k] << ',' << r.n_excited[k] << '\n';
}

json to_json(const ResetReport& r) {
  json j;
  j["mode"] = to_string(r.mode);
  j["eps_one_photon_mhz"] = units::to_mhz(r.eps_one_photon);
  j["drive_amplitude_mhz"] = units::to_mhz(r.drive_amplitude);
  j["horizon_ns"] = r.horizon;
  j["n_subpixels"] = r.n_subpixels;
  j["initial_photons"] = {{"ground", r.initial_ground}, {"excited", r.initial_excited}};
  j["final_photons"] = {{"ground", r.final_ground}, {"excited", r.final_excited}};
  j["max_photons"] = {{"ground", r.max_ground}, {"excited", r.max_excited}};
  j["phi"] = r.phi;
  j["phi0"] = r.phi0;
  j["phi_p"] = r.phi_p;
  j["overlaps"] = r.overlaps;
  j["iterations"] = r.iterations;
  j["stalled"] = r.stalled;
  j["stop_reason"] = r.stop_reason;
  j["rk_steps"] = r.rk_steps;
  j["rk_steps_per_subpixel"] = r.rk_steps_per_subpixel;
  j["max_truncation_leak"] = r.max_leak;
  j["truncation_ok"] = r.truncation_ok;
  if (r.polyfit_final_ground)
    j["polyfit_final_photons"] = {{"ground", *r.polyfit_final_ground},
                                  {"excited", *r.polyfit_final_excited}};
  j["timing"] = {{"wall_time_s", r.wall_time_s}};
  return j;
}

json to_json(const CalibrationResult& c) {
  json j;
  j["method"] = to_string(c.method);
  j["eps_one_photon_mhz"] = units::to_mhz(c.eps_one_photon);
  j["eps_one_photon_rad_per_ns"] = c.eps_one_photon;
  j["residual"] = c.residual;
  json scan = json::array();
  for (const auto& p : c.scan) scan.push_back({{"eps_mhz", units::to_mhz(p.eps)}, {"photons", p.photons}});
  j["scan"] = scan;
  return j;
}

json to_json(const SweepResult& s) {
  json j;
  json pts = json::array();
  for (const auto& p : s.points) {
    json e = {{"p_norm", p.p_norm},
              {"horizon_ns", p.horizon},
              {"final_ground", p.final_ground},
              {"final_excited", p.final_excited},
              {"failed", p.failed},
              {"stalled", p.stalled}};
    if (!p.error.empty()) e["error"] = p.error;
    pts.push_back(e);
  }
  j["points"] = pts;
  json limits = json::array();
  for (std::size_t i = 0; i < s.p_norms.size(); ++i)
    limits.push_back({{"p_norm", s.p_norms[i]}, {"t_star_ns", finite_or_null(s.speed_limit[i])}});
  j["speed_limit"] = limits;
  j["fit_valid"] = s.fit_valid;
  if (s.fit_valid) {
    j["alpha"] = s.fit.exponent;
    j["alpha_stderr"] = finite_or_null(s.fit.exponent_stderr);
    j["prefactor_ns"] = s.fit.prefactor;
  }
  j["monotone"] = s.monotone;
  return j;
}

json to_json(const BenchmarkResult& b) {
  json j;
  json rows = json::array();
  for (const auto& r : b.rows)
    rows.push_back({{"d", r.d},
                    {"t_expm_ms", r.t_expm_ms},
                    {"t_rk_ms", r.t_rk_ms},
                    {"n_rk", r.n_rk},
                    {"trace_dist", r.trace_dist}});
  j["rows"] = rows;
  if (b.rows.size() >= 2) {
    j["expm_exponent"] = b.expm_fit.exponent;
    j["expm_exponent_stderr"] = finite_or_null(b.expm_fit.exponent_stderr);
    j["rk_exponent"] = b.rk_fit.exponent;
    j["rk_exponent_stderr"] = finite_or_null(b.rk_fit.exponent_stderr);
  }
  return j;
}

void write_sweep_csv(std::ostream& os, const SweepResult& s) {
  os << "p_norm,horizon_ns,final_ground,final_excited,failed,stalled\n" << std::setprecision(17);
  for (const auto& p : s.points)
    os << p.p_norm << ',' << p.horizon << ',' << p.final_ground << ',' << p.final_excited << ','
       << (p.failed ? 1 : 0) << ',' << (p.stalled ? 1 : 0) << '\n';
}

}  // namespace rkgrape
