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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "rkgrape/cqed.hpp"
#include "rkgrape/liouville.hpp"

namespace rkgrape {

std::string library_version();

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string output_dir;
  std::uint64_t seed = 0;
  bool quick = false;
  std::string started_utc;
  std::string finished_utc;
};

std::string utc_timestamp();

nlohmann::json to_json(const RunManifest& m);
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

/// `t_ns,n_ground,n_excited`
void write_photon_csv(std::ostream& os, const ResetReport& r);

nlohmann::json to_json(const ResetReport& r);
nlohmann::json to_json(const CalibrationResult& c);
nlohmann::json to_json(const SweepResult& s);
nlohmann::json to_json(const BenchmarkResult& b);

/// `p_norm,horizon_ns,final_ground,final_excited,failed,stalled`
void write_sweep_csv(std::ostream& os, const SweepResult& s);

}  // namespace rkgrape
