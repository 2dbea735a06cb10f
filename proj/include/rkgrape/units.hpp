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

#include <numbers>

// Internal units: ns and rad/ns. User-facing frequencies are f = omega/2pi.
namespace rkgrape::units {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double from_mhz(double f_mhz) { return kTwoPi * f_mhz * 1e-3; }
constexpr double from_khz(double f_khz) { return kTwoPi * f_khz * 1e-6; }
constexpr double to_mhz(double omega) { return omega / kTwoPi * 1e3; }
constexpr double to_khz(double omega) { return omega / kTwoPi * 1e6; }

}  // namespace rkgrape::units
