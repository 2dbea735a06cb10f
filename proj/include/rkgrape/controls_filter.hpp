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

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rkgrape/operator_core.hpp"

namespace rkgrape {

/// Which boundary pixels of one control are held fixed by the optimizer.
struct PinMask {
  bool first = false;
  bool last = false;
};

/// Piecewise-constant controls u_k(j): N pixels of duration pixel_dt, one
/// column per control.
struct ControlGrid {
  double pixel_dt = 0.0;
  RealMatrix values;  // N x R, rad/ns
  std::vector<PinMask> pinned;  // one per control, may be empty (nothing pinned)

  Index n_pixels() const { return values.rows(); }
  Index n_controls() const { return values.cols(); }
  double duration() const { return pixel_dt * static_cast<double>(n_pixels()); }
  bool is_pinned(Index pixel, Index control) const;
  void validate() const;
};

/// Filtered amplitudes s_k(n) on M subpixels.
struct SubpixelGrid {
  double subpixel_dt = 0.0;
  RealMatrix values;  // M x R, rad/ns

  Index n_subpixels() const { return values.rows(); }
};

/// Banded pixel-to-subpixel map shared by all controls. Pulses are taken
/// to be zero outside [0, T].
struct TransferMatrix {
  RealMatrix entries;  // M x N
  double pixel_dt = 0.0;
  double subpixel_dt = 0.0;
  double bandwidth_3db = 0.0;        // omega_B, rad/ns (0 for the unfiltered map)
  double reference_bandwidth = 0.0;  // omega_0, rad/ns

  Index n_pixels() const { return entries.cols(); }
  Index n_subpixels() const { return entries.rows(); }
};

/// omega_B / omega_0 = sqrt(-ln(1/sqrt 2)) for F(w) = exp(-w^2/omega_0^2).
double gaussian_bandwidth_ratio();

/// Subpixels per pixel; throws GridMismatchError unless pixel_dt/subpixel_dt
/// is an integer >= 1 (to 1e-9 relative).
Index subpixels_per_pixel(double pixel_dt, double subpixel_dt);

/// T(n, j) = [erf(w0((n-1)dt - (j-1)Dt)/2) - erf(w0((n-1)dt - j Dt)/2)] / 2,
/// 1-based n and j, sampled at the start of each subpixel.
TransferMatrix build_gaussian_transfer(Index n_pixels, double pixel_dt, double subpixel_dt,
                                       double bandwidth_3db);

/// Unfiltered map: each subpixel copies the pixel containing it.
TransferMatrix build_piecewise_transfer(Index n_pixels, double pixel_dt, double subpixel_dt);

SubpixelGrid apply_filter(const TransferMatrix& tm, const ControlGrid& controls);

/// dPhi/du_k(j) = sum_n T(n, j) dPhi/ds_k(n); pinned entries are zeroed.
RealMatrix backprop_gradient(const TransferMatrix& tm, const RealMatrix& subpixel_grad,
                             std::span<const PinMask> pinned = {});

// Pulse files: CSV, header `t_ns,u_1,...,u_R` (pixels) or `t_ns,s_1,...`
// (subpixels), one row per segment start time, amplitudes in MHz (value/2pi).
void write_pixel_csv(std::ostream& os, const ControlGrid& grid);
void write_subpixel_csv(std::ostream& os, const SubpixelGrid& grid);
ControlGrid read_pixel_csv(std::istream& is);

}  // namespace rkgrape
