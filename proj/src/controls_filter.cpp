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

#include "rkgrape/controls_filter.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "rkgrape/error.hpp"
#include "rkgrape/units.hpp"

namespace rkgrape {

bool ControlGrid::is_pinned(Index pixel, Index control) const {
  if (pinned.empty()) return false;
  const PinMask& p = pinned[static_cast<std::size_t>(control)];
  return (p.first && pixel == 0) || (p.last && pixel == n_pixels() - 1);
}

void ControlGrid::validate() const {
  if (!(pixel_dt > 0.0)) throw Error("pixel duration must be positive");
  if (n_pixels() < 1 || n_controls() < 1) throw ShapeError("control grid is empty");
  if (!pinned.empty() && pinned.size() != static_cast<std::size_t>(n_controls())) {
    throw ShapeError("pin mask count does not match control count");
  }
  for (const auto& p : pinned) {
    if ((p.first || p.last) && n_pixels() < 2) throw ShapeError("pinning needs at least 2 pixels");
  }
  if (!values.allFinite()) throw Error("non-finite control value");
}

double gaussian_bandwidth_ratio() { return std::sqrt(-std::log(1.0 / std::sqrt(2.0))); }

Index subpixels_per_pixel(double pixel_dt, double subpixel_dt) {
  if (!(pixel_dt > 0.0) || !(subpixel_dt > 0.0)) throw GridMismatchError("durations must be positive");
  const double ratio = pixel_dt / subpixel_dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    throw GridMismatchError("pixel duration " + std::to_string(pixel_dt) +
                            " ns is not an integer multiple of subpixel duration " +
                            std::to_string(subpixel_dt) + " ns");
  }
  return static_cast<Index>(rounded);
}

TransferMatrix build_gaussian_transfer(Index n_pixels, double pixel_dt, double subpixel_dt,
                                       double bandwidth_3db) {
  if (n_pixels < 1) throw ShapeError("transfer matrix needs at least one pixel");
  if (!(bandwidth_3db > 0.0)) throw Error("filter bandwidth must be positive");
  const Index r = subpixels_per_pixel(pixel_dt, subpixel_dt);
  const Index m = n_pixels * r;

  TransferMatrix tm;
  tm.pixel_dt = pixel_dt;
  tm.subpixel_dt = subpixel_dt;
  tm.bandwidth_3db = bandwidth_3db;
  tm.reference_bandwidth = bandwidth_3db / gaussian_bandwidth_ratio();
  tm.entries.resize(m, n_pixels);

  const double half_w0 = 0.5 * tm.reference_bandwidth;
  for (Index j = 0; j < n_pixels; ++j) {
    for (Index n = 0; n < m; ++n) {
      // Offsets in whole subpixels keep pixel edges exact.
      const double lo = static_cast<double>(n - j * r) * subpixel_dt;
      const double hi = static_cast<double>(n - (j + 1) * r) * subpixel_dt;
      tm.entries(n, j) = 0.5 * (std::erf(half_w0 * lo) - std::erf(half_w0 * hi));
    }
  }
  return tm;
}

TransferMatrix build_piecewise_transfer(Index n_pixels, double pixel_dt, double subpixel_dt) {
  if (n_pixels < 1) throw ShapeError("transfer matrix needs at least one pixel");
  const Index r = subpixels_per_pixel(pixel_dt, subpixel_dt);
  TransferMatrix tm;
  tm.pixel_dt = pixel_dt;
  tm.subpixel_dt = subpixel_dt;
  tm.entries = RealMatrix::Zero(n_pixels * r, n_pixels);
  for (Index n = 0; n < n_pixels * r; ++n) tm.entries(n, n / r) = 1.0;
  return tm;
}

SubpixelGrid apply_filter(const TransferMatrix& tm, const ControlGrid& controls) {
  if (controls.n_pixels() != tm.n_pixels()) {
    throw ShapeError("control grid has " + std::to_string(controls.n_pixels()) +
                     " pixels, transfer matrix expects " + std::to_string(tm.n_pixels()));
  }
  if (std::abs(controls.pixel_dt - tm.pixel_dt) > 1e-12 * tm.pixel_dt) {
    throw ShapeError("control grid pixel duration differs from transfer matrix");
  }
  SubpixelGrid out;
  out.subpixel_dt = tm.subpixel_dt;
  out.values.noalias() = tm.entries * controls.values;
  return out;
}

RealMatrix backprop_gradient(const TransferMatrix& tm, const RealMatrix& subpixel_grad,
                             std::span<const PinMask> pinned) {
  if (subpixel_grad.rows() != tm.n_subpixels()) {
    throw ShapeError("subpixel gradient has " + std::to_string(subpixel_grad.rows()) +
                     " rows, transfer matrix expects " + std::to_string(tm.n_subpixels()));
  }
  if (!pinned.empty() && pinned.size() != static_cast<std::size_t>(subpixel_grad.cols())) {
    throw ShapeError("pin mask count does not match control count");
  }
  RealMatrix g;
  g.noalias() = tm.entries.transpose() * subpixel_grad;
  const Index n = g.rows();
  for (std::size_t k = 0; k < pinned.size(); ++k) {
    const auto col = static_cast<Index>(k);
    if (pinned[k].first) g(0, col) = 0.0;
    if (pinned[k].last) g(n - 1, col) = 0.0;
  }
  return g;
}

namespace {

void write_grid(std::ostream& os, const RealMatrix& values, double dt, char prefix) {
  os << "t_ns";
  for (Index k = 0; k < values.cols(); ++k) os << ',' << prefix << '_' << (k + 1);
  os << '\n';
  os << std::setprecision(17);
  for (Index n = 0; n < values.rows(); ++n) {
    os << static_cast<double>(n) * dt;
    for (Index k = 0; k < values.cols(); ++k) os << ',' << units::to_mhz(values(n, k));
    os << '\n';
  }
}

}  // namespace

void write_pixel_csv(std::ostream& os, const ControlGrid& grid) {
  write_grid(os, grid.values, grid.pixel_dt, 'u');
}

void write_subpixel_csv(std::ostream& os, const SubpixelGrid& grid) {
  write_grid(os, grid.values, grid.subpixel_dt, 's');
}

ControlGrid read_pixel_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("t_ns", 0) != 0) {
    throw ConfigError("pulse file: expected header starting with t_ns");
  }
  const auto n_controls = static_cast<Index>(std::count(line.begin(), line.end(), ','));
  if (n_controls < 1) throw ConfigError("pulse file: no control columns");

  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<Index>(row.size()) != n_controls + 1) {
      throw ConfigError("pulse file: ragged row at t=" + (row.empty() ? std::string("?") : std::to_string(row[0])));
    }
    times.push_back(row[0]);
    rows.emplace_back(row.begin() + 1, row.end());
  }
  if (rows.size() < 2) throw ConfigError("pulse file: need at least two rows");

  ControlGrid grid;
  grid.pixel_dt = times[1] - times[0];
  grid.values.resize(static_cast<Index>(rows.size()), n_controls);
  for (std::size_t n = 0; n < rows.size(); ++n) {
    for (Index k = 0; k < n_controls; ++k) {
      grid.values(static_cast<Index>(n), k) = units::from_mhz(rows[n][static_cast<std::size_t>(k)]);
    }
  }
  return grid;
}

}  // namespace rkgrape
