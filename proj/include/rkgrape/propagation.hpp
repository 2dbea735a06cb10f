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

// Stepwise Runge-Kutta integration of the master equation over a
// piecewise-constant generator. Each subpixel is integrated on its own,
// starting from the snapshot left by the previous one, and every subpixel
// boundary is stored (or streamed to a visitor for the backward pass).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "rkgrape/operator_core.hpp"

namespace rkgrape {

/// H(n) = drift + sum_k amplitudes(n, k) * control_ops[k] on subpixel n,
/// with fixed dissipation channels.
struct PiecewiseGenerator {
  Operator drift;
  std::vector<Operator> control_ops;
  std::vector<DissipationChannel> channels;
  RealMatrix amplitudes;  // M x R, rad/ns
  double subpixel_dt = 0.0;

  Index dim() const { return drift.rows(); }
  Index n_subpixels() const { return amplitudes.rows(); }
  /// Hamiltonian of 0-based subpixel n.
  Operator hamiltonian(Index n) const;
  void validate() const;
};

enum class RkMethod {
  classical_rk4,     // fixed step, `rk4_substeps` per subpixel
  dormand_prince45,  // adaptive embedded 5(4), step reset at every subpixel
};

struct IntegratorConfig {
  RkMethod method = RkMethod::dormand_prince45;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  int max_steps_per_subpixel = 10'000;
  int rehermitize_every = 10;
  int rk4_substeps = 1;

  void validate() const;
};

enum class Direction { forward, backward };

/// Snapshots at the M+1 subpixel boundaries. For a backward trajectory,
/// states[n] is the costate at t = n * dt, so states[M] is the target.
struct Trajectory {
  std::vector<DensityState> states;
  std::int64_t rk_step_count = 0;
  std::int64_t rejected_steps = 0;
  Direction direction = Direction::forward;
};

/// Term added to the costate at each boundary of a backward sweep:
/// lambda(n) = L_{n+1}^+ lambda(n+1) + weight * op. Drives the
/// running-cost (integrated observable) gradient.
struct BoundarySource {
  Operator op;
  double weight = 1.0;
};

/// Counters returned by a streamed sweep.
struct SweepStats {
  std::int64_t rk_step_count = 0;
  std::int64_t rejected_steps = 0;
};

Trajectory propagate_forward(const DensityState& initial, const PiecewiseGenerator& gen,
                             const IntegratorConfig& cfg);

/// Integrates d lambda / d tau = L^+ lambda in reverse time tau = T - t,
/// starting from states[M] = target (plus the source, when given).
Trajectory propagate_backward(const DensityState& target, const PiecewiseGenerator& gen,
                              const IntegratorConfig& cfg,
                              const std::optional<BoundarySource>& source = std::nullopt);

/// Streaming form of propagate_backward: visits (n, lambda_n) for
/// n = M, M-1, ..., 0 without storing the costates.
SweepStats sweep_backward(const DensityState& target, const PiecewiseGenerator& gen,
                          const IntegratorConfig& cfg,
                          const std::optional<BoundarySource>& source,
                          const std::function<void(Index, const DensityState&)>& visit);

/// n_RK, the accepted Runge-Kutta step count of a trajectory.
std::int64_t rk_step_budget(const Trajectory& traj);

/// Bytes held by the snapshots of one trajectory: (M+1) d^2 complex numbers.
std::size_t trajectory_memory_bytes(Index dim, Index n_subpixels);

/// max_n |Tr rho_n - 1|
double max_trace_error(const Trajectory& traj);

}  // namespace rkgrape
