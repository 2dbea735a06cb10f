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

// Conventional Liouville-space route: the master equation as a d^2 x d^2
// matrix acting on vec(rho), propagated with matrix exponentials. Serves as
// the correctness oracle for the direct propagators at small d and as the
// baseline of the cost comparison.
//
// Vectorization is column stacking: vec(A X B) = (B^T kron A) vec(X).

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rkgrape/fit.hpp"
#include "rkgrape/operator_core.hpp"
#include "rkgrape/propagation.hpp"

namespace rkgrape {

struct Superoperator {
  Index dim = 0;   // Hilbert-space d
  Matrix entries;  // d^2 x d^2
};

Eigen::VectorXcd vec(const Matrix& m);
Matrix unvec(const Eigen::VectorXcd& v, Index dim);
Matrix kron(const Matrix& a, const Matrix& b);

/// L = -i(I kron H - H^T kron I)
///     + sum_j gamma_j [conj(a) kron a - (I kron a^+a)/2 - ((a^+a)^T kron I)/2].
Superoperator build_superoperator(const Operator& hamiltonian,
                                  std::span<const DissipationChannel> channels);

/// exp(L dt) by scaling and squaring with a degree-13 Pade approximant.
Superoperator expm_propagator(const Superoperator& l, double dt);

/// unvec(P vec(rho))
DensityState apply(const Superoperator& p, const DensityState& rho);

/// Propagates through every subpixel of `gen` with one exponential each.
DensityState propagate_liouville(const DensityState& initial, const PiecewiseGenerator& gen);

struct BenchmarkConfig {
  std::vector<Index> dims{8, 12, 16, 24, 32, 48};
  Index n_pixels = 100;
  int repetitions = 3;
  int n_states = 2;
  double pixel_dt = 1.0;  // ns
  IntegratorConfig integrator;
};

struct BenchmarkRow {
  Index d = 0;
  double t_expm_ms = 0.0;
  double t_rk_ms = 0.0;
  std::int64_t n_rk = 0;
  double trace_dist = 0.0;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  PowerLawFit expm_fit;
  PowerLawFit rk_fit;
};

/// The driven, damped linear cavity used by the scaling benchmark at dim d:
/// a detuned drive on (a + a^+) with a fixed pixel schedule.
PiecewiseGenerator benchmark_generator(Index dim, Index n_pixels, double pixel_dt);

/// Median wall times of (a) building N exponentials and applying them to
/// n_s states and (b) RK propagation of the same n_s states, per dimension.
/// Single-threaded; one warm-up pass per path precedes the timed repetitions.
BenchmarkResult benchmark_scaling(const BenchmarkConfig& cfg);

/// CSV `d,t_expm_ms,t_rk_ms,n_rk,trace_dist`.
void write_benchmark_csv(std::ostream& os, const BenchmarkResult& result);

}  // namespace rkgrape
