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

// Performance index, GRAPE gradient and integrated-observable penalty for
// open systems, evaluated with the stepwise RK propagators.
//
//   phi0  = sum_b w_b Re Tr(sigma rho_b(T)) / sum_b w_b
//   phi_p = sum_b sum_{n=0}^{M} dt Re Tr(A rho_b(n dt))
//   phi   = phi0 - sum_p beta_p phi_p
//
// The subpixel gradient is the first-order expression
//   dphi/ds_k(n) = Re[-i dt Tr(Lambda_n [H_k, rho_n])],
// with Lambda the costate of phi: the target sigma propagated backwards with
// -beta dt A added at every boundary. One forward and one backward sweep
// per branch cover the overlap and all penalties at once.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rkgrape/controls_filter.hpp"
#include "rkgrape/operator_core.hpp"
#include "rkgrape/parallel.hpp"
#include "rkgrape/propagation.hpp"

namespace rkgrape {

/// One weighted initial state with its own drift Hamiltonian (e.g. one
/// qubit branch of a dispersive readout).
struct Branch {
  DensityState initial;
  Operator drift;
  double weight = 1.0;
  std::string label;
};

enum class ObjectiveKind { target_overlap, observable_expectation };

/// sigma in Tr(sigma rho(T)): a target state or an observable.
struct Objective {
  ObjectiveKind kind = ObjectiveKind::target_overlap;
  Operator op;
};

/// beta * integral of <obs> over the horizon, subtracted from the index.
struct Penalty {
  Operator obs;
  double beta = 0.0;
};

struct OptimizationProblem {
  std::vector<Branch> branches;
  std::vector<Operator> control_ops;
  std::vector<DissipationChannel> channels;
  Objective objective;
  std::vector<Penalty> penalties;
  TransferMatrix filter;
  IntegratorConfig integrator;
  Execution execution = Execution::parallel;
  /// Consume costates on the fly instead of storing the backward trajectory.
  bool streaming_backward = false;

  Index dim() const;
  Index n_controls() const { return static_cast<Index>(control_ops.size()); }
  double total_weight() const;
  PiecewiseGenerator generator(std::size_t branch, const SubpixelGrid& s) const;
  void validate() const;
};

struct GradientResult {
  double phi = 0.0;
  double phi0 = 0.0;
  std::vector<double> phi_p;  // one per penalty
  RealMatrix pixel_gradient;     // N x R
  RealMatrix subpixel_gradient;  // M x R
  std::int64_t rk_steps = 0;
  /// Largest |Im| of the gradient traces; zero up to rounding for Hermitian inputs.
  double max_imag_residue = 0.0;

  double penalty_total(std::span<const Penalty> penalties) const;
};

/// Forward trajectories of every branch for given subpixel amplitudes.
struct Simulation {
  std::vector<Trajectory> forward;
  double phi = 0.0;
  double phi0 = 0.0;
  std::vector<double> phi_p;
  std::vector<double> overlaps;  // Re Tr(sigma rho_b(T)) per branch
  std::int64_t rk_steps = 0;
};

Simulation simulate_subpixels(const OptimizationProblem& problem, const SubpixelGrid& s);
Simulation simulate(const OptimizationProblem& problem, const ControlGrid& controls);

/// phi for the given controls.
double evaluate_index(const OptimizationProblem& problem, const ControlGrid& controls);

/// Index and gradient with respect to the subpixel amplitudes; pixel_gradient
/// is left empty.
GradientResult compute_subpixel_gradient(const OptimizationProblem& problem,
                                         const SubpixelGrid& s);

/// Index, subpixel gradient and pixel gradient (chain rule through the
/// filter, pinned pixels zeroed).
GradientResult compute_gradient(const OptimizationProblem& problem, const ControlGrid& controls);

/// sum over trajectories and n = 0..M of dt Re Tr(obs rho_n); unweighted.
double photon_penalty(std::span<const Trajectory> trajectories, const Operator& obs,
                      double subpixel_dt);

/// d photon_penalty / ds_k(n) for the problem's branches (unweighted sum),
/// via one backward sweep per branch that adds obs at every boundary.
RealMatrix photon_penalty_gradient(const OptimizationProblem& problem, const SubpixelGrid& s,
                                   const Operator& obs);

/// Least-squares polynomial fit of each control over the pixel centres
/// (Legendre basis on [-1, 1]); pinned pixels keep their values.
ControlGrid polynomial_fit(const ControlGrid& controls, int degree);

}  // namespace rkgrape
