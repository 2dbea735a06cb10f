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
#include <deque>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rkgrape/controls_filter.hpp"
#include "rkgrape/grape.hpp"

namespace rkgrape {

enum class QuasiNewton { bfgs, lbfgs };

struct OptimizerConfig {
  QuasiNewton method = QuasiNewton::bfgs;
  int lbfgs_memory = 20;
  int max_iters = 500;
  double tol_grad = 1e-7;   // on ||grad||_inf
  double tol_phi = 1e-10;   // on |phi_k - phi_{k-1}|
  double c1 = 1e-4;         // sufficient increase
  double c2 = 0.9;          // curvature
  int max_line_search_trials = 40;
  /// Max-norm of the first trial step, in control units. Later iterations
  /// start from the unit quasi-Newton step.
  double initial_step = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double phi = 0.0;
  double phi0 = 0.0;
  double phi_p = 0.0;
  double grad_inf_norm = 0.0;
  double step_len = 0.0;
  std::int64_t rk_steps = 0;
};

enum class StopReason { grad_tol, phi_tol, max_iters, stalled };

std::string to_string(StopReason r);

struct OptimizerState {
  int iteration = 0;
  int evaluations = 0;
  /// Dense inverse-Hessian estimate (BFGS) in the free-variable space of -phi.
  Eigen::MatrixXd inverse_hessian;
  /// Curvature pairs (L-BFGS).
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
  std::vector<IterationRecord> history;
  std::uint64_t rng_seed = 0;
  bool stalled = false;
  StopReason reason = StopReason::max_iters;
  int skipped_updates = 0;
  std::int64_t total_rk_steps = 0;
};

/// Value and gradient of a function to be maximized.
struct Evaluation {
  double phi = 0.0;
  Eigen::VectorXd grad;
  double phi0 = 0.0;
  double phi_p = 0.0;
  std::int64_t rk_steps = 0;
};

using ObjectiveFn = std::function<Evaluation(const Eigen::VectorXd&)>;
using ProgressFn = std::function<void(const IterationRecord&)>;

/// Quasi-Newton ascent on a generic smooth function. Returns the best point.
Eigen::VectorXd maximize(const ObjectiveFn& fn, const Eigen::VectorXd& x0,
                         const OptimizerConfig& cfg, OptimizerState& state,
                         const ProgressFn& progress = {});

struct OptimizeResult {
  ControlGrid controls;
  OptimizerState state;
};

/// BFGS ascent of the problem's index over the unpinned pixels.
OptimizeResult optimize(const OptimizationProblem& problem, const ControlGrid& initial,
                        const OptimizerConfig& cfg, const ProgressFn& progress = {});

/// CSV `iter,phi,phi0,phi_p,grad_inf_norm,step_len,rk_steps`.
void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history);

}  // namespace rkgrape
