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

#include "rkgrape/grape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rkgrape/error.hpp"

namespace rkgrape {

Index OptimizationProblem::dim() const {
  return branches.empty() ? 0 : branches.front().initial.rows();
}

double OptimizationProblem::total_weight() const {
  double w = 0.0;
  for (const auto& b : branches) w += b.weight;
  return w;
}

PiecewiseGenerator OptimizationProblem::generator(std::size_t branch, const SubpixelGrid& s) const {
  PiecewiseGenerator gen;
  gen.drift = branches.at(branch).drift;
  gen.control_ops = control_ops;
  gen.channels = channels;
  gen.amplitudes = s.values;
  gen.subpixel_dt = s.subpixel_dt;
  return gen;
}

void OptimizationProblem::validate() const {
  if (branches.empty()) throw Error("problem needs at least one initial state");
  const Index d = dim();
  for (const auto& b : branches) {
    if (!(b.weight > 0.0)) throw Error("branch weights must be positive");
    require_dim(b.initial, d, "initial state");
    require_dim(b.drift, d, "drift");
  }
  if (control_ops.empty()) throw ShapeError("problem needs at least one control operator");
  for (const auto& op : control_ops) require_dim(op, d, "control operator");
  require_dim(objective.op, d, "objective operator");
  for (const auto& p : penalties) require_dim(p.obs, d, "penalty observable");
  if (filter.n_pixels() < 1) throw ShapeError("problem has no transfer matrix");
  integrator.validate();
}

double GradientResult::penalty_total(std::span<const Penalty> penalties) const {
  double total = 0.0;
  for (std::size_t p = 0; p < penalties.size() && p < phi_p.size(); ++p) {
    total += penalties[p].beta * phi_p[p];
  }
  return total;
}

namespace {

void check_subpixels(const OptimizationProblem& problem, const SubpixelGrid& s) {
  if (s.values.cols() != problem.n_controls()) {
    throw ShapeError("subpixel grid has " + std::to_string(s.values.cols()) +
                     " controls, problem has " + std::to_string(problem.n_controls()));
  }
}

// Re-raises a propagation failure with the branch index attached.
template <typename Fn>
auto with_branch(std::size_t b, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string(e.what()) + " (initial state " + std::to_string(b) + ")",
                          e.subpixel());
  } catch (const IntegrationFailure& e) {
    throw IntegrationFailure(std::string(e.what()) + " (initial state " + std::to_string(b) + ")",
                             e.subpixel());
  }
}

double integrated_expectation(const Trajectory& traj, const Operator& obs, double dt) {
  double sum = 0.0;
  for (const auto& rho : traj.states) sum += expectation(obs, rho).real();
  return dt * sum;
}

// Accumulates Re[-i dt Tr(lambda [H_k, rho])] into row `row` of `grad`.
// For Hermitian rho and lambda, lambda rho = (rho lambda)^+, so one product
// gives the commutator C = rho lambda - lambda rho, and
// Tr(lambda [H, rho]) = Tr(H C).
class GradientAccumulator {
 public:
  GradientAccumulator(std::span<const Operator> controls, double dt, Index d)
      : controls_(controls), dt_(dt), p_(d, d), c_(d, d) {}

  void add(const DensityState& lambda, const DensityState& rho, RealMatrix& grad, Index row,
           double scale) {
    p_.noalias() = rho * lambda;
    c_ = p_ - p_.adjoint();
    for (std::size_t k = 0; k < controls_.size(); ++k) {
      const Complex tr = (controls_[k].array() * c_.transpose().array()).sum();
      // -i dt tr: real part dt Im(tr), imaginary part -dt Re(tr).
      grad(row, static_cast<Index>(k)) += scale * dt_ * tr.imag();
      max_imag_ = std::max(max_imag_, std::abs(dt_ * tr.real()));
    }
  }

  double max_imag() const { return max_imag_; }

 private:
  std::span<const Operator> controls_;
  double dt_;
  Matrix p_, c_;
  double max_imag_ = 0.0;
};

// Gradient of one branch given its forward trajectory and costate source.
struct BranchGradient {
  RealMatrix grad;
  std::int64_t rk_steps = 0;
  double max_imag = 0.0;
};

BranchGradient branch_gradient(const OptimizationProblem& problem, const PiecewiseGenerator& gen,
                               const Trajectory& forward, const DensityState& target,
                               const std::optional<BoundarySource>& source) {
  const Index m = gen.n_subpixels();
  BranchGradient out;
  out.grad = RealMatrix::Zero(m, problem.n_controls());
  GradientAccumulator acc(problem.control_ops, gen.subpixel_dt, gen.dim());

  // Costate n pairs with the state at the end of subpixel n (1-based), the
  // same time slice, to first order in dt.
  auto visit = [&](Index n, const DensityState& lambda) {
    if (n >= 1) acc.add(lambda, forward.states[static_cast<std::size_t>(n)], out.grad, n - 1, 1.0);
  };
  if (problem.streaming_backward) {
    out.rk_steps = sweep_backward(target, gen, problem.integrator, source, visit).rk_step_count;
  } else {
    const Trajectory backward = propagate_backward(target, gen, problem.integrator, source);
    out.rk_steps = backward.rk_step_count;
    for (Index n = m; n >= 0; --n) visit(n, backward.states[static_cast<std::size_t>(n)]);
  }
  out.max_imag = acc.max_imag();
  return out;
}

std::optional<BoundarySource> penalty_source(const OptimizationProblem& problem, double dt) {
  if (problem.penalties.empty()) return std::nullopt;
  BoundarySource src;
  src.op = Operator::Zero(problem.dim(), problem.dim());
  for (const auto& p : problem.penalties) src.op += p.beta * p.obs;
  src.weight = -dt;
  return src;
}

void fill_index(const OptimizationProblem& problem, Simulation& sim, double dt) {
  const double w_total = problem.total_weight();
  sim.overlaps.assign(problem.branches.size(), 0.0);
  sim.phi0 = 0.0;
  sim.phi_p.assign(problem.penalties.size(), 0.0);
  sim.rk_steps = 0;
  for (std::size_t b = 0; b < problem.branches.size(); ++b) {
    const double w = problem.branches[b].weight / w_total;
    const Trajectory& traj = sim.forward[b];
    sim.overlaps[b] = expectation(problem.objective.op, traj.states.back()).real();
    sim.phi0 += w * sim.overlaps[b];
    for (std::size_t p = 0; p < problem.penalties.size(); ++p) {
      sim.phi_p[p] += integrated_expectation(traj, problem.penalties[p].obs, dt);
    }
    sim.rk_steps += traj.rk_step_count;
  }
  sim.phi = sim.phi0;
  for (std::size_t p = 0; p < problem.penalties.size(); ++p) {
    sim.phi -= problem.penalties[p].beta * sim.phi_p[p];
  }
}

}  // namespace

Simulation simulate_subpixels(const OptimizationProblem& problem, const SubpixelGrid& s) {
  problem.validate();
  check_subpixels(problem, s);
  Simulation sim;
  sim.forward.resize(problem.branches.size());
  for_each_index(problem.branches.size(), problem.execution, [&](std::size_t b) {
    const PiecewiseGenerator gen = problem.generator(b, s);
    sim.forward[b] = with_branch(
        b, [&] { return propagate_forward(problem.branches[b].initial, gen, problem.integrator); });
  });
  fill_index(problem, sim, s.subpixel_dt);
  return sim;
}

Simulation simulate(const OptimizationProblem& problem, const ControlGrid& controls) {
  controls.validate();
  return simulate_subpixels(problem, apply_filter(problem.filter, controls));
}

double evaluate_index(const OptimizationProblem& problem, const ControlGrid& controls) {
  return simulate(problem, controls).phi;
}

GradientResult compute_subpixel_gradient(const OptimizationProblem& problem,
                                         const SubpixelGrid& s) {
  problem.validate();
  check_subpixels(problem, s);
  const std::size_t nb = problem.branches.size();
  const double w_total = problem.total_weight();
  const auto source = penalty_source(problem, s.subpixel_dt);

  Simulation sim;
  sim.forward.resize(nb);
  std::vector<BranchGradient> parts(nb);
  for_each_index(nb, problem.execution, [&](std::size_t b) {
    const PiecewiseGenerator gen = problem.generator(b, s);
    with_branch(b, [&] {
      sim.forward[b] = propagate_forward(problem.branches[b].initial, gen, problem.integrator);
      const double w = problem.branches[b].weight / w_total;
      parts[b] = branch_gradient(problem, gen, sim.forward[b], w * problem.objective.op, source);
    });
  });
  fill_index(problem, sim, s.subpixel_dt);

  GradientResult result;
  result.phi = sim.phi;
  result.phi0 = sim.phi0;
  result.phi_p = sim.phi_p;
  result.rk_steps = sim.rk_steps;
  result.subpixel_gradient = RealMatrix::Zero(s.n_subpixels(), problem.n_controls());
  for (std::size_t b = 0; b < nb; ++b) {
    result.subpixel_gradient += parts[b].grad;
    result.rk_steps += parts[b].rk_steps;
    result.max_imag_residue = std::max(result.max_imag_residue, parts[b].max_imag);
  }
  return result;
}

GradientResult compute_gradient(const OptimizationProblem& problem, const ControlGrid& controls) {
  controls.validate();
  GradientResult result = compute_subpixel_gradient(problem, apply_filter(problem.filter, controls));
  result.pixel_gradient = backprop_gradient(problem.filter, result.subpixel_gradient, controls.pinned);
  return result;
}

double photon_penalty(std::span<const Trajectory> trajectories, const Operator& obs,
                      double subpixel_dt) {
  double total = 0.0;
  for (const auto& traj : trajectories) total += integrated_expectation(traj, obs, subpixel_dt);
  return total;
}

RealMatrix photon_penalty_gradient(const OptimizationProblem& problem, const SubpixelGrid& s,
                                   const Operator& obs) {
  problem.validate();
  check_subpixels(problem, s);
  require_dim(obs, problem.dim(), "penalty observable");
  if (s.n_subpixels() == 0) return RealMatrix(0, problem.n_controls());
  const std::size_t nb = problem.branches.size();
  const DensityState zero = DensityState::Zero(problem.dim(), problem.dim());
  const BoundarySource source{obs, s.subpixel_dt};

  std::vector<BranchGradient> parts(nb);
  for_each_index(nb, problem.execution, [&](std::size_t b) {
    const PiecewiseGenerator gen = problem.generator(b, s);
    with_branch(b, [&] {
      const Trajectory fwd = propagate_forward(problem.branches[b].initial, gen, problem.integrator);
      parts[b] = branch_gradient(problem, gen, fwd, zero, source);
    });
  });
  RealMatrix grad = RealMatrix::Zero(s.n_subpixels(), problem.n_controls());
  for (const auto& p : parts) grad += p.grad;
  return grad;
}

ControlGrid polynomial_fit(const ControlGrid& controls, int degree) {
  controls.validate();
  if (degree < 0) throw Error("polynomial degree must be >= 0");
  const Index n = controls.n_pixels();
  const Index terms = std::min<Index>(degree + 1, n);

  // Legendre recurrence on x in [-1, 1].
  RealMatrix basis(n, terms);
  for (Index j = 0; j < n; ++j) {
    const double x = 2.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(n) - 1.0;
    basis(j, 0) = 1.0;
    if (terms > 1) basis(j, 1) = x;
    for (Index l = 2; l < terms; ++l) {
      const double ld = static_cast<double>(l);
      basis(j, l) = ((2.0 * ld - 1.0) * x * basis(j, l - 1) - (ld - 1.0) * basis(j, l - 2)) / ld;
    }
  }
  const auto qr = basis.colPivHouseholderQr();
  ControlGrid fit = controls;
  for (Index k = 0; k < controls.n_controls(); ++k) {
    const Eigen::VectorXd coeffs = qr.solve(controls.values.col(k));
    fit.values.col(k) = basis * coeffs;
  }
  for (Index k = 0; k < controls.n_controls(); ++k) {
    for (Index j : {Index{0}, n - 1}) {
      if (controls.is_pinned(j, k)) fit.values(j, k) = controls.values(j, k);
    }
  }
  return fit;
}

}  // namespace rkgrape
