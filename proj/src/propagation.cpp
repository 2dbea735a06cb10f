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

#include "rkgrape/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rkgrape/error.hpp"

namespace rkgrape {

Operator PiecewiseGenerator::hamiltonian(Index n) const {
  Operator h = drift;
  for (std::size_t k = 0; k < control_ops.size(); ++k) {
    const double s = amplitudes(n, static_cast<Index>(k));
    if (s != 0.0) h += s * control_ops[k];
  }
  return h;
}

void PiecewiseGenerator::validate() const {
  const Index d = drift.rows();
  if (d < 1) throw InvalidDimensionError("generator drift is empty");
  require_dim(drift, d, "drift");
  for (const auto& op : control_ops) require_dim(op, d, "control operator");
  for (const auto& ch : channels) {
    require_dim(ch.collapse, d, "collapse operator");
    if (!(ch.rate >= 0.0)) throw Error("dissipation rate must be nonnegative");
  }
  if (amplitudes.cols() != static_cast<Index>(control_ops.size())) {
    throw ShapeError("amplitude columns (" + std::to_string(amplitudes.cols()) +
                     ") != number of control operators (" +
                     std::to_string(control_ops.size()) + ")");
  }
  if (!amplitudes.allFinite()) throw Error("non-finite control amplitude");
  if (!(subpixel_dt > 0.0)) throw Error("subpixel duration must be positive");
}

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw Error("integrator tolerances must be > 0");
  if (max_steps_per_subpixel < 1) throw Error("max_steps_per_subpixel must be >= 1");
  if (rk4_substeps < 1) throw Error("rk4_substeps must be >= 1");
  if (rehermitize_every < 0) throw Error("rehermitize_every must be >= 0");
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

bool is_hermitian(const Matrix& m, double rel) {
  const double scale = std::max(max_abs(m), 1e-300);
  return hermiticity_defect(m) <= rel * scale;
}

// Integrates one constant-generator segment. Owns all stage storage so a
// sweep allocates once.
class SegmentIntegrator {
 public:
  SegmentIntegrator(const IntegratorConfig& cfg, Index d, Direction dir)
      : cfg_(cfg), dir_(dir) {
    for (auto* m : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &ynew_}) m->resize(d, d);
  }

  void advance(const LindbladKernel& kernel, DensityState& y, double dt, Index subpixel,
               SweepStats& stats) {
    if (cfg_.method == RkMethod::classical_rk4) {
      advance_rk4(kernel, y, dt, stats);
    } else {
      advance_dopri(kernel, y, dt, subpixel, stats);
    }
    if (!y.allFinite()) {
      throw DivergenceError("non-finite state in subpixel " + std::to_string(subpixel),
                            static_cast<std::size_t>(subpixel));
    }
  }

 private:
  void rhs(const LindbladKernel& kernel, const DensityState& y, DensityState& out) const {
    if (dir_ == Direction::forward) {
      kernel.apply(y, out);
    } else {
      kernel.apply_adjoint(y, out);
    }
  }

  void advance_rk4(const LindbladKernel& kernel, DensityState& y, double dt, SweepStats& stats) {
    const double h = dt / cfg_.rk4_substeps;
    for (int s = 0; s < cfg_.rk4_substeps; ++s) {
      rhs(kernel, y, k1_);
      tmp_ = y + (0.5 * h) * k1_;
      rhs(kernel, tmp_, k2_);
      tmp_ = y + (0.5 * h) * k2_;
      rhs(kernel, tmp_, k3_);
      tmp_ = y + h * k3_;
      rhs(kernel, tmp_, k4_);
      y += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
      ++stats.rk_step_count;
    }
  }

  void advance_dopri(const LindbladKernel& kernel, DensityState& y, double dt, Index subpixel,
                     SweepStats& stats) {
    double t = 0.0;
    double h = (h_next_ > 0.0) ? std::min(h_next_, dt) : dt;
    int steps = 0;
    rhs(kernel, y, k1_);
    while (t < dt) {
      if (steps >= cfg_.max_steps_per_subpixel) {
        throw IntegrationFailure("step budget exhausted in subpixel " + std::to_string(subpixel),
                                 static_cast<std::size_t>(subpixel));
      }
      const double remaining = dt - t;
      if (h >= remaining * (1.0 - 1e-12)) h = remaining;

      tmp_ = y + (h * a21) * k1_;
      rhs(kernel, tmp_, k2_);
      tmp_ = y + h * (a31 * k1_ + a32 * k2_);
      rhs(kernel, tmp_, k3_);
      tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
      rhs(kernel, tmp_, k4_);
      tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
      rhs(kernel, tmp_, k5_);
      tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
      rhs(kernel, tmp_, k6_);
      ynew_ = y + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
      rhs(kernel, ynew_, k7_);
      ++steps;

      // Error estimate, RMS over entries with mixed abs/rel scaling.
      tmp_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
      const auto scale =
          cfg_.abs_tol + cfg_.rel_tol * y.array().abs().max(ynew_.array().abs());
      const double err =
          std::sqrt((tmp_.array().abs2() / scale.square()).sum() / static_cast<double>(y.size()));

      if (!std::isfinite(err)) {
        throw DivergenceError("non-finite error estimate in subpixel " + std::to_string(subpixel),
                              static_cast<std::size_t>(subpixel));
      }
      if (err <= 1.0) {
        t = (h == remaining) ? dt : t + h;
        y.swap(ynew_);
        k1_.swap(k7_);
        ++stats.rk_step_count;
        const double factor = (err == 0.0) ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        // A step clipped to the segment end says little about the next one.
        h_next_ = (h == remaining && factor >= 1.0) ? std::max(h_next_, h) : h * factor;
        h = h_next_;
      } else {
        ++stats.rejected_steps;
        h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      }
    }
  }

  IntegratorConfig cfg_;
  Direction dir_;
  double h_next_ = 0.0;
  DensityState k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, ynew_;
};

void check_state(const DensityState& s, Index d, const char* what) {
  require_dim(s, d, what);
  if (!s.allFinite()) throw Error(std::string(what) + " has non-finite entries");
  if (!is_hermitian(s, 1e-10)) throw Error(std::string(what) + " is not Hermitian");
}

bool rehermitize_due(const IntegratorConfig& cfg, Index n) {
  return cfg.rehermitize_every > 0 && n % cfg.rehermitize_every == 0;
}

}  // namespace

Trajectory propagate_forward(const DensityState& initial, const PiecewiseGenerator& gen,
                             const IntegratorConfig& cfg) {
  gen.validate();
  cfg.validate();
  const Index d = gen.dim();
  check_state(initial, d, "initial state");
  if (std::abs(initial.trace() - Complex(1.0)) > 1e-8) throw Error("initial state is not normalized");

  const Index m = gen.n_subpixels();
  Trajectory traj;
  traj.direction = Direction::forward;
  traj.states.reserve(static_cast<std::size_t>(m + 1));
  traj.states.push_back(initial);

  LindbladKernel kernel(gen.drift, gen.channels);
  SegmentIntegrator integ(cfg, d, Direction::forward);
  SweepStats stats;
  DensityState y = initial;
  for (Index n = 0; n < m; ++n) {
    kernel.set_hamiltonian(gen.hamiltonian(n));
    integ.advance(kernel, y, gen.subpixel_dt, n, stats);
    if (rehermitize_due(cfg, n + 1)) y = hermitian_part(y);
    traj.states.push_back(y);
  }
  traj.rk_step_count = stats.rk_step_count;
  traj.rejected_steps = stats.rejected_steps;
  return traj;
}

SweepStats sweep_backward(const DensityState& target, const PiecewiseGenerator& gen,
                          const IntegratorConfig& cfg,
                          const std::optional<BoundarySource>& source,
                          const std::function<void(Index, const DensityState&)>& visit) {
  gen.validate();
  cfg.validate();
  const Index d = gen.dim();
  check_state(target, d, "target");
  if (source) check_state(source->op, d, "boundary source");

  const Index m = gen.n_subpixels();
  LindbladKernel kernel(gen.drift, gen.channels);
  SegmentIntegrator integ(cfg, d, Direction::backward);
  SweepStats stats;

  DensityState y = target;
  if (source) y += source->weight * source->op;
  visit(m, y);
  for (Index n = m; n > 0; --n) {
    kernel.set_hamiltonian(gen.hamiltonian(n - 1));
    integ.advance(kernel, y, gen.subpixel_dt, n - 1, stats);
    if (source) y += source->weight * source->op;
    if (rehermitize_due(cfg, m - n + 1)) y = hermitian_part(y);
    visit(n - 1, y);
  }
  return stats;
}

Trajectory propagate_backward(const DensityState& target, const PiecewiseGenerator& gen,
                              const IntegratorConfig& cfg,
                              const std::optional<BoundarySource>& source) {
  Trajectory traj;
  traj.direction = Direction::backward;
  const auto m = static_cast<std::size_t>(gen.n_subpixels());
  traj.states.resize(m + 1);
  const SweepStats stats =
      sweep_backward(target, gen, cfg, source, [&](Index n, const DensityState& lambda) {
        traj.states[static_cast<std::size_t>(n)] = lambda;
      });
  traj.rk_step_count = stats.rk_step_count;
  traj.rejected_steps = stats.rejected_steps;
  return traj;
}

std::int64_t rk_step_budget(const Trajectory& traj) { return traj.rk_step_count; }

std::size_t trajectory_memory_bytes(Index dim, Index n_subpixels) {
  return static_cast<std::size_t>(n_subpixels + 1) * static_cast<std::size_t>(dim * dim) *
         sizeof(Complex);
}

double max_trace_error(const Trajectory& traj) {
  double worst = 0.0;
  for (const auto& s : traj.states) worst = std::max(worst, std::abs(s.trace() - Complex(1.0)));
  return worst;
}

}  // namespace rkgrape
