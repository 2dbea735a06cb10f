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

#include "rkgrape/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>

#include "rkgrape/error.hpp"

namespace rkgrape {

void OptimizerConfig::validate() const {
  if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw Error("line search needs 0 < c1 < c2 < 1");
  if (max_iters < 0) throw Error("max_iters must be >= 0");
  if (max_line_search_trials < 1) throw Error("max_line_search_trials must be >= 1");
  if (lbfgs_memory < 1) throw Error("lbfgs_memory must be >= 1");
  if (!(initial_step > 0.0)) throw Error("initial_step must be > 0");
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::grad_tol: return "grad_tol";
    case StopReason::phi_tol: return "phi_tol";
    case StopReason::max_iters: return "max_iters";
    case StopReason::stalled: return "stalled";
  }
  return "unknown";
}

namespace {

using Vec = Eigen::VectorXd;

// Internally everything minimizes f = -phi.
struct Point {
  Vec x;
  double f = 0.0;
  Vec g;
  Evaluation eval;
};

class Minimizer {
 public:
  Minimizer(const ObjectiveFn& fn, const OptimizerConfig& cfg, OptimizerState& state)
      : fn_(fn), cfg_(cfg), state_(state) {}

  Point evaluate(const Vec& x) {
    Evaluation e = fn_(x);
    ++state_.evaluations;
    state_.total_rk_steps += e.rk_steps;
    if (!std::isfinite(e.phi) || !e.grad.allFinite()) {
      throw Error("non-finite objective at evaluation " + std::to_string(state_.evaluations) +
                  " (phi=" + std::to_string(e.phi) + ")");
    }
    if (e.grad.size() != x.size()) throw ShapeError("objective gradient has wrong length");
    Point p;
    p.x = x;
    p.f = -e.phi;
    p.g = -e.grad;
    p.eval = std::move(e);
    return p;
  }

  // Strong-Wolfe line search along d from `at`. Returns the accepted point,
  // or nullopt after max_line_search_trials evaluations; `best` then holds the
  // lowest sufficient-decrease point seen, if any.
  std::optional<Point> line_search(const Point& at, const Vec& d, double alpha0,
                                   std::optional<Point>& best) {
    const double f0 = at.f;
    const double df0 = at.g.dot(d);
    int trials = 0;

    struct Sample {
      double alpha, f, df;
    };
    auto probe = [&](double alpha, Point& out) -> Sample {
      out = evaluate(at.x + alpha * d);
      ++trials;
      if (out.f <= f0 + cfg_.c1 * alpha * df0 && (!best || out.f < best->f)) best = out;
      return {alpha, out.f, out.g.dot(d)};
    };
    auto armijo_fails = [&](const Sample& s) { return s.f > f0 + cfg_.c1 * s.alpha * df0; };
    auto curvature_ok = [&](const Sample& s) { return std::abs(s.df) <= -cfg_.c2 * df0; };

    auto zoom = [&](Sample lo, Sample hi) -> std::optional<Point> {
      Point trial;
      while (trials < cfg_.max_line_search_trials) {
        const double a = lo.alpha, b = hi.alpha;
        const double width = std::abs(b - a);
        if (width <= 1e-14 * std::max(std::abs(a), std::abs(b))) return std::nullopt;
        // Cubic interpolation through both ends, kept 10% inside the bracket.
        double alpha;
        const double d1 = lo.df + hi.df - 3.0 * (lo.f - hi.f) / (a - b);
        const double disc = d1 * d1 - lo.df * hi.df;
        if (disc >= 0.0) {
          const double d2 = std::copysign(std::sqrt(disc), b - a);
          alpha = b - (b - a) * (hi.df + d2 - d1) / (hi.df - lo.df + 2.0 * d2);
        } else {
          alpha = 0.5 * (a + b);
        }
        const double lo_edge = std::min(a, b) + 0.1 * width;
        const double hi_edge = std::max(a, b) - 0.1 * width;
        if (!std::isfinite(alpha) || alpha < lo_edge || alpha > hi_edge) alpha = 0.5 * (a + b);

        const Sample s = probe(alpha, trial);
        if (armijo_fails(s) || s.f >= lo.f) {
          hi = s;
        } else {
          if (curvature_ok(s)) return trial;
          if (s.df * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
          lo = s;
        }
      }
      return std::nullopt;
    };

    Sample prev{0.0, f0, df0};
    double alpha = alpha0;
    Point trial;
    while (trials < cfg_.max_line_search_trials) {
      const Sample s = probe(alpha, trial);
      if (armijo_fails(s) || (trials > 1 && s.f >= prev.f)) return zoom(prev, s);
      if (curvature_ok(s)) return trial;
      if (s.df >= 0.0) return zoom(s, prev);
      prev = s;
      alpha *= 2.0;
    }
    return std::nullopt;
  }

 private:
  const ObjectiveFn& fn_;
  const OptimizerConfig& cfg_;
  OptimizerState& state_;
};

IterationRecord make_record(int iter, const Point& p, double step) {
  IterationRecord r;
  r.iter = iter;
  r.phi = p.eval.phi;
  r.phi0 = p.eval.phi0;
  r.phi_p = p.eval.phi_p;
  r.grad_inf_norm = p.g.size() ? p.g.cwiseAbs().maxCoeff() : 0.0;
  r.step_len = step;
  r.rk_steps = p.eval.rk_steps;
  return r;
}

// L-BFGS two-loop recursion: returns H g.
Vec lbfgs_apply(const std::deque<std::pair<Vec, Vec>>& pairs, const Vec& g, double gamma) {
  Vec q = g;
  std::vector<double> alphas(pairs.size());
  for (std::size_t i = pairs.size(); i-- > 0;) {
    const auto& [s, y] = pairs[i];
    alphas[i] = s.dot(q) / y.dot(s);
    q -= alphas[i] * y;
  }
  Vec r = gamma * q;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [s, y] = pairs[i];
    const double beta = y.dot(r) / y.dot(s);
    r += (alphas[i] - beta) * s;
  }
  return r;
}

}  // namespace

Vec maximize(const ObjectiveFn& fn, const Vec& x0, const OptimizerConfig& cfg,
             OptimizerState& state, const ProgressFn& progress) {
  cfg.validate();
  state = OptimizerState{};
  state.rng_seed = cfg.seed;
  const Index n = x0.size();
  Minimizer mz(fn, cfg, state);

  Point cur = mz.evaluate(x0);
  state.history.push_back(make_record(0, cur, 0.0));
  if (progress) progress(state.history.back());

  const bool dense = cfg.method == QuasiNewton::bfgs;
  if (dense) state.inverse_hessian = Eigen::MatrixXd::Identity(n, n);
  double gamma = 1.0;  // L-BFGS initial scaling
  bool scaled = false;
  state.reason = StopReason::max_iters;

  if (n == 0) {
    state.reason = StopReason::grad_tol;
    return cur.x;
  }

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    if (cur.g.cwiseAbs().maxCoeff() < cfg.tol_grad) {
      state.reason = StopReason::grad_tol;
      break;
    }
    Vec dir = dense ? Vec(-(state.inverse_hessian * cur.g)) : Vec(-lbfgs_apply(state.pairs, cur.g, gamma));
    if (!(cur.g.dot(dir) < 0.0)) {
      // Lost descent: restart from the scaled identity.
      if (dense) state.inverse_hessian = Eigen::MatrixXd::Identity(n, n) * gamma;
      state.pairs.clear();
      dir = -gamma * cur.g;
    }
    double alpha0 = 1.0;
    if (!scaled) alpha0 = std::min(1.0, cfg.initial_step / dir.cwiseAbs().maxCoeff());

    std::optional<Point> best;
    std::optional<Point> next = mz.line_search(cur, dir, alpha0, best);
    if (!next) {
      state.stalled = true;
      state.reason = StopReason::stalled;
      if (best && best->f < cur.f) {
        const double step = (best->x - cur.x).cwiseAbs().maxCoeff();
        cur = std::move(*best);
        state.iteration = iter;
        state.history.push_back(make_record(iter, cur, step));
        if (progress) progress(state.history.back());
      }
      break;
    }

    const Vec s = next->x - cur.x;
    const Vec y = next->g - cur.g;
    const double sy = s.dot(y);
    const double step = s.cwiseAbs().maxCoeff() / std::max(dir.cwiseAbs().maxCoeff(), 1e-300);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        gamma = sy / y.squaredNorm();
        if (dense) state.inverse_hessian *= gamma;
        scaled = true;
      }
      if (dense) {
        // H+ = (I - r s y^T) H (I - r y s^T) + r s s^T, r = 1 / y^T s.
        const double r = 1.0 / sy;
        const Vec hy = state.inverse_hessian * y;
        const double yhy = y.dot(hy);
        state.inverse_hessian += ((1.0 + r * yhy) * r) * (s * s.transpose()) -
                                 r * (hy * s.transpose() + s * hy.transpose());
        state.inverse_hessian = 0.5 * (state.inverse_hessian + state.inverse_hessian.transpose()).eval();
      } else {
        gamma = sy / y.squaredNorm();
        state.pairs.emplace_back(s, y);
        if (static_cast<int>(state.pairs.size()) > cfg.lbfgs_memory) state.pairs.pop_front();
      }
    } else {
      ++state.skipped_updates;
    }

    const double dphi = std::abs(next->f - cur.f);
    cur = std::move(*next);
    state.iteration = iter;
    state.history.push_back(make_record(iter, cur, step));
    if (progress) progress(state.history.back());
    if (dphi < cfg.tol_phi) {
      state.reason = StopReason::phi_tol;
      break;
    }
  }
  return cur.x;
}

namespace {

struct FreeLayout {
  std::vector<std::pair<Index, Index>> slots;  // (pixel, control)

  explicit FreeLayout(const ControlGrid& g) {
    for (Index k = 0; k < g.n_controls(); ++k) {
      for (Index j = 0; j < g.n_pixels(); ++j) {
        if (!g.is_pinned(j, k)) slots.emplace_back(j, k);
      }
    }
  }
  Vec gather(const RealMatrix& m) const {
    Vec v(static_cast<Index>(slots.size()));
    for (std::size_t i = 0; i < slots.size(); ++i) v(static_cast<Index>(i)) = m(slots[i].first, slots[i].second);
    return v;
  }
  void scatter(const Vec& v, RealMatrix& m) const {
    for (std::size_t i = 0; i < slots.size(); ++i) m(slots[i].first, slots[i].second) = v(static_cast<Index>(i));
  }
};

}  // namespace

OptimizeResult optimize(const OptimizationProblem& problem, const ControlGrid& initial,
                        const OptimizerConfig& cfg, const ProgressFn& progress) {
  problem.validate();
  initial.validate();
  const FreeLayout layout(initial);
  ControlGrid work = initial;

  ObjectiveFn fn = [&](const Vec& x) {
    layout.scatter(x, work.values);
    const GradientResult gr = compute_gradient(problem, work);
    Evaluation e;
    e.phi = gr.phi;
    e.phi0 = gr.phi0;
    for (double p : gr.phi_p) e.phi_p += p;
    e.grad = layout.gather(gr.pixel_gradient);
    e.rk_steps = gr.rk_steps;
    return e;
  };

  OptimizeResult result;
  const Vec best = maximize(fn, layout.gather(initial.values), cfg, result.state, progress);
  result.controls = initial;
  layout.scatter(best, result.controls.values);
  return result;
}

void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history) {
  os << "iter,phi,phi0,phi_p,grad_inf_norm,step_len,rk_steps\n";
  os << std::setprecision(17);
  for (const auto& r : history) {
    os << r.iter << ',' << r.phi << ',' << r.phi0 << ',' << r.phi_p << ',' << r.grad_inf_norm
       << ',' << r.step_len << ',' << r.rk_steps << '\n';
  }
}

}  // namespace rkgrape
