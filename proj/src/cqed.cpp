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

#include "rkgrape/cqed.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "rkgrape/error.hpp"
#include "rkgrape/parallel.hpp"
#include "rkgrape/units.hpp"

namespace rkgrape {

namespace {

constexpr double kLeakLimit = 1e-6;
constexpr Index kMeasurementChunk = 500;  // subpixels held in memory at once

double max_leak(const Trajectory& traj) {
  double leak = 0.0;
  for (const auto& s : traj.states) leak = std::max(leak, truncation_leak(s));
  return leak;
}

std::vector<double> photon_series(const Trajectory& traj, const Operator& n) {
  std::vector<double> out;
  out.reserve(traj.states.size());
  for (const auto& s : traj.states) out.push_back(expectation(n, s).real());
  return out;
}

PiecewiseGenerator constant_drive(const DispersiveModel& model, QubitState q, double eps,
                                  Index segments, double dt) {
  const auto h = build_branch_hamiltonians(model, q);
  PiecewiseGenerator gen;
  gen.drift = h.drift;
  gen.control_ops = {h.controls[0]};
  gen.channels = {{model.kappa, annihilation(model.fock_dim)}};
  gen.amplitudes = RealMatrix::Constant(segments, 1, eps);
  gen.subpixel_dt = dt;
  return gen;
}

}  // namespace

DispersiveModel DispersiveModel::reference() {
  DispersiveModel m;
  m.chi = units::from_mhz(1.3);
  m.kerr = -units::from_khz(2.1);
  m.kappa = units::from_mhz(1.1);
  m.detuning = 0.0;
  m.fock_dim = 40;
  m.n_crit = 29.0;
  return m;
}

double DispersiveModel::branch_detuning(QubitState q) const {
  const int s = q == QubitState::ground ? ground_sign : -ground_sign;
  return detuning + s * chi;
}

void DispersiveModel::validate() const {
  if (!(kappa > 0.0)) throw Error("model: kappa must be > 0");
  if (fock_dim < 2) throw InvalidDimensionError("model: fock_dim must be >= 2");
  if (ground_sign != 1 && ground_sign != -1) throw Error("model: ground_sign must be +1 or -1");
  if (!std::isfinite(chi) || !std::isfinite(kerr) || !std::isfinite(detuning))
    throw Error("model: non-finite parameter");
}

BranchHamiltonians build_branch_hamiltonians(const DispersiveModel& model, QubitState q) {
  model.validate();
  const Index d = model.fock_dim;
  const Operator a = annihilation(d);
  const Operator n = number_operator(d);
  const Complex i1(0.0, 1.0);
  BranchHamiltonians h;
  h.drift = model.branch_detuning(q) * n + model.kerr * (n * n);
  h.controls = {a.adjoint() + a, i1 * (a.adjoint() - a)};
  return h;
}

double steady_state_photon_analytic(const DispersiveModel& model, QubitState q, double eps) {
  const double det = model.branch_detuning(q);
  return eps * eps / (det * det + 0.25 * model.kappa * model.kappa);
}

std::string to_string(CalibrationMethod m) {
  return m == CalibrationMethod::analytic ? "analytic-steady-state" : "numeric-steady-state";
}

double settled_photon_number(const DispersiveModel& model, double eps,
                             const CalibrationOptions& opts) {
  model.validate();
  if (!(opts.settle_kappa_times > 0.0) || !(opts.segment_dt > 0.0))
    throw Error("calibration: settle time and segment length must be > 0");
  const double t_end = opts.settle_kappa_times / model.kappa;
  const auto segments = static_cast<Index>(std::ceil(t_end / opts.segment_dt));
  const double dt = t_end / static_cast<double>(segments);
  const DensityState vacuum = fock_projector(model.fock_dim, 0);
  const Operator n = number_operator(model.fock_dim);
  double total = 0.0;
  for (const QubitState q : {QubitState::ground, QubitState::excited}) {
    const auto traj =
        propagate_forward(vacuum, constant_drive(model, q, eps, segments, dt), opts.integrator);
    total += expectation(n, traj.states.back()).real();
  }
  return 0.5 * total;
}

CalibrationResult calibrate_one_photon(const DispersiveModel& model, CalibrationMethod method,
                                       const CalibrationOptions& opts) {
  model.validate();
  double inv_mean = 0.0;
  for (const QubitState q : {QubitState::ground, QubitState::excited})
    inv_mean += 0.5 * steady_state_photon_analytic(model, q, 1.0);
  const double eps_analytic = 1.0 / std::sqrt(inv_mean);

  CalibrationResult result;
  result.method = method;
  if (method == CalibrationMethod::analytic) {
    result.eps_one_photon = eps_analytic;
    result.residual = std::abs(eps_analytic * eps_analytic * inv_mean - 1.0);
    result.scan.push_back({eps_analytic, eps_analytic * eps_analytic * inv_mean});
    return result;
  }

  const auto f = [&](double eps) {
    const double photons = settled_photon_number(model, eps, opts);
    result.scan.push_back({eps, photons});
    return photons - 1.0;
  };
  double lo = 0.0, f_lo = -1.0;
  result.scan.push_back({0.0, 0.0});
  double hi = eps_analytic;
  double f_hi = f(hi);
  for (int k = 0; f_hi < 0.0; ++k) {
    if (k >= opts.max_bracket_doublings) {
      std::ostringstream msg;
      msg << "calibration: no bracket for one photon; scan (eps rad/ns, photons):";
      for (const auto& p : result.scan) msg << " (" << p.eps << ", " << p.photons << ")";
      throw CalibrationError(msg.str());
    }
    lo = hi;
    f_lo = f_hi;
    hi *= 2.0;
    f_hi = f(hi);
  }
  std::uintmax_t iters = 100;
  const auto bracket = boost::math::tools::toms748_solve(
      f, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(40), iters);
  if (iters >= 100) throw CalibrationError("calibration: root finder did not converge");
  result.eps_one_photon = 0.5 * (bracket.first + bracket.second);
  result.residual = std::abs(f(result.eps_one_photon));
  return result;
}

double GridSpec::bandwidth() const {
  return bandwidth_3db > 0.0 ? bandwidth_3db : units::from_mhz(100.0);
}

double ResetScenario::drive_amplitude() const { return std::sqrt(p_norm) * eps_one_photon; }

double ResetScenario::measurement_time() const {
  return measurement_duration > 0.0 ? measurement_duration : 5.0 / model.kappa;
}

Index ResetScenario::n_pixels() const {
  return static_cast<Index>(std::llround(horizon / grid.pixel_dt));
}

void ResetScenario::validate() const {
  model.validate();
  if (!(horizon > 0.0)) throw Error("scenario: horizon must be > 0");
  if (!(p_norm >= 0.0)) throw Error("scenario: p_norm must be >= 0");
  if (!(eps_one_photon >= 0.0)) throw Error("scenario: eps_one_photon must be >= 0");
  if (!(grid.pixel_dt > 0.0)) throw Error("scenario: pixel_dt must be > 0");
  if (std::abs(static_cast<double>(n_pixels()) * grid.pixel_dt - horizon) > 1e-9 * horizon)
    throw GridMismatchError("scenario: horizon is not a whole number of pixels");
  if (n_pixels() < 2) throw Error("scenario: need at least two pixels");
  subpixels_per_pixel(grid.pixel_dt, grid.subpixel_dt);
  if (!(penalty_beta >= 0.0)) throw Error("scenario: penalty beta must be >= 0");
  integrator.validate();
  optimizer.validate();
}

MeasurementStates prepare_measurement_state(const ResetScenario& scenario) {
  scenario.validate();
  const auto& model = scenario.model;
  const double eps = scenario.drive_amplitude();
  const Index n_pix = std::max<Index>(1, std::llround(scenario.measurement_time() / scenario.grid.pixel_dt));

  ControlGrid pulse;
  pulse.pixel_dt = scenario.grid.pixel_dt;
  pulse.values = RealMatrix::Constant(n_pix, 1, eps);
  const auto tm = build_gaussian_transfer(n_pix, scenario.grid.pixel_dt, scenario.grid.subpixel_dt,
                                          scenario.grid.bandwidth());
  const SubpixelGrid sub = apply_filter(tm, pulse);

  MeasurementStates out;
  out.end_amplitude = eps;
  out.n_pixels = n_pix;
  for (const QubitState q : {QubitState::ground, QubitState::excited}) {
    const auto h = build_branch_hamiltonians(model, q);
    PiecewiseGenerator gen;
    gen.drift = h.drift;
    gen.control_ops = {h.controls[0]};
    gen.channels = {{model.kappa, annihilation(model.fock_dim)}};
    gen.subpixel_dt = sub.subpixel_dt;
    DensityState rho = fock_projector(model.fock_dim, 0);
    for (Index start = 0; start < sub.n_subpixels(); start += kMeasurementChunk) {
      const Index len = std::min(kMeasurementChunk, sub.n_subpixels() - start);
      gen.amplitudes = sub.values.middleRows(start, len);
      const auto traj = propagate_forward(rho, gen, scenario.integrator);
      out.leak = std::max(out.leak, max_leak(traj));
      rho = traj.states.back();
    }
    (q == QubitState::ground ? out.ground : out.excited) = rho;
  }
  if (out.leak > kLeakLimit) {
    std::ostringstream msg;
    msg << "measurement state: top-two-level population " << out.leak << " exceeds " << kLeakLimit
        << " at fock_dim " << model.fock_dim << "; increase fock_dim";
    throw TruncationError(msg.str());
  }
  return out;
}

OptimizationProblem build_reset_problem(const ResetScenario& scenario,
                                        const MeasurementStates& states, bool with_penalty) {
  scenario.validate();
  const auto& model = scenario.model;
  const auto hg = build_branch_hamiltonians(model, QubitState::ground);
  const auto he = build_branch_hamiltonians(model, QubitState::excited);
  OptimizationProblem p;
  p.branches = {{states.ground, hg.drift, 1.0, "ground"}, {states.excited, he.drift, 1.0, "excited"}};
  p.control_ops.assign(hg.controls.begin(), hg.controls.begin() + scenario.n_controls());
  p.channels = {{model.kappa, annihilation(model.fock_dim)}};
  p.objective = {ObjectiveKind::target_overlap, fock_projector(model.fock_dim, 0)};
  if (with_penalty && scenario.penalty_beta > 0.0)
    p.penalties = {{number_operator(model.fock_dim), scenario.penalty_beta}};
  p.filter = build_gaussian_transfer(scenario.n_pixels(), scenario.grid.pixel_dt,
                                     scenario.grid.subpixel_dt, scenario.grid.bandwidth());
  p.integrator = scenario.integrator;
  return p;
}

ControlGrid pinned_zero_pulse(const ResetScenario& scenario, const MeasurementStates& states) {
  ControlGrid g;
  g.pixel_dt = scenario.grid.pixel_dt;
  g.values = RealMatrix::Zero(scenario.n_pixels(), scenario.n_controls());
  g.values(0, 0) = states.end_amplitude;
  g.pinned.assign(static_cast<std::size_t>(scenario.n_controls()), PinMask{true, true});
  return g;
}

ClearSearch clear_initial_guess(const ResetScenario& scenario, const MeasurementStates& states) {
  const double eps = scenario.drive_amplitude();
  ClearSearch out;
  out.guess = pinned_zero_pulse(scenario, states);
  const Index n = scenario.n_pixels();
  const Index half = n / 2;

  if (eps > 0.0) {
    OptimizationProblem problem = build_reset_problem(scenario, states, false);
    problem.control_ops.resize(1);
    ControlGrid x;
    x.pixel_dt = scenario.grid.pixel_dt;
    x.values = out.guess.values.leftCols(1);
    x.pinned = {PinMask{true, true}};
    const auto set = [&](double a1, double a2) {
      for (Index j = 1; j < n - 1; ++j) x.values(j, 0) = j < half ? a1 : a2;
    };
    const auto phi0 = [&](double a1, double a2) {
      set(a1, a2);
      ++out.evaluations;
      try {
        return simulate(problem, x).phi0;
      } catch (const IntegrationFailure&) {
        return -std::numeric_limits<double>::infinity();
      }
    };

    double a[2] = {0.0, 0.0};
    double best = phi0(a[0], a[1]);
    double step = 0.5 * eps;
    const double min_step = 1e-4 * eps;
    while (out.evaluations < scenario.clear_max_evaluations && step > min_step) {
      bool improved = false;
      for (int c = 0; c < 2 && !improved; ++c) {
        for (const double sign : {1.0, -1.0}) {
          if (out.evaluations >= scenario.clear_max_evaluations) break;
          double t[2] = {a[0], a[1]};
          t[c] += sign * step;
          const double v = phi0(t[0], t[1]);
          if (v > best) {
            best = v;
            a[0] = t[0];
            a[1] = t[1];
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    if (std::isfinite(best)) {
      out.a1 = a[0];
      out.a2 = a[1];
      out.phi0 = best;
      set(a[0], a[1]);
      out.guess.values.col(0) = x.values.col(0);
    }
  }

  if (scenario.quadratures == Quadratures::x_and_y) {
    std::mt19937_64 rng(scenario.seed);
    std::uniform_real_distribution<double> u(-0.1 * eps, 0.1 * eps);
    for (Index j = 1; j < n - 1; ++j) out.guess.values(j, 1) = eps > 0.0 ? u(rng) : 0.0;
  }
  return out;
}

std::string to_string(ResetMode m) {
  switch (m) {
    case ResetMode::passive: return "passive";
    case ResetMode::clear: return "clear";
    case ResetMode::grape: return "grape";
    case ResetMode::grape_penalized: return "grape_penalized";
  }
  return "unknown";
}

ResetMode parse_reset_mode(const std::string& s) {
  for (const ResetMode m :
       {ResetMode::passive, ResetMode::clear, ResetMode::grape, ResetMode::grape_penalized})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown mode '" + s + "' (passive|clear|grape|grape_penalized)");
}

namespace {

void finish_report(const ResetScenario& scenario, const MeasurementStates& states,
                   const OptimizationProblem& problem, bool polyfit, ResetReport& r) {
  r.filtered = apply_filter(problem.filter, r.pulse);
  const Simulation sim = simulate_subpixels(problem, r.filtered);
  r.phi = sim.phi;
  r.phi0 = sim.phi0;
  for (double p : sim.phi_p) r.phi_p += p;
  r.overlaps = sim.overlaps;
  r.rk_steps = sim.rk_steps;
  r.n_subpixels = r.filtered.n_subpixels();
  r.rk_steps_per_subpixel =
      static_cast<double>(sim.rk_steps) / (2.0 * static_cast<double>(r.n_subpixels));

  const Operator n = number_operator(scenario.model.fock_dim);
  r.n_ground = photon_series(sim.forward[0], n);
  r.n_excited = photon_series(sim.forward[1], n);
  r.time_ns.resize(r.n_ground.size());
  for (std::size_t k = 0; k < r.time_ns.size(); ++k)
    r.time_ns[k] = static_cast<double>(k) * scenario.grid.subpixel_dt;
  r.initial_ground = r.n_ground.front();
  r.initial_excited = r.n_excited.front();
  r.final_ground = r.n_ground.back();
  r.final_excited = r.n_excited.back();
  r.max_ground = *std::max_element(r.n_ground.begin(), r.n_ground.end());
  r.max_excited = *std::max_element(r.n_excited.begin(), r.n_excited.end());
  r.max_leak = std::max({states.leak, max_leak(sim.forward[0]), max_leak(sim.forward[1])});
  r.truncation_ok = r.max_leak < kLeakLimit;

  if (polyfit && r.mode != ResetMode::passive) {
    const Simulation fit = simulate(problem, polynomial_fit(r.pulse, scenario.polyfit_degree));
    r.polyfit_final_ground = expectation(n, fit.forward[0].states.back()).real();
    r.polyfit_final_excited = expectation(n, fit.forward[1].states.back()).real();
  }

}

OptimizeResult run_grape(const OptimizationProblem& problem, const ControlGrid& initial,
                         const ResetScenario& scenario, const ProgressFn& progress) {
  OptimizerConfig cfg = scenario.optimizer;
  const double eps = scenario.drive_amplitude();
  if (eps > 0.0) cfg.initial_step = scenario.initial_step_fraction * eps;
  cfg.seed = scenario.seed;
  return optimize(problem, initial, cfg, progress);
}

}  // namespace

ResetReport run_reset(const ResetScenario& scenario, ResetMode mode, const ResetOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  scenario.validate();
  const MeasurementStates states = prepare_measurement_state(scenario);
  const OptimizationProblem problem =
      build_reset_problem(scenario, states, mode == ResetMode::grape_penalized);

  ResetReport r;
  r.mode = mode;
  r.eps_one_photon = scenario.eps_one_photon;
  r.drive_amplitude = scenario.drive_amplitude();
  r.horizon = scenario.horizon;

  const auto absorb = [&r](const OptimizeResult& opt) {
    r.pulse = opt.controls;
    r.history = opt.state.history;
    r.iterations = opt.state.iteration;
    r.stalled = opt.state.stalled;
    r.stop_reason = to_string(opt.state.reason);
  };

  switch (mode) {
    case ResetMode::passive:
      r.pulse = pinned_zero_pulse(scenario, states);
      r.pulse.values.setZero();
      break;
    case ResetMode::clear: {
      ResetScenario x_only = scenario;
      x_only.quadratures = Quadratures::x_only;
      const auto search = clear_initial_guess(x_only, states);
      r.pulse = pinned_zero_pulse(scenario, states);
      r.pulse.values.col(0) = search.guess.values.col(0);
      break;
    }
    case ResetMode::grape: {
      const ControlGrid init =
          options.initial ? *options.initial : clear_initial_guess(scenario, states).guess;
      absorb(run_grape(problem, init, scenario, options.progress));
      break;
    }
    case ResetMode::grape_penalized: {
      ControlGrid init;
      if (options.initial) {
        init = *options.initial;
      } else {
        const auto plain = build_reset_problem(scenario, states, false);
        init = run_grape(plain, clear_initial_guess(scenario, states).guess, scenario,
                         options.progress)
                   .controls;
      }
      absorb(run_grape(problem, init, scenario, options.progress));
      break;
    }
  }

  finish_report(scenario, states, problem, options.polyfit, r);
  r.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

ResetReport simulate_reset(const ResetScenario& scenario, const ControlGrid& pulse, bool polyfit) {
  const auto t0 = std::chrono::steady_clock::now();
  scenario.validate();
  pulse.validate();
  if (pulse.n_pixels() != scenario.n_pixels() || pulse.n_controls() != scenario.n_controls())
    throw ShapeError("simulate_reset: pulse shape does not match the scenario grid");
  const MeasurementStates states = prepare_measurement_state(scenario);
  const OptimizationProblem problem = build_reset_problem(scenario, states, scenario.penalty_beta > 0.0);
  ResetReport r;
  r.mode = ResetMode::passive;
  r.eps_one_photon = scenario.eps_one_photon;
  r.drive_amplitude = scenario.drive_amplitude();
  r.horizon = scenario.horizon;
  r.pulse = pulse;
  finish_report(scenario, states, problem, polyfit, r);
  r.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

bool reset_failed(double final_ground, double final_excited, double threshold, double ratio,
                  double ratio_floor) {
  const double hi = std::max(final_ground, final_excited);
  const double lo = std::max(std::min(final_ground, final_excited), 0.0);
  if (!std::isfinite(hi) || hi > threshold) return true;
  return hi >= ratio_floor && hi > ratio * lo;
}

SweepResult speed_limit_sweep(const ResetScenario& base, const std::vector<double>& p_norms,
                              const std::vector<double>& horizons, int jobs) {
  if (p_norms.empty() || horizons.empty()) throw Error("sweep: p_norm and horizon lists must be non-empty");
  SweepResult out;
  out.p_norms = p_norms;
  std::sort(out.p_norms.begin(), out.p_norms.end());
  std::vector<double> ts = horizons;
  std::sort(ts.begin(), ts.end());

  for (double p : out.p_norms)
    for (double t : ts) {
      SweepPoint pt;
      pt.p_norm = p;
      pt.horizon = t;
      out.points.push_back(pt);
    }

  const Execution exec = jobs == 1 ? Execution::serial : Execution::parallel;
  for_each_index(
      out.points.size(), exec,
      [&](std::size_t i) {
        SweepPoint& pt = out.points[i];
        ResetScenario s = base;
        s.p_norm = pt.p_norm;
        s.horizon = pt.horizon;
        s.penalty_beta = 0.0;
        try {
          const auto r = run_reset(s, ResetMode::grape);
          pt.final_ground = r.final_ground;
          pt.final_excited = r.final_excited;
          pt.stalled = r.stalled;
          pt.failed = reset_failed(r.final_ground, r.final_excited);
        } catch (const Error& e) {
          pt.failed = true;
          pt.error = e.what();
        }
      },
      jobs > 0 ? jobs : 0);

  std::vector<double> fit_p, fit_t;
  for (double p : out.p_norms) {
    double t_star = std::numeric_limits<double>::quiet_NaN();
    for (const auto& pt : out.points) {
      if (pt.p_norm == p && !pt.failed) {
        t_star = pt.horizon;
        break;
      }
    }
    out.speed_limit.push_back(t_star);
    if (std::isfinite(t_star) && p > 0.0) {
      if (!fit_t.empty() && t_star < fit_t.back()) out.monotone = false;
      fit_p.push_back(p);
      fit_t.push_back(t_star);
    }
  }
  if (fit_p.size() >= 2) {
    out.fit = fit_power_law(fit_p, fit_t);
    out.fit_valid = true;
  }
  return out;
}

}  // namespace rkgrape
