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

// Acceptance runner. Prints one PASS/FAIL line per criterion of the selected
// group and exits non-zero if any criterion fails.
//
//   acceptance --group fast       A1 A3 A7
//   acceptance --group benchmark  A5
//   acceptance --group reset      A2 A8 A4
//   acceptance --group sweep      A6
//   acceptance --group all

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rkgrape/config.hpp"
#include "rkgrape/cqed.hpp"
#include "rkgrape/grape.hpp"
#include "rkgrape/io.hpp"
#include "rkgrape/liouville.hpp"
#include "rkgrape/optimizer.hpp"
#include "rkgrape/units.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace rkgrape;
using rkgrape::testing::Rng;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& id, const std::string& title, const Outcome& o) {
  std::cout << id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << title << "  [" << o.detail << "]"
            << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

PiecewiseGenerator random_generator(Rng& rng, Index d, Index m, double dt) {
  PiecewiseGenerator g;
  g.drift = rng.hermitian(d);
  g.control_ops = {rng.hermitian(d), rng.hermitian(d)};
  g.channels = {{rng.uniform(0.05, 0.5), rng.complex_matrix(d, 0.5)},
                {rng.uniform(0.0, 0.3), rng.complex_matrix(d, 0.5)}};
  g.amplitudes.resize(m, 2);
  for (Index n = 0; n < m; ++n)
    for (Index k = 0; k < 2; ++k) g.amplitudes(n, k) = rng.uniform();
  g.subpixel_dt = dt;
  return g;
}

// A1: RK propagation against Liouville exponentials, state by state.
Outcome a1_oracle_equivalence() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  for (int p = 0; p < 50; ++p) {
    const Index d = 2 + p % 7;
    const Index n_pix = 10;
    const auto gen = random_generator(rng, d, n_pix, 0.5);
    const DensityState rho0 = rng.density(d);
    const Trajectory traj = propagate_forward(rho0, gen, IntegratorConfig{});
    DensityState rho = rho0;
    for (Index n = 0; n < n_pix; ++n) {
      Operator h = gen.drift;
      for (std::size_t k = 0; k < gen.control_ops.size(); ++k)
        h += gen.amplitudes(n, static_cast<Index>(k)) * gen.control_ops[k];
      rho = rkgrape::apply(expm_propagator(build_superoperator(h, gen.channels), gen.subpixel_dt), rho);
      worst = std::max(worst, trace_distance(traj.states[static_cast<std::size_t>(n + 1)], rho));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-8 && secs < 60.0,
          "max trace distance " + fmt(worst) + " (<= 1e-8), " + fmt(secs, 3) + " s (< 60 s)"};
}

struct GradientCheck {
  double worst_error = 0.0;
  double worst_ratio = std::numeric_limits<double>::infinity();
  bool pass = true;
};

// A3: first-order gradient contract on 20 seeded problems, objective and penalty,
// each scaled so the largest generator norm times the subpixel width matches
// the reset problem's.
Outcome a3_gradients() {
  const auto t0 = Clock::now();
  const double h = 1e-5;
  GradientCheck index_check, penalty_check;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(9000 + static_cast<std::uint64_t>(seed));
    const Index r = 1 + seed % 2;
    auto p = testing::random_problem(rng, 4, r, 6, 0.2);
    const Operator obs = number_operator(4);
    ControlGrid u;
    u.values.resize(6, r);
    for (Index j = 0; j < 6; ++j)
      for (Index k = 0; k < r; ++k) u.values(j, k) = rng.uniform(-0.5, 0.5);
    u.pixel_dt = testing::application_pixel_dt(p, u.values, 5);

    double e_idx[2], e_pen[2];
    for (int level = 0; level < 2; ++level) {
      auto q = p;
      q.filter = build_piecewise_transfer(6, u.pixel_dt, u.pixel_dt / (level == 0 ? 5.0 : 10.0));
      const SubpixelGrid s = apply_filter(q.filter, u);
      const RealMatrix g = compute_subpixel_gradient(q, s).subpixel_gradient;
      const RealMatrix fd = testing::central_difference(
          [&](const SubpixelGrid& w) { return simulate_subpixels(q, w).phi; }, s, h);
      e_idx[level] = testing::rel_inf_error(g, fd);
      const RealMatrix gp = photon_penalty_gradient(q, s, obs);
      const RealMatrix fdp = testing::central_difference(
          [&](const SubpixelGrid& w) {
            return photon_penalty(simulate_subpixels(q, w).forward, obs, w.subpixel_dt);
          },
          s, h);
      e_pen[level] = testing::rel_inf_error(gp, fdp);
    }
    for (auto [check, e] : {std::pair{&index_check, e_idx}, std::pair{&penalty_check, e_pen}}) {
      check->worst_error = std::max(check->worst_error, e[0]);
      check->worst_ratio = std::min(check->worst_ratio, e[0] / e[1]);
      check->pass = check->pass && e[0] <= 1e-2 && e[0] / e[1] >= 1.5;
    }
  }
  return {index_check.pass && penalty_check.pass,
          "index: max rel err " + fmt(index_check.worst_error) + ", min halving ratio " +
              fmt(index_check.worst_ratio) + "; penalty: max rel err " + fmt(penalty_check.worst_error) +
              ", min halving ratio " + fmt(penalty_check.worst_ratio) + " (<= 1e-2, >= 1.5); ||L|| dt = " + fmt(testing::kApplicationGeneratorStep) + "; " +
              fmt(seconds_since(t0), 3) + " s"};
}

// A7: compact pass over the module invariants.
Outcome a7_invariants() {
  const auto t0 = Clock::now();
  Rng rng(77);
  std::vector<std::string> failed;
  const auto require = [&](bool ok, const std::string& what) {
    if (!ok && std::find(failed.begin(), failed.end(), what) == failed.end()) failed.push_back(what);
  };

  for (int t = 0; t < 100; ++t) {
    const Index d = rng.integer(2, 8);
    const Operator h = rng.hermitian(d);
    const std::vector<DissipationChannel> ch{{rng.uniform(0.0, 2.0), rng.complex_matrix(d)},
                                             {rng.uniform(0.0, 2.0), rng.complex_matrix(d)}};
    const DensityState rho = rng.hermitian(d);
    const Matrix lam = rng.complex_matrix(d), x = rng.complex_matrix(d);
    const DensityState out = lindblad_rhs(rho, h, ch);
    const double scale = std::max(1.0, max_abs(out));
    require(std::abs(lindblad_rhs(x, h, ch).trace()) <= 1e-12 * std::max(1.0, max_abs(lindblad_rhs(x, h, ch))),
            "trace annihilation");
    require(hermiticity_defect(out) <= 1e-13 * scale, "Hermiticity preservation");
    require(max_abs(lindblad_adjoint_rhs(Matrix::Identity(d, d), h, ch)) <= 1e-11, "adjoint unitality");
    const Complex lhs = hs_inner(lam, lindblad_rhs(x, h, ch));
    const Complex rhs = hs_inner(lindblad_adjoint_rhs(lam, h, ch), x);
    require(std::abs(lhs - rhs) <= 1e-11 * std::max(1.0, std::abs(lhs)), "adjointness");
  }

  for (int t = 0; t < 10; ++t) {
    const Index d = rng.integer(2, 6);
    auto gen = random_generator(rng, d, 40, 0.1);
    const DensityState rho0 = rng.density(d);
    const Trajectory f = propagate_forward(rho0, gen, IntegratorConfig{});
    require(max_trace_error(f) <= 1e-6, "trace preservation");
    for (const auto& s : f.states) require(hermiticity_defect(s) <= 1e-8, "trajectory Hermiticity");
    for (Index n = 1; n < gen.n_subpixels(); ++n) gen.amplitudes.row(n) = gen.amplitudes.row(0);
    const Trajectory fc = propagate_forward(rho0, gen, IntegratorConfig{});
    const Trajectory bc = propagate_backward(rng.hermitian(d), gen, IntegratorConfig{});
    const Complex ref = expectation(bc.states[0], fc.states[0]);
    for (std::size_t k = 0; k < fc.states.size(); ++k)
      require(std::abs(expectation(bc.states[k], fc.states[k]) - ref) <= 1e-8, "pairing conservation");
    const Trajectory again = propagate_forward(rho0, gen, IntegratorConfig{});
    require((again.states.back().array() == fc.states.back().array()).all(), "seeded determinism");
  }

  {
    const auto tm = build_gaussian_transfer(40, 1.0, 0.1, units::from_mhz(100.0));
    const double w0 = tm.reference_bandwidth;
    for (Index n = 0; n < tm.n_subpixels(); ++n) {
      const double t = static_cast<double>(n) * tm.subpixel_dt;
      const double closed = 1.0 - 0.5 * std::erfc(0.5 * w0 * t) - 0.5 * std::erfc(0.5 * w0 * (40.0 - t));
      require(std::abs(tm.entries.row(n).sum() - closed) <= 1e-12, "filter row sums");
      if (t >= 7.0 / w0 && 40.0 - t >= 7.0 / w0)
        require(std::abs(tm.entries.row(n).sum() - 1.0) <= 1e-6, "filter DC gain");
    }
    ControlGrid u;
    u.pixel_dt = 1.0;
    u.values.resize(40, 2);
    RealMatrix g(tm.n_subpixels(), 2);
    for (Index j = 0; j < 40; ++j)
      for (Index k = 0; k < 2; ++k) u.values(j, k) = rng.uniform();
    for (Index n = 0; n < g.rows(); ++n)
      for (Index k = 0; k < 2; ++k) g(n, k) = rng.uniform();
    const double lhs = (g.array() * apply_filter(tm, u).values.array()).sum();
    const double rhs = (backprop_gradient(tm, g).array() * u.values.array()).sum();
    require(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)), "filter transpose consistency");
  }

  {
    auto p = testing::random_problem(rng, 3, 2, 8, 0.25);
    ControlGrid u;
    u.pixel_dt = 1.0;
    u.values = RealMatrix::Zero(8, 2);
    for (Index j = 1; j < 7; ++j)
      for (Index k = 0; k < 2; ++k) u.values(j, k) = rng.uniform(-0.3, 0.3);
    u.values(0, 0) = 0.4;
    u.pinned = {{true, true}, {true, true}};
    OptimizerConfig cfg;
    cfg.max_iters = 8;
    cfg.initial_step = 0.05;
    const auto r = optimize(p, u, cfg);
    require(r.controls.values(0, 0) == 0.4 && r.controls.values(7, 0) == 0.0 &&
                r.controls.values(0, 1) == 0.0 && r.controls.values(7, 1) == 0.0,
            "pinning exactness");
    const auto r2 = optimize(p, u, cfg);
    require((r.controls.values.array() == r2.controls.values.array()).all(), "seeded determinism");
    for (std::size_t i = 1; i < r.state.history.size(); ++i)
      require(r.state.history[i].phi >= r.state.history[i - 1].phi, "monotone optimizer history");
  }

  std::string detail = failed.empty() ? "all invariants hold" : "violated:";
  for (const auto& f : failed) detail += " " + f + ";";
  return {failed.empty(), detail + " " + fmt(seconds_since(t0), 3) + " s"};
}

// A5: complexity of the two propagation paths.
Outcome a5_complexity() {
  BenchmarkConfig cfg;
  const auto b = benchmark_scaling(cfg);
  bool faster = true;
  std::string rows;
  double worst_td = 0.0;
  for (const auto& r : b.rows) {
    if (r.d >= 32) faster = faster && r.t_rk_ms < r.t_expm_ms;
    worst_td = std::max(worst_td, r.trace_dist);
    rows += " d=" + std::to_string(r.d) + ":" + fmt(r.t_expm_ms, 3) + "/" + fmt(r.t_rk_ms, 3) + "ms";
  }
  const double ae = b.expm_fit.exponent, ar = b.rk_fit.exponent;
  const bool pass = ae >= 4.5 && ae <= 6.5 && ar >= 1.5 && ar <= 3.5 && faster;
  return {pass, "expm exponent " + fmt(ae) + " in [4.5,6.5], rk exponent " + fmt(ar) +
                    " in [1.5,3.5], rk faster at d>=32: " + (faster ? "yes" : "no") +
                    "; expm/rk" + rows + "; max trace distance " + fmt(worst_td)};
}

ResetScenario scenario_from(const fs::path& config) {
  const ScenarioConfig cfg = load_config(config);
  CalibrationOptions opts;
  opts.integrator = to_integrator(cfg);
  const double eps = cfg.eps_one_photon_mhz
                         ? units::from_mhz(*cfg.eps_one_photon_mhz)
                         : calibrate_one_photon(to_model(cfg), cfg.calibration, opts).eps_one_photon;
  return to_scenario(cfg, eps);
}

void progress_line(const IterationRecord& rec) {
  if (rec.iter % 10 == 0)
    std::cerr << "  iter " << rec.iter << " phi " << std::setprecision(10) << rec.phi << std::endl;
}

void run_reset_group(const fs::path& configs) {
  const auto t0 = Clock::now();
  const ResetScenario s = scenario_from(configs / "reset_p4_T300.json");
  ResetOptions opts;
  opts.progress = progress_line;
  const ResetReport grape = run_reset(s, ResetMode::grape, opts);
  const ResetReport passive = run_reset(s, ResetMode::passive);
  const double secs = seconds_since(t0);
  const bool grape_ok = grape.final_ground < 1e-3 && grape.final_excited < 1e-3;
  const auto in_band = [](double v) { return v >= 0.3 && v <= 3.0; };
  const bool passive_ok = in_band(passive.final_ground) && in_band(passive.final_excited);
  report("A2", "reset at P_norm=4, T=300 ns",
         {grape_ok && passive_ok && grape.truncation_ok,
          "GRAPE final <n> g=" + fmt(grape.final_ground) + " e=" + fmt(grape.final_excited) +
              " (< 1e-3); passive g=" + fmt(passive.final_ground) + " e=" + fmt(passive.final_excited) +
              " (in [0.3,3]); " + std::to_string(grape.iterations) + " iterations, stop " +
              grape.stop_reason + ", leak " + fmt(grape.max_leak) + ", eps_1ph/2pi " +
              fmt(units::to_mhz(s.eps_one_photon), 6) + " MHz, " + fmt(secs, 4) + " s"});

  const double nrk = grape.rk_steps_per_subpixel;
  report("A8", "n_RK/M of the A2 run",
         {nrk >= 10.0 && nrk <= 100.0,
          "n_RK/M = " + fmt(nrk) + " (bracket [10,100]); " + std::to_string(grape.rk_steps) +
              " forward steps over " + std::to_string(grape.n_subpixels) + " subpixels x 2 branches; " +
              fmt(nrk * static_cast<double>(grape.n_subpixels) / static_cast<double>(s.n_pixels())) +
              " per pixel"});

  const auto t1 = Clock::now();
  const ResetScenario sp = scenario_from(configs / "penalized_p6_T80.json");
  const ResetReport pen = run_reset(sp, ResetMode::grape_penalized, opts);
  const double max_n = std::max(pen.max_ground, pen.max_excited);
  const bool pen_ok = max_n < 29.0 && pen.final_ground <= 0.5 && pen.final_excited <= 0.5;
  report("A4", "penalized reset at P_norm=6, T=80 ns, beta=0.2/T",
         {pen_ok && pen.truncation_ok,
          "max <n> " + fmt(max_n) + " (< 29); final g=" + fmt(pen.final_ground) + " e=" +
              fmt(pen.final_excited) + " (<= 0.5); leak " + fmt(pen.max_leak) + ", " +
              fmt(seconds_since(t1), 4) + " s"});
}

Outcome a6_sweep(const fs::path& configs) {
  const auto t0 = Clock::now();
  const ScenarioConfig cfg = load_config(configs / "sweep.json");
  ScenarioConfig base_cfg = cfg;
  base_cfg.horizon_ns = cfg.sweep_horizon_ns.front();
  CalibrationOptions opts;
  opts.integrator = to_integrator(cfg);
  const double eps = calibrate_one_photon(to_model(cfg), cfg.calibration, opts).eps_one_photon;
  const SweepResult s = speed_limit_sweep(to_scenario(base_cfg, eps), cfg.sweep_p_norm, cfg.sweep_horizon_ns);
  std::string table;
  for (std::size_t i = 0; i < s.p_norms.size(); ++i)
    table += " P=" + fmt(s.p_norms[i]) + ":T*=" + fmt(s.speed_limit[i]);
  const double alpha = s.fit.exponent;
  return {s.fit_valid && alpha >= 0.4 && alpha <= 0.9,
          "alpha = " + fmt(alpha) + " +- " + fmt(s.fit.exponent_stderr) + " (in [0.4,0.9]);" + table +
              (s.monotone ? "" : "; T* not monotone") + "; " + fmt(seconds_since(t0), 5) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rkgrape acceptance criteria"};
  std::string group = "fast";
  std::string configs = std::string(RKGRAPE_SOURCE_DIR) + "/configs";
  app.add_option("--group", group, "fast | benchmark | reset | sweep | all")
      ->check(CLI::IsMember({"fast", "benchmark", "reset", "sweep", "all"}));
  app.add_option("--configs", configs, "Directory with the scenario configs")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const bool all = group == "all";
  try {
    if (all || group == "fast") {
      report("A1", "RK vs Liouville exponential on 50 random problems", a1_oracle_equivalence());
      report("A3", "gradient correctness on 20 seeded problems", a3_gradients());
      report("A7", "invariant suite", a7_invariants());
    }
    if (all || group == "benchmark") report("A5", "expm vs RK complexity", a5_complexity());
    if (all || group == "reset") run_reset_group(configs);
    if (all || group == "sweep") report("A6", "speed-limit trend", a6_sweep(configs));
  } catch (const std::exception& e) {
    std::cout << "ERROR " << e.what() << std::endl;
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
