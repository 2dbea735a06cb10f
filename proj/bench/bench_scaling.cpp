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

// Timing harness: Liouville expm vs RK propagation over d, and the serial
// vs OpenMP branch-parallel gradient on a two-branch reset problem.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <vector>

#include <CLI11.hpp>

#include "rkgrape/cqed.hpp"
#include "rkgrape/grape.hpp"
#include "rkgrape/liouville.hpp"
#include "rkgrape/parallel.hpp"
#include "rkgrape/units.hpp"

using namespace rkgrape;

namespace {

double time_gradient(const OptimizationProblem& problem, const ControlGrid& controls, int reps,
                     double& phi) {
  std::vector<double> times;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    phi = compute_gradient(problem, controls).phi;
    times.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rkgrape scaling benchmark"};
  std::vector<Index> dims{8, 12, 16, 24, 32, 48};
  Index pixels = 100;
  int reps = 3;
  std::string csv;
  bool skip_scaling = false;
  Index grad_dim = 20;
  app.add_option("--dims", dims, "Hilbert-space dimensions")->capture_default_str();
  app.add_option("--pixels", pixels, "Pixels N")->capture_default_str();
  app.add_option("--reps", reps, "Timed repetitions")->capture_default_str();
  app.add_option("--csv", csv, "Write the scaling table here");
  app.add_option("--grad-dim", grad_dim, "Fock dimension of the gradient benchmark")
      ->capture_default_str();
  app.add_flag("--skip-scaling", skip_scaling, "Only run the gradient benchmark");
  CLI11_PARSE(app, argc, argv);

  if (!skip_scaling) {
    BenchmarkConfig cfg;
    cfg.dims = dims;
    cfg.n_pixels = pixels;
    cfg.repetitions = reps;
    const auto result = benchmark_scaling(cfg);
    write_benchmark_csv(std::cout, result);
    if (result.rows.size() >= 2)
      std::cout << "expm exponent " << result.expm_fit.exponent << " +- "
                << result.expm_fit.exponent_stderr << ", rk exponent " << result.rk_fit.exponent
                << " +- " << result.rk_fit.exponent_stderr << '\n';
    if (!csv.empty()) {
      std::ofstream out(csv);
      write_benchmark_csv(out, result);
    }
  }

  ResetScenario s;
  s.model = DispersiveModel::reference();
  s.model.fock_dim = grad_dim;
  s.p_norm = 2.0;
  s.horizon = 100.0;
  s.eps_one_photon = units::from_mhz(1.4116);
  const auto states = prepare_measurement_state(s);
  OptimizationProblem problem = build_reset_problem(s, states, false);
  const ControlGrid controls = clear_initial_guess(s, states).guess;
  double phi_serial = 0.0, phi_parallel = 0.0;
  problem.execution = Execution::serial;
  const double t_serial = time_gradient(problem, controls, reps, phi_serial);
  problem.execution = Execution::parallel;
  const double t_parallel = time_gradient(problem, controls, reps, phi_parallel);
  std::cout << "gradient d=" << grad_dim << " M=" << s.n_pixels() * 10 << ": serial " << t_serial
            << " ms, parallel " << t_parallel << " ms on " << available_threads()
            << " thread(s), |dphi| " << std::abs(phi_serial - phi_parallel) << '\n';
  return 0;
}
