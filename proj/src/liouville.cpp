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

#include "rkgrape/liouville.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>

#include <unsupported/Eigen/MatrixFunctions>

#include "rkgrape/error.hpp"
#include "rkgrape/units.hpp"

namespace rkgrape {

namespace {

constexpr double kOverflowNorm = 1e12;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

class ScopedEigenThreads {
 public:
  explicit ScopedEigenThreads(int n) : saved_(Eigen::nbThreads()) { Eigen::setNbThreads(n); }
  ~ScopedEigenThreads() { Eigen::setNbThreads(saved_); }
  ScopedEigenThreads(const ScopedEigenThreads&) = delete;
  ScopedEigenThreads& operator=(const ScopedEigenThreads&) = delete;

 private:
  int saved_;
};

}  // namespace

Eigen::VectorXcd vec(const Matrix& m) {
  return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size());
}

Matrix unvec(const Eigen::VectorXcd& v, Index dim) {
  if (v.size() != dim * dim) throw ShapeError("unvec: length is not dim^2");
  return Eigen::Map<const Matrix>(v.data(), dim, dim);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Superoperator build_superoperator(const Operator& hamiltonian,
                                  std::span<const DissipationChannel> channels) {
  const Index d = hamiltonian.rows();
  require_dim(hamiltonian, d, "hamiltonian");
  const Complex i1(0.0, 1.0);
  const Matrix id = Matrix::Identity(d, d);
  Superoperator l;
  l.dim = d;
  l.entries = -i1 * (kron(id, hamiltonian) - kron(hamiltonian.transpose(), id));
  for (const auto& ch : channels) {
    require_dim(ch.collapse, d, "collapse operator");
    if (ch.rate == 0.0) continue;
    const Matrix& a = ch.collapse;
    const Matrix ada = a.adjoint() * a;
    l.entries += ch.rate * (kron(a.conjugate(), a) - 0.5 * kron(id, ada) -
                            0.5 * kron(ada.transpose(), id));
  }
  return l;
}

Superoperator expm_propagator(const Superoperator& l, double dt) {
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw Error("expm_propagator: dt must be finite and >= 0");
  const Index n = l.entries.rows();
  Superoperator p;
  p.dim = l.dim;
  if (dt == 0.0) {
    p.entries = Matrix::Identity(n, n);
    return p;
  }
  const Matrix scaled = l.entries * dt;
  const double norm1 = scaled.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1) || norm1 > kOverflowNorm)
    throw OverflowError("expm_propagator: ||L dt||_1 too large for a stable exponential");
  p.entries = scaled.exp();
  if (!p.entries.allFinite()) throw OverflowError("expm_propagator: non-finite result");
  return p;
}

DensityState apply(const Superoperator& p, const DensityState& rho) {
  require_dim(rho, p.dim, "state");
  return unvec(p.entries * vec(rho), p.dim);
}

DensityState propagate_liouville(const DensityState& initial, const PiecewiseGenerator& gen) {
  gen.validate();
  require_dim(initial, gen.dim(), "initial state");
  Eigen::VectorXcd v = vec(initial);
  for (Index n = 0; n < gen.n_subpixels(); ++n) {
    const auto prop = expm_propagator(build_superoperator(gen.hamiltonian(n), gen.channels),
                                      gen.subpixel_dt);
    v = prop.entries * v;
  }
  return unvec(v, gen.dim());
}

PiecewiseGenerator benchmark_generator(Index dim, Index n_pixels, double pixel_dt) {
  if (n_pixels < 1) throw Error("benchmark: need at least one pixel");
  const double detuning = units::from_mhz(2.0);
  const double kappa = units::from_mhz(1.0);
  const double drive = units::from_mhz(1.0);
  const Operator a = annihilation(dim);
  PiecewiseGenerator gen;
  gen.drift = detuning * number_operator(dim);
  gen.control_ops = {a + a.adjoint()};
  gen.channels = {{kappa, a}};
  gen.subpixel_dt = pixel_dt;
  gen.amplitudes.resize(n_pixels, 1);
  for (Index j = 0; j < n_pixels; ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(n_pixels);
    gen.amplitudes(j, 0) = drive * (0.5 + std::sin(units::kTwoPi * 3.0 * x));
  }
  return gen;
}

BenchmarkResult benchmark_scaling(const BenchmarkConfig& cfg) {
  if (cfg.dims.empty() || cfg.repetitions < 1 || cfg.n_states < 1)
    throw Error("benchmark: dims, repetitions and n_states must be non-empty/positive");
  cfg.integrator.validate();
  ScopedEigenThreads serial(1);
  using clock = std::chrono::steady_clock;
  const auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  // Repetitions stop early once a path has used this much wall time.
  constexpr double kRepeatBudgetMs = 20'000.0;

  BenchmarkResult result;
  for (const Index d : cfg.dims) {
    const auto gen = benchmark_generator(d, cfg.n_pixels, cfg.pixel_dt);
    std::vector<DensityState> initial;
    for (int s = 0; s < cfg.n_states; ++s) initial.push_back(fock_projector(d, s % d));

    std::vector<DensityState> final_expm(initial.size()), final_rk(initial.size());
    const auto run_expm = [&](Index n_pixels) {
      std::vector<Eigen::VectorXcd> v;
      for (const auto& rho : initial) v.push_back(vec(rho));
      for (Index n = 0; n < n_pixels; ++n) {
        const auto prop = expm_propagator(build_superoperator(gen.hamiltonian(n), gen.channels),
                                          gen.subpixel_dt);
        for (auto& x : v) x = prop.entries * x;
      }
      for (std::size_t s = 0; s < v.size(); ++s) final_expm[s] = unvec(v[s], d);
    };
    std::int64_t n_rk = 0;
    const auto run_rk = [&](const PiecewiseGenerator& g) {
      n_rk = 0;
      for (std::size_t s = 0; s < initial.size(); ++s) {
        auto traj = propagate_forward(initial[s], g, cfg.integrator);
        n_rk += traj.rk_step_count;
        final_rk[s] = traj.states.back();
      }
    };

    // Warm-up: one pixel of each path.
    run_expm(1);
    {
      PiecewiseGenerator short_gen = gen;
      short_gen.amplitudes = gen.amplitudes.topRows(1);
      run_rk(short_gen);
    }

    std::vector<double> t_expm, t_rk;
    double spent = 0.0;
    for (int r = 0; r < cfg.repetitions && (r == 0 || spent < kRepeatBudgetMs); ++r) {
      const auto t0 = clock::now();
      run_expm(cfg.n_pixels);
      t_expm.push_back(ms_since(t0));
      spent += t_expm.back();
    }
    spent = 0.0;
    for (int r = 0; r < cfg.repetitions && (r == 0 || spent < kRepeatBudgetMs); ++r) {
      const auto t0 = clock::now();
      run_rk(gen);
      t_rk.push_back(ms_since(t0));
      spent += t_rk.back();
    }

    BenchmarkRow row;
    row.d = d;
    row.t_expm_ms = median(t_expm);
    row.t_rk_ms = median(t_rk);
    row.n_rk = n_rk;
    for (std::size_t s = 0; s < initial.size(); ++s)
      row.trace_dist = std::max(row.trace_dist, trace_distance(final_expm[s], final_rk[s]));
    result.rows.push_back(row);
  }

  if (result.rows.size() >= 2) {
    std::vector<double> ds, te, tr;
    for (const auto& r : result.rows) {
      ds.push_back(static_cast<double>(r.d));
      te.push_back(r.t_expm_ms);
      tr.push_back(r.t_rk_ms);
    }
    result.expm_fit = fit_power_law(ds, te);
    result.rk_fit = fit_power_law(ds, tr);
  }
  return result;
}

void write_benchmark_csv(std::ostream& os, const BenchmarkResult& result) {
  os << "d,t_expm_ms,t_rk_ms,n_rk,trace_dist\n";
  os << std::setprecision(17);
  for (const auto& r : result.rows)
    os << r.d << ',' << r.t_expm_ms << ',' << r.t_rk_ms << ',' << r.n_rk << ',' << r.trace_dist
       << '\n';
}

}  // namespace rkgrape
