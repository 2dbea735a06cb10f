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

// Shared fixtures for the test binaries: seeded random operators and states,
// small random control problems, and finite-difference oracles.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/SVD>

#include "rkgrape/controls_filter.hpp"
#include "rkgrape/grape.hpp"
#include "rkgrape/liouville.hpp"
#include "rkgrape/operator_core.hpp"
#include "rkgrape/propagation.hpp"

namespace rkgrape::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo = -1.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }

  Matrix complex_matrix(Index d, double scale = 1.0) {
    Matrix m(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) m(i, j) = Complex(uniform(), uniform()) * scale;
    return m;
  }

  Operator hermitian(Index d, double scale = 1.0) {
    const Matrix m = complex_matrix(d, scale);
    return 0.5 * (m + m.adjoint());
  }

  /// Full-rank density matrix G G^+ / Tr.
  DensityState density(Index d) {
    const Matrix g = complex_matrix(d);
    Matrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    return 0.5 * (rho + rho.adjoint());
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

inline double rel_inf_error(const RealMatrix& got, const RealMatrix& want) {
  const double scale = want.cwiseAbs().maxCoeff();
  return (got - want).cwiseAbs().maxCoeff() / (scale > 0.0 ? scale : 1.0);
}

inline IntegratorConfig rk4(int substeps) {
  IntegratorConfig c;
  c.method = RkMethod::classical_rk4;
  c.rk4_substeps = substeps;
  return c;
}

/// Random GRAPE problem: `branches` random initial states on a d-level system
/// with random drift, R random Hermitian controls, one or two decay channels,
/// and a random Hermitian objective, on the piecewise (unfiltered) transfer.
inline OptimizationProblem random_problem(Rng& rng, Index d, Index r, Index n_pixels,
                                          double subpixel_dt, int branches = 2,
                                          double scale = 0.3, double pixel_dt = 1.0) {
  OptimizationProblem p;
  for (int b = 0; b < branches; ++b)
    p.branches.push_back({rng.density(d), rng.hermitian(d, scale), rng.uniform(0.5, 1.5), ""});
  for (Index k = 0; k < r; ++k) p.control_ops.push_back(rng.hermitian(d, 1.0));
  p.channels.push_back({rng.uniform(0.05, 0.2), rng.complex_matrix(d, 0.5)});
  p.objective = {ObjectiveKind::observable_expectation, rng.hermitian(d, 1.0)};
  p.filter = build_piecewise_transfer(n_pixels, pixel_dt, subpixel_dt);
  p.integrator = rk4(4);
  p.execution = Execution::serial;
  return p;
}

/// Per-subpixel generator norm of the drive-and-decay reset problem at its
/// reference operating point (about 0.5 rad/ns over 0.1 ns subpixels).
inline constexpr double kApplicationGeneratorStep = 0.05;

/// Largest spectral norm of the Lindblad generator over branches and pixels.
inline double max_generator_norm(const OptimizationProblem& p, const RealMatrix& pixel_values) {
  double worst = 0.0;
  for (const auto& b : p.branches) {
    for (Index j = 0; j < pixel_values.rows(); ++j) {
      Operator h = b.drift;
      for (Index k = 0; k < pixel_values.cols(); ++k) h += pixel_values(j, k) * p.control_ops[static_cast<std::size_t>(k)];
      const Superoperator l = build_superoperator(h, p.channels);
      worst = std::max(worst, Eigen::JacobiSVD<Matrix>(l.entries).singularValues()(0));
    }
  }
  return worst;
}

/// Pixel length that puts the largest generator norm times the subpixel
/// width at kApplicationGeneratorStep, for `per_pixel` subpixels per pixel.
inline double application_pixel_dt(const OptimizationProblem& p, const RealMatrix& pixel_values,
                                   Index per_pixel) {
  return static_cast<double>(per_pixel) * kApplicationGeneratorStep / max_generator_norm(p, pixel_values);
}

inline SubpixelGrid random_subpixels(Rng& rng, Index m, Index r, double dt, double scale) {
  SubpixelGrid s;
  s.subpixel_dt = dt;
  s.values.resize(m, r);
  for (Index i = 0; i < m; ++i)
    for (Index k = 0; k < r; ++k) s.values(i, k) = rng.uniform(-scale, scale);
  return s;
}

/// Central differences of f over every entry of s.values.
template <typename F>
RealMatrix central_difference(F&& f, const SubpixelGrid& s, double h) {
  RealMatrix g(s.values.rows(), s.values.cols());
  SubpixelGrid w = s;
  for (Index i = 0; i < s.values.rows(); ++i) {
    for (Index k = 0; k < s.values.cols(); ++k) {
      w.values(i, k) = s.values(i, k) + h;
      const double fp = f(w);
      w.values(i, k) = s.values(i, k) - h;
      const double fm = f(w);
      w.values(i, k) = s.values(i, k);
      g(i, k) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

}  // namespace rkgrape::testing
