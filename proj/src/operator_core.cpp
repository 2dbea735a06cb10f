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

#include "rkgrape/operator_core.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "rkgrape/error.hpp"

namespace rkgrape {

namespace {

constexpr Complex kI{0.0, 1.0};

void check_channels(std::span<const DissipationChannel> channels, Index dim) {
  for (const auto& ch : channels) {
    require_dim(ch.collapse, dim, "collapse operator");
    if (!(ch.rate >= 0.0)) throw Error("dissipation rate must be nonnegative");
  }
}

}  // namespace

void require_dim(const Matrix& m, Index dim, const char* what) {
  if (m.rows() != dim || m.cols() != dim) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(dim) + "x" +
                     std::to_string(dim) + ", got " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()));
  }
}

Operator annihilation(Index dim) {
  if (dim < 2) throw InvalidDimensionError("annihilation operator needs dim >= 2");
  Operator a = Operator::Zero(dim, dim);
  for (Index n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

Operator number_operator(Index dim) {
  if (dim < 1) throw InvalidDimensionError("number operator needs dim >= 1");
  Operator n = Operator::Zero(dim, dim);
  for (Index k = 0; k < dim; ++k) n(k, k) = static_cast<double>(k);
  return n;
}

DensityState fock_projector(Index dim, Index n) {
  if (n < 0 || n >= dim) throw InvalidDimensionError("Fock level outside truncation");
  DensityState p = DensityState::Zero(dim, dim);
  p(n, n) = 1.0;
  return p;
}

DensityState lindblad_rhs(const DensityState& state, const Operator& hamiltonian,
                          std::span<const DissipationChannel> channels) {
  const Index d = hamiltonian.rows();
  require_dim(hamiltonian, d, "hamiltonian");
  require_dim(state, d, "state");
  check_channels(channels, d);

  DensityState out = -kI * (hamiltonian * state - state * hamiltonian);
  for (const auto& ch : channels) {
    const Operator& a = ch.collapse;
    const Operator ada = a.adjoint() * a;
    out += ch.rate * (a * state * a.adjoint() - 0.5 * (ada * state + state * ada));
  }
  return out;
}

DensityState lindblad_adjoint_rhs(const DensityState& costate, const Operator& hamiltonian,
                                  std::span<const DissipationChannel> channels) {
  const Index d = hamiltonian.rows();
  require_dim(hamiltonian, d, "hamiltonian");
  require_dim(costate, d, "costate");
  check_channels(channels, d);

  DensityState out = kI * (hamiltonian * costate - costate * hamiltonian);
  for (const auto& ch : channels) {
    const Operator& a = ch.collapse;
    const Operator ada = a.adjoint() * a;
    out += ch.rate * (a.adjoint() * costate * a - 0.5 * (ada * costate + costate * ada));
  }
  return out;
}

Complex expectation(const Operator& obs, const DensityState& state) {
  require_dim(state, obs.rows(), "state");
  require_dim(obs, obs.rows(), "observable");
  // Tr(AB) = sum_ij A_ij B_ji without forming the product.
  return (obs.array() * state.transpose().array()).sum();
}

Complex hs_inner(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("hs_inner: shape mismatch");
  return (a.conjugate().array() * b.array()).sum();
}

double hermiticity_defect(const Matrix& a) { return (a - a.adjoint()).cwiseAbs().maxCoeff(); }

Matrix hermitian_part(const Matrix& a) { return 0.5 * (a + a.adjoint()); }

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

double truncation_leak(const DensityState& state) {
  const Index d = state.rows();
  double leak = 0.0;
  for (Index n = std::max<Index>(0, d - 2); n < d; ++n) leak += state(n, n).real();
  return leak;
}

double trace_distance(const DensityState& a, const DensityState& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("trace_distance: shape mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(a - b), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

LindbladKernel::LindbladKernel(const Operator& hamiltonian,
                               std::span<const DissipationChannel> channels) {
  const Index d = hamiltonian.rows();
  require_dim(hamiltonian, d, "hamiltonian");
  check_channels(channels, d);
  decay_ = Operator::Zero(d, d);
  jumps_.reserve(channels.size());
  for (const auto& ch : channels) {
    if (ch.rate == 0.0) continue;
    decay_ += (-0.5 * ch.rate) * kI * (ch.collapse.adjoint() * ch.collapse);
    jumps_.push_back(std::sqrt(ch.rate) * ch.collapse);
  }
  h_eff_ = hamiltonian + decay_;
  work_.resize(d, d);
  work2_.resize(d, d);
}

void LindbladKernel::set_hamiltonian(const Operator& hamiltonian) {
  require_dim(hamiltonian, dim(), "hamiltonian");
  h_eff_ = hamiltonian + decay_;
}

void LindbladKernel::apply(const DensityState& rho, DensityState& out) const {
  work_.noalias() = h_eff_ * rho;
  out.noalias() = -kI * (work_ - work_.adjoint());
  for (const auto& j : jumps_) {
    work2_.noalias() = j * rho;
    out.noalias() += work2_ * j.adjoint();
  }
}

void LindbladKernel::apply_adjoint(const DensityState& lambda, DensityState& out) const {
  work_.noalias() = h_eff_.adjoint() * lambda;
  out.noalias() = kI * (work_ - work_.adjoint());
  for (const auto& j : jumps_) {
    work2_.noalias() = j.adjoint() * lambda;
    out.noalias() += work2_ * j;
  }
}

}  // namespace rkgrape
