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

// Dense operator algebra on a truncated Hilbert space and the Lindblad
// generator applied directly to d x d matrices. Nothing here ever forms the
// d^2 x d^2 superoperator; see liouville.hpp for that.
//
// Units: time in ns, rates and energies in rad/ns.

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rkgrape {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using Matrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;

/// Dense d x d complex operator (Hamiltonians, collapse operators, observables).
using Operator = Matrix;
/// Density matrix or costate. Hermitian; unit trace only for forward states.
using DensityState = Matrix;

/// One Lindblad channel gamma * D[a].
struct DissipationChannel {
  double rate = 0.0;  // rad/ns
  Operator collapse;
};

/// Fock ladder operator with <n-1|a|n> = sqrt(n).
Operator annihilation(Index dim);
/// a^dagger a, diagonal 0..dim-1.
Operator number_operator(Index dim);
/// |n><n|
DensityState fock_projector(Index dim, Index n);

/// -i[H, rho] + sum_j gamma_j (a_j rho a_j^+ - {a_j^+ a_j, rho}/2).
///
/// Reference form, valid for any (also non-Hermitian) argument. The
/// propagators use LindbladKernel, which is checked against this.
DensityState lindblad_rhs(const DensityState& state, const Operator& hamiltonian,
                          std::span<const DissipationChannel> channels);

/// Hilbert-Schmidt adjoint of lindblad_rhs:
/// +i[H, lambda] + sum_j gamma_j (a_j^+ lambda a_j - {a_j^+ a_j, lambda}/2).
DensityState lindblad_adjoint_rhs(const DensityState& costate, const Operator& hamiltonian,
                                  std::span<const DissipationChannel> channels);

/// Tr(obs * state).
Complex expectation(const Operator& obs, const DensityState& state);

/// Tr(A^+ B).
Complex hs_inner(const Matrix& a, const Matrix& b);

/// max |A - A^+|, entrywise.
double hermiticity_defect(const Matrix& a);
/// (A + A^+) / 2
Matrix hermitian_part(const Matrix& a);
/// Largest entry magnitude.
double max_abs(const Matrix& a);

/// Population in the two highest Fock levels; the truncation-leak diagnostic.
double truncation_leak(const DensityState& state);

/// Half the trace norm of (a - b); both arguments Hermitian.
double trace_distance(const DensityState& a, const DensityState& b);

/// Throws ShapeError unless every matrix is square with dimension `dim`.
void require_dim(const Matrix& m, Index dim, const char* what);

/// Lindblad generator of one constant-in-time segment, pre-arranged for
/// repeated application to Hermitian arguments.
///
/// With H_eff = H - (i/2) sum_j gamma_j a_j^+ a_j the forward action is
/// -i(H_eff rho - (H_eff rho)^+) + sum_j J_j rho J_j^+, J_j = sqrt(gamma_j) a_j,
/// which costs one product for the coherent part instead of four. The
/// identity rho H_eff^+ = (H_eff rho)^+ requires rho Hermitian; propagated
/// states and costates are Hermitian by construction.
///
/// Holds scratch storage, so one instance must not be shared across threads.
class LindbladKernel {
 public:
  LindbladKernel() = default;
  LindbladKernel(const Operator& hamiltonian, std::span<const DissipationChannel> channels);

  /// Re-targets the kernel to a new Hamiltonian with the same channels.
  void set_hamiltonian(const Operator& hamiltonian);

  Index dim() const { return h_eff_.rows(); }

  /// out = L rho (rho Hermitian).
  void apply(const DensityState& rho, DensityState& out) const;
  /// out = L^+ lambda (lambda Hermitian).
  void apply_adjoint(const DensityState& lambda, DensityState& out) const;

 private:
  Operator h_eff_;
  Operator decay_;  // -(i/2) sum gamma a^+ a
  std::vector<Operator> jumps_;
  mutable Matrix work_;
  mutable Matrix work2_;
};

}  // namespace rkgrape
