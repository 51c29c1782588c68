// Copyright 2026 The hmoments Authors
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

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hmoments/pauli.hpp"

namespace hmoments {

enum class Topology { OpenChain, Ring };

inline std::string to_string(Topology t) {
  return t == Topology::Ring ? "ring" : "open";
}

inline Topology topology_from_string(const std::string &s) {
  if (s == "open" || s == "open-chain")
    return Topology::OpenChain;
  if (s == "ring")
    return Topology::Ring;
  throw ContractViolation("unknown topology '" + s + "' (expected open|ring)");
}

/// Couplings of H = J sum (XX + YY) + U sum ZZ + B sum Z over
/// nearest-neighbour pairs. Energies in atomic units.
struct HeisenbergParams {
  double J = 1.0;
  double U = 1.0;
  double B = 1.0;
  int n_sites = 4;
  Topology topology = Topology::OpenChain;
};

inline std::vector<std::pair<int, int>> neighbour_pairs(int n_sites,
                                                        Topology topology) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i + 1 < n_sites; ++i)
    pairs.emplace_back(i, i + 1);
  // a two-site ring would just double the single bond
  if (topology == Topology::Ring && n_sites > 2)
    pairs.emplace_back(n_sites - 1, 0);
  return pairs;
}

inline PauliSum build_heisenberg(const HeisenbergParams &p) {
  if (p.n_sites < 2 || p.n_sites > kMaxQubits)
    throw ContractViolation("build_heisenberg: need 2..64 sites");
  if (!std::isfinite(p.J) || !std::isfinite(p.U) || !std::isfinite(p.B))
    throw ContractViolation("build_heisenberg: couplings must be finite");
  const int n = p.n_sites;
  PauliSum h(n);
  for (auto [i, j] : neighbour_pairs(n, p.topology)) {
    const std::uint64_t m = (std::uint64_t{1} << i) | (std::uint64_t{1} << j);
    h.add(PauliString(n, m, 0), p.J);
    h.add(PauliString(n, m, m), p.J);
    h.add(PauliString(n, 0, m), p.U);
  }
  for (int i = 0; i < n; ++i)
    h.add(PauliString(n, 0, std::uint64_t{1} << i), p.B);
  return h;
}

/// M = sum_i Z_i.
inline PauliSum build_magnetization(int n_qubits) {
  if (n_qubits < 1)
    throw ContractViolation("build_magnetization: need at least one qubit");
  PauliSum m(n_qubits);
  for (int i = 0; i < n_qubits; ++i)
    m.add(PauliString(n_qubits, 0, std::uint64_t{1} << i), 1.0);
  return m;
}

enum class GateKind { Ry, Rz, H, S, Sdg, X, CZ, CX };

struct Gate {
  GateKind kind;
  int target = 0;
  int control = -1; ///< only for CZ / CX
  double angle = 0.0;
};

/// Ordered gate program; gates are applied first to last.
class Circuit {
public:
  explicit Circuit(int n_qubits) : n_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
      throw DimensionError("Circuit: qubit count must be in [1, 64]");
  }

  int n_qubits() const noexcept { return n_; }
  const std::vector<Gate> &gates() const noexcept { return gates_; }
  std::size_t size() const noexcept { return gates_.size(); }
  bool empty() const noexcept { return gates_.empty(); }

  Circuit &ry(int q, double angle) { return push({GateKind::Ry, q, -1, angle}); }
  Circuit &rz(int q, double angle) { return push({GateKind::Rz, q, -1, angle}); }
  Circuit &h(int q) { return push({GateKind::H, q}); }
  Circuit &s(int q) { return push({GateKind::S, q}); }
  Circuit &sdg(int q) { return push({GateKind::Sdg, q}); }
  Circuit &x(int q) { return push({GateKind::X, q}); }
  Circuit &cz(int control, int target) {
    return push({GateKind::CZ, target, control});
  }
  Circuit &cx(int control, int target) {
    return push({GateKind::CX, target, control});
  }

  Circuit &append(const Circuit &other) {
    require_same_qubits(n_, other.n_, "Circuit::append");
    gates_.insert(gates_.end(), other.gates_.begin(), other.gates_.end());
    return *this;
  }

  friend bool operator==(const Circuit &a, const Circuit &b) {
    if (a.n_ != b.n_ || a.gates_.size() != b.gates_.size())
      return false;
    for (std::size_t i = 0; i < a.gates_.size(); ++i) {
      const Gate &g = a.gates_[i], &k = b.gates_[i];
      if (g.kind != k.kind || g.target != k.target || g.control != k.control ||
          g.angle != k.angle)
        return false;
    }
    return true;
  }

private:
  Circuit &push(Gate g) {
    if (g.target < 0 || g.target >= n_)
      throw DimensionError("Circuit: target qubit out of range");
    const bool two_qubit = g.kind == GateKind::CZ || g.kind == GateKind::CX;
    if (two_qubit) {
      if (g.control < 0 || g.control >= n_)
        throw DimensionError("Circuit: control qubit out of range");
      if (g.control == g.target)
        throw ContractViolation("Circuit: control equals target");
    }
    gates_.push_back(g);
    return *this;
  }

  int n_;
  std::vector<Gate> gates_;
};

/// Four-qubit hardware-efficient trial state: prepare |1100>, rotate
/// Ry(theta0) on q0, Ry(theta1) on q2, Ry(pi) on q3, then the CZ ladder.
/// Meant to act on |0000>.
inline Circuit build_ansatz(double theta0, double theta1) {
  Circuit c(4);
  c.x(0).x(1);
  c.ry(0, theta0).ry(2, theta1).ry(3, std::numbers::pi);
  c.cz(0, 1).cz(1, 2).cz(2, 3);
  return c;
}

struct SpectrumResult {
  Eigen::VectorXd eigenvalues;   ///< ascending
  Eigen::MatrixXcd eigenvectors; ///< columns match eigenvalues
  Eigen::VectorXcd ground_vector;
};

/// Full dense diagonalization; the reference oracle for everything else.
inline SpectrumResult exact_spectrum(const PauliSum &a,
                                     double hermitian_tol = 1e-12) {
  if (a.n_qubits() > kMaxDenseQubits)
    throw ResourceError("exact_spectrum: dense diagonalization capped at 12 "
                        "qubits");
  if (!a.is_hermitian(hermitian_tol))
    throw ContractViolation("exact_spectrum: operator is not Hermitian (max "
                            "imaginary coefficient " +
                            std::to_string(a.max_imaginary()) + ")");
  const Eigen::MatrixXcd m = to_dense(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m);
  if (solver.info() != Eigen::Success)
    throw Error("exact_spectrum: eigensolver did not converge");
  SpectrumResult out;
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  out.ground_vector = out.eigenvectors.col(0).normalized();
  return out;
}

} // namespace hmoments
