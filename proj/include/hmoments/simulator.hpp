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
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hmoments/models.hpp"
#include "hmoments/pauli.hpp"

namespace hmoments {

/// Seedable generator used by every sampling routine. mt19937_64 plus a
/// fixed 53-bit mantissa mapping, so draws are identical across standard
/// library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; gives independent per-task seeds from one base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class StateVector {
public:
  /// |0...0>.
  explicit StateVector(int n_qubits) : n_(check_n(n_qubits)) {
    amps_ = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim()));
    amps_(0) = 1.0;
  }

  StateVector(int n_qubits, Eigen::VectorXcd amplitudes)
      : n_(check_n(n_qubits)), amps_(std::move(amplitudes)) {
    if (static_cast<std::size_t>(amps_.size()) != dim())
      throw DimensionError("StateVector: amplitude count must be 2^n");
  }

  /// Computational basis state from a ket literal, qubit 0 first ("1100").
  static StateVector from_ket(std::string_view ket) {
    StateVector s(static_cast<int>(ket.size()));
    s.amps_(0) = 0.0;
    s.amps_(static_cast<Eigen::Index>(basis_index(ket))) = 1.0;
    return s;
  }

  static std::uint64_t basis_index(std::string_view ket) {
    std::uint64_t idx = 0;
    for (std::size_t q = 0; q < ket.size(); ++q) {
      if (ket[q] == '1')
        idx |= std::uint64_t{1} << q;
      else if (ket[q] != '0')
        throw ContractViolation("ket literal may only contain 0 and 1");
    }
    return idx;
  }

  static std::string ket_literal(std::uint64_t index, int n_qubits) {
    std::string out(static_cast<std::size_t>(n_qubits), '0');
    for (int q = 0; q < n_qubits; ++q)
      if ((index >> q) & 1U)
        out[static_cast<std::size_t>(q)] = '1';
    return out;
  }

  int n_qubits() const noexcept { return n_; }
  std::size_t dim() const noexcept { return std::size_t{1} << n_; }
  const Eigen::VectorXcd &amplitudes() const noexcept { return amps_; }
  Eigen::VectorXcd &amplitudes() noexcept { return amps_; }
  double norm() const { return amps_.norm(); }

  Eigen::VectorXd probabilities() const { return amps_.cwiseAbs2(); }

private:
  static int check_n(int n) {
    if (n < 1 || n > kMaxDenseQubits)
      throw ResourceError("StateVector: qubit count must be in [1, 12]");
    return n;
  }

  int n_;
  Eigen::VectorXcd amps_;
};

namespace detail {

template <class F>
void for_each_pair(Eigen::VectorXcd &v, int q, F &&f) {
  const Eigen::Index bit = Eigen::Index{1} << q;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!(i & bit))
      f(v(i), v(i | bit));
}

inline void apply_gate(Eigen::VectorXcd &v, const Gate &g) {
  const Eigen::Index tbit = Eigen::Index{1} << g.target;
  switch (g.kind) {
  case GateKind::Ry: {
    const double c = std::cos(g.angle / 2), s = std::sin(g.angle / 2);
    for_each_pair(v, g.target, [c, s](Complex &a0, Complex &a1) {
      const Complex b0 = c * a0 - s * a1, b1 = s * a0 + c * a1;
      a0 = b0;
      a1 = b1;
    });
    break;
  }
  case GateKind::Rz: {
    const Complex p0 = std::polar(1.0, -g.angle / 2),
                  p1 = std::polar(1.0, g.angle / 2);
    for_each_pair(v, g.target, [p0, p1](Complex &a0, Complex &a1) {
      a0 *= p0;
      a1 *= p1;
    });
    break;
  }
  case GateKind::H: {
    const double r = 1.0 / std::sqrt(2.0);
    for_each_pair(v, g.target, [r](Complex &a0, Complex &a1) {
      const Complex b0 = r * (a0 + a1), b1 = r * (a0 - a1);
      a0 = b0;
      a1 = b1;
    });
    break;
  }
  case GateKind::S:
    for_each_pair(v, g.target,
                  [](Complex &, Complex &a1) { a1 *= Complex(0.0, 1.0); });
    break;
  case GateKind::Sdg:
    for_each_pair(v, g.target,
                  [](Complex &, Complex &a1) { a1 *= Complex(0.0, -1.0); });
    break;
  case GateKind::X:
    for_each_pair(v, g.target, [](Complex &a0, Complex &a1) { std::swap(a0, a1); });
    break;
  case GateKind::CZ: {
    const Eigen::Index cbit = Eigen::Index{1} << g.control;
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if ((i & cbit) && (i & tbit))
        v(i) = -v(i);
    break;
  }
  case GateKind::CX: {
    const Eigen::Index cbit = Eigen::Index{1} << g.control;
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if ((i & cbit) && !(i & tbit))
        std::swap(v(i), v(i | tbit));
    break;
  }
  }
}

} // namespace detail

inline StateVector apply_circuit(const StateVector &state, const Circuit &c) {
  require_same_qubits(state.n_qubits(), c.n_qubits(), "apply_circuit");
  StateVector out = state;
  for (const Gate &g : c.gates())
    detail::apply_gate(out.amplitudes(), g);
  return out;
}

/// P|v>.
inline Eigen::VectorXcd apply(const PauliString &p, const Eigen::VectorXcd &v) {
  Eigen::VectorXcd out(v.size());
  const Complex base = detail::i_pow(detail::popcount(p.x_mask() & p.z_mask()));
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    const auto uj = static_cast<std::uint64_t>(j);
    const double sign = detail::popcount(p.z_mask() & uj) % 2 ? -1.0 : 1.0;
    out(static_cast<Eigen::Index>(uj ^ p.x_mask())) = base * sign * v(j);
  }
  return out;
}

/// A|v> without forming the dense matrix.
inline Eigen::VectorXcd apply(const PauliSum &a, const Eigen::VectorXcd &v) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.size());
  for (const auto &[s, c] : a)
    out += c * apply(s, v);
  return out;
}

inline double expectation(const StateVector &state, const PauliString &p) {
  require_same_qubits(state.n_qubits(), p.n_qubits(), "expectation");
  return state.amplitudes().dot(apply(p, state.amplitudes())).real();
}

/// <phi|A|phi> for Hermitian A; the imaginary residue must stay below 1e-10.
inline double expectation(const StateVector &state, const PauliSum &a,
                          double imag_tol = 1e-10) {
  require_same_qubits(state.n_qubits(), a.n_qubits(), "expectation");
  if (!a.is_hermitian(imag_tol))
    throw ContractViolation("expectation: operator is not Hermitian");
  const Complex value = state.amplitudes().dot(apply(a, state.amplitudes()));
  if (std::abs(value.imag()) > imag_tol)
    throw ContractViolation("expectation: imaginary residue " +
                            std::to_string(value.imag()) + " exceeds tolerance");
  return value.real();
}

/// Per-qubit rotation into the shared eigenbasis of a QWC group: X -> H,
/// Y -> Sdg then H, Z and I -> nothing.
inline Circuit measurement_rotation(const std::vector<PauliString> &group) {
  if (group.empty())
    throw ContractViolation("measurement_rotation: empty group");
  const int n = group.front().n_qubits();
  for (std::size_t i = 0; i < group.size(); ++i)
    for (std::size_t j = i + 1; j < group.size(); ++j)
      if (!qubitwise_commutes(group[i], group[j]))
        throw ContractViolation("measurement_rotation: " + group[i].literal() +
                                " and " + group[j].literal() +
                                " do not commute qubitwise");
  Circuit c(n);
  for (int q = 0; q < n; ++q) {
    char basis = 'I';
    for (const auto &p : group)
      if (p.letter(q) != 'I')
        basis = p.letter(q);
    if (basis == 'X') {
      c.h(q);
    } else if (basis == 'Y') {
      c.sdg(q).h(q);
    }
  }
  return c;
}

/// Independent per-qubit asymmetric bit flips at readout.
struct ReadoutNoiseModel {
  std::vector<double> p01; ///< P(report 1 | true 0), per qubit
  std::vector<double> p10; ///< P(report 0 | true 1), per qubit

  static ReadoutNoiseModel uniform(int n_qubits, double p01, double p10) {
    ReadoutNoiseModel m{std::vector<double>(static_cast<std::size_t>(n_qubits), p01),
                        std::vector<double>(static_cast<std::size_t>(n_qubits), p10)};
    m.validate(n_qubits);
    return m;
  }

  void validate(int n_qubits) const {
    if (p01.size() != static_cast<std::size_t>(n_qubits) ||
        p10.size() != static_cast<std::size_t>(n_qubits))
      throw DimensionError("ReadoutNoiseModel: one probability pair per qubit");
    for (std::size_t q = 0; q < p01.size(); ++q)
      if (!(p01[q] >= 0.0 && p01[q] <= 1.0 && p10[q] >= 0.0 && p10[q] <= 1.0))
        throw ContractViolation("ReadoutNoiseModel: probabilities must lie in "
                                "[0, 1]");
  }

  bool is_trivial() const {
    for (std::size_t q = 0; q < p01.size(); ++q)
      if (p01[q] != 0.0 || p10[q] != 0.0)
        return false;
    return true;
  }

  std::uint64_t corrupt(std::uint64_t outcome, Rng &rng) const {
    for (std::size_t q = 0; q < p01.size(); ++q) {
      const std::uint64_t bit = std::uint64_t{1} << q;
      const double flip = (outcome & bit) ? p10[q] : p01[q];
      if (rng.uniform() < flip)
        outcome ^= bit;
    }
    return outcome;
  }
};

/// Outcome histogram indexed by basis index. Calibrated vectors may hold
/// fractional counts; `unclipped` keeps the raw inverse before clipping.
struct CountsVector {
  int n_qubits = 1;
  std::vector<double> counts;
  std::uint64_t total_shots = 0;
  std::vector<double> unclipped;
};

namespace detail {

inline std::vector<double> cumulative(const Eigen::VectorXd &probs) {
  std::vector<double> cdf(static_cast<std::size_t>(probs.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    cdf[static_cast<std::size_t>(i)] = acc;
  }
  for (auto &c : cdf)
    c /= acc;
  return cdf;
}

inline std::uint64_t draw(const std::vector<double> &cdf, Rng &rng) {
  const double u = rng.uniform();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end())
    --it;
  return static_cast<std::uint64_t>(it - cdf.begin());
}

} // namespace detail

/// Multinomial shot sampling of the rotated state by CDF inversion, with
/// optional readout corruption of each shot.
inline CountsVector sample_counts(const StateVector &state,
                                  const Circuit &rotation, std::uint64_t shots,
                                  const std::optional<ReadoutNoiseModel> &noise,
                                  std::uint64_t seed) {
  if (shots < 1)
    throw ContractViolation("sample_counts: shots must be >= 1");
  if (noise)
    noise->validate(state.n_qubits());
  const StateVector rotated = apply_circuit(state, rotation);
  const auto cdf = detail::cumulative(rotated.probabilities());
  CountsVector out{state.n_qubits(), std::vector<double>(state.dim(), 0.0),
                   shots, {}};
  Rng rng(seed);
  for (std::uint64_t s = 0; s < shots; ++s) {
    std::uint64_t k = detail::draw(cdf, rng);
    if (noise)
      k = noise->corrupt(k, rng);
    out.counts[k] += 1.0;
  }
  return out;
}

/// Each member is diagonal after the group rotation, so its value on outcome
/// k is the parity of k over the member's support.
inline std::map<PauliString, double>
expectations_from_counts(const CountsVector &counts,
                         const std::vector<PauliString> &group) {
  if (counts.total_shots == 0)
    throw ContractViolation("expectations_from_counts: no shots");
  std::map<PauliString, double> out;
  const double total = static_cast<double>(counts.total_shots);
  for (const auto &p : group) {
    require_same_qubits(counts.n_qubits, p.n_qubits(), "expectations_from_counts");
    double acc = 0.0;
    for (std::size_t k = 0; k < counts.counts.size(); ++k) {
      const bool odd = detail::popcount(p.support() & k) % 2;
      acc += odd ? -counts.counts[k] : counts.counts[k];
    }
    out[p] = acc / total;
  }
  return out;
}

/// Ancilla-controlled P interferometer on |phi> = prep|0...0>. The ancilla
/// reads 0 with probability ||(phi + P phi)/2||^2 = (1 + Re<P>)/2; the
/// estimate is 2 p0 - 1. `shots == 0` returns the analytic value.
inline double hadamard_test(const StateVector &phi, const PauliString &p,
                            std::uint64_t shots, std::uint64_t seed) {
  require_same_qubits(phi.n_qubits(), p.n_qubits(), "hadamard_test");
  const Eigen::VectorXcd branch0 =
      0.5 * (phi.amplitudes() + apply(p, phi.amplitudes()));
  const double p0 = std::min(1.0, branch0.squaredNorm());
  if (shots == 0)
    return 2.0 * p0 - 1.0;
  Rng rng(seed);
  std::uint64_t zeros = 0;
  for (std::uint64_t s = 0; s < shots; ++s)
    if (rng.uniform() < p0)
      ++zeros;
  return 2.0 * static_cast<double>(zeros) / static_cast<double>(shots) - 1.0;
}

inline double hadamard_test(const Circuit &prep, const PauliString &p,
                            std::uint64_t shots, std::uint64_t seed) {
  require_same_qubits(prep.n_qubits(), p.n_qubits(), "hadamard_test");
  const StateVector phi = apply_circuit(StateVector(prep.n_qubits()), prep);
  return hadamard_test(phi, p, shots, seed);
}

/// Column j: distribution of reported outcomes when basis state j is prepared.
struct CalibrationMatrix {
  Eigen::MatrixXd matrix;
};

/// Analytic mode when `shots_per_basis == 0`, empirical otherwise.
inline CalibrationMatrix build_calibration(const ReadoutNoiseModel &noise,
                                           int n_qubits,
                                           std::uint64_t shots_per_basis,
                                           std::uint64_t seed) {
  noise.validate(n_qubits);
  if (n_qubits > kMaxDenseQubits)
    throw ResourceError("build_calibration: capped at 12 qubits");
  const auto dim = Eigen::Index{1} << n_qubits;
  CalibrationMatrix out{Eigen::MatrixXd::Zero(dim, dim)};
  if (shots_per_basis == 0) {
    for (Eigen::Index j = 0; j < dim; ++j)
      for (Eigen::Index i = 0; i < dim; ++i) {
        double prob = 1.0;
        for (int q = 0; q < n_qubits; ++q) {
          const auto uq = static_cast<std::size_t>(q);
          const bool truth = (j >> q) & 1, seen = (i >> q) & 1;
          if (!truth)
            prob *= seen ? noise.p01[uq] : 1.0 - noise.p01[uq];
          else
            prob *= seen ? 1.0 - noise.p10[uq] : noise.p10[uq];
        }
        out.matrix(i, j) = prob;
      }
    return out;
  }
  Rng rng(seed);
  for (Eigen::Index j = 0; j < dim; ++j) {
    for (std::uint64_t s = 0; s < shots_per_basis; ++s)
      out.matrix(static_cast<Eigen::Index>(
                     noise.corrupt(static_cast<std::uint64_t>(j), rng)),
                 j) += 1.0;
    out.matrix.col(j) /= static_cast<double>(shots_per_basis);
  }
  return out;
}

inline double condition_number(const Eigen::MatrixXd &m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto &sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= 0.0)
    return std::numeric_limits<double>::infinity();
  return sv(0) / sv(sv.size() - 1);
}

/// J^{-1} * noisy; negative entries are clipped to zero and the vector is
/// rescaled to the original shot total. The unclipped solve is kept.
inline CountsVector calibrate_counts(const CalibrationMatrix &cal,
                                     const CountsVector &noisy,
                                     double condition_cap = 1e6) {
  const auto dim = static_cast<Eigen::Index>(noisy.counts.size());
  if (cal.matrix.rows() != dim || cal.matrix.cols() != dim)
    throw DimensionError("calibrate_counts: matrix and counts disagree in size");
  const double cond = condition_number(cal.matrix);
  if (!(cond <= condition_cap))
    throw CalibrationError("calibrate_counts: calibration matrix condition "
                           "number " +
                               std::to_string(cond) + " exceeds cap",
                           cond);
  const Eigen::VectorXd y =
      Eigen::Map<const Eigen::VectorXd>(noisy.counts.data(), dim);
  const Eigen::VectorXd x = cal.matrix.fullPivLu().solve(y);

  CountsVector out{noisy.n_qubits, {}, noisy.total_shots, {}};
  out.unclipped.assign(x.data(), x.data() + x.size());
  out.counts.resize(static_cast<std::size_t>(dim));
  double kept = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double v = std::max(0.0, x(i));
    out.counts[static_cast<std::size_t>(i)] = v;
    kept += v;
  }
  if (kept > 0.0) {
    const double scale = static_cast<double>(noisy.total_shots) / kept;
    for (auto &v : out.counts)
      v *= scale;
  }
  return out;
}

} // namespace hmoments
