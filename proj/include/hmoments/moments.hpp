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

/**
 * @file
 * Hamiltonian moments m_n = <phi|H^n|phi> and everything derived from them.
 *
 * Three independent routes produce the same numbers: repeated application of
 * the dense operator, contraction of the symbolic Pauli expansion of H^n
 * against measured string expectations, and central finite differences of
 * exact real-time propagators.
 */

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "hmoments/csv.hpp"
#include "hmoments/models.hpp"
#include "hmoments/pauli.hpp"
#include "hmoments/simulator.hpp"

namespace hmoments {

inline constexpr int kMaxMomentOrder = 40;
inline constexpr int kMomentWarnOrder = 20;
/// Terms of a symbolic power below this fraction of its largest coefficient
/// are rounding residue.
inline constexpr double kRelativePrune = 1e-12;

enum class Provenance { Exact, PauliMeasured, Cfd };

inline std::string to_string(Provenance p) {
  switch (p) {
  case Provenance::Exact:
    return "exact";
  case Provenance::PauliMeasured:
    return "pauli-measured";
  default:
    return "cfd";
  }
}

inline Provenance provenance_from_string(const std::string &s) {
  if (s == "exact")
    return Provenance::Exact;
  if (s == "pauli-measured")
    return Provenance::PauliMeasured;
  if (s == "cfd")
    return Provenance::Cfd;
  throw ContractViolation("unknown moment provenance '" + s + "'");
}

struct MomentTable {
  std::vector<double> values; ///< m_0 .. m_N
  Provenance provenance = Provenance::Exact;
  std::vector<std::string> warnings;

  int max_order() const noexcept { return static_cast<int>(values.size()) - 1; }
  double operator[](int n) const { return values.at(static_cast<std::size_t>(n)); }

  void require_order(int needed, const std::string &who) const {
    if (max_order() < needed)
      throw InsufficientOrderError(who, needed, max_order());
  }
};

/// c_1 .. c_N; c(n) is 1-based.
struct ConnectedMomentTable {
  std::vector<double> values;

  int max_order() const noexcept { return static_cast<int>(values.size()); }
  double operator()(int n) const { return values.at(static_cast<std::size_t>(n - 1)); }

  void require_order(int needed, const std::string &who) const {
    if (max_order() < needed)
      throw InsufficientOrderError(who, needed, max_order());
  }
};

using ExpectationMap = std::map<PauliString, double>;

namespace detail {

inline void check_moment_order(int n, MomentTable &table) {
  if (n < 0)
    throw ContractViolation("moment order must be non-negative");
  if (n > kMaxMomentOrder)
    throw ResourceError("moment order " + std::to_string(n) + " exceeds cap " +
                        std::to_string(kMaxMomentOrder));
  if (n > kMomentWarnOrder)
    table.warnings.push_back("moment order " + std::to_string(n) +
                             " above 20: Hankel matrices built from these "
                             "values are badly conditioned");
}

inline Eigen::MatrixXcd hermitian_dense(const PauliSum &h, const char *who) {
  if (!h.is_hermitian(1e-10))
    throw ContractViolation(std::string(who) + ": operator is not Hermitian");
  if (h.n_qubits() > kMaxDenseQubits)
    throw ResourceError(std::string(who) + ": dense route capped at 12 qubits");
  return to_dense(h);
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n)
    return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i)
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

} // namespace detail

/// Power iteration on the dense operator with symmetrized contractions:
/// m_{2k} = <v_k|v_k>, m_{2k+1} = <v_k|H|v_k>, v_k = H^k |phi>.
inline MomentTable moments_exact(const StateVector &state, const PauliSum &h,
                                 int max_order) {
  require_same_qubits(state.n_qubits(), h.n_qubits(), "moments_exact");
  MomentTable out;
  detail::check_moment_order(max_order, out);
  const Eigen::MatrixXcd hd = detail::hermitian_dense(h, "moments_exact");
  out.values.assign(static_cast<std::size_t>(max_order) + 1, 0.0);
  Eigen::VectorXcd v = state.amplitudes();
  for (int k = 0; 2 * k <= max_order; ++k) {
    out.values[static_cast<std::size_t>(2 * k)] = v.squaredNorm();
    const Eigen::VectorXcd next = hd * v;
    if (2 * k + 1 <= max_order)
      out.values[static_cast<std::size_t>(2 * k + 1)] = v.dot(next).real();
    v = next;
  }
  return out;
}

/// Unsymmetrized m_n = <phi|H^n phi>; kept for comparison with the
/// symmetrized route.
inline MomentTable moments_exact_flat(const StateVector &state,
                                      const PauliSum &h, int max_order) {
  require_same_qubits(state.n_qubits(), h.n_qubits(), "moments_exact_flat");
  MomentTable out;
  detail::check_moment_order(max_order, out);
  const Eigen::MatrixXcd hd = detail::hermitian_dense(h, "moments_exact_flat");
  Eigen::VectorXcd v = state.amplitudes();
  for (int n = 0; n <= max_order; ++n) {
    out.values.push_back(state.amplitudes().dot(v).real());
    v = hd * v;
  }
  return out;
}

/// Exact <P> for every string, e.g. to feed the expectation route noiselessly.
inline ExpectationMap exact_expectations(const StateVector &state,
                                         const std::vector<PauliString> &strings) {
  ExpectationMap out;
  for (const auto &p : strings)
    out[p] = expectation(state, p);
  return out;
}

namespace detail {

/// Strings absent from the map, as literals. The identity never needs
/// measuring: <I> = 1.
inline std::vector<std::string> missing_strings(const PauliSum &op,
                                                const ExpectationMap &ex) {
  std::vector<std::string> missing;
  for (const auto &kv : op)
    if (!kv.first.is_identity() && !ex.contains(kv.first))
      missing.push_back(kv.first.literal());
  return missing;
}

inline double lookup(const ExpectationMap &ex, const PauliString &p) {
  if (p.is_identity())
    return 1.0;
  return ex.at(p);
}

inline void check_expectation_range(const ExpectationMap &ex) {
  constexpr double eps = 1e-6;
  for (const auto &[p, v] : ex)
    if (!(v >= -1.0 - eps && v <= 1.0 + eps))
      throw ContractViolation("expectation of " + p.literal() + " = " +
                              std::to_string(v) + " lies outside [-1, 1]");
}

inline void throw_coverage(std::vector<std::string> missing, const char *who) {
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
  std::string msg = std::string(who) + ": " + std::to_string(missing.size()) +
                    " required Pauli strings were not measured:";
  for (std::size_t i = 0; i < missing.size() && i < 16; ++i)
    msg += " " + missing[i];
  if (missing.size() > 16)
    msg += " ...";
  throw CoverageError(msg, std::move(missing));
}

} // namespace detail

/// Contracts the Pauli expansion of each H^n against measured <P> values.
/// Linear in the expectations, so noisy or calibrated inputs pass straight
/// through.
inline MomentTable moments_from_expectations(const PauliSum &h, int max_order,
                                             const ExpectationMap &expectations) {
  MomentTable out;
  out.provenance = Provenance::PauliMeasured;
  detail::check_moment_order(max_order, out);
  detail::check_expectation_range(expectations);
  std::vector<PauliSum> powers;
  powers.reserve(static_cast<std::size_t>(max_order) + 1);
  powers.push_back(PauliSum::identity(h.n_qubits()));
  std::vector<std::string> missing;
  for (int n = 1; n <= max_order; ++n) {
    powers.push_back(multiply(powers.back(), h).pruned_relative(kRelativePrune));
    auto m = detail::missing_strings(powers.back(), expectations);
    missing.insert(missing.end(), m.begin(), m.end());
  }
  if (!missing.empty())
    detail::throw_coverage(std::move(missing), "moments_from_expectations");
  for (const auto &pw : powers) {
    double acc = 0.0;
    for (const auto &[s, c] : pw)
      acc += c.real() * detail::lookup(expectations, s);
    out.values.push_back(acc);
  }
  return out;
}

/// G(a, b) = Re <phi|H^a O H^b|phi> for a, b <= order. Symmetric sums over
/// (a, b) of this table equal the full complex sums, since
/// <H^a O H^b> = conj(<H^b O H^a>) for Hermitian H and O.
using GeneralizedMomentTable = Eigen::MatrixXd;

inline GeneralizedMomentTable
generalized_moments_exact(const StateVector &state, const PauliSum &h,
                          const PauliSum &o, int order) {
  require_same_qubits(state.n_qubits(), h.n_qubits(), "generalized_moments");
  require_same_qubits(h.n_qubits(), o.n_qubits(), "generalized_moments");
  if (order < 0)
    throw ContractViolation("generalized_moments: order must be >= 0");
  const Eigen::MatrixXcd hd = detail::hermitian_dense(h, "generalized_moments");
  const Eigen::MatrixXcd od = detail::hermitian_dense(o, "generalized_moments");
  std::vector<Eigen::VectorXcd> v{state.amplitudes()};
  for (int k = 1; k <= order; ++k)
    v.push_back(hd * v.back());
  GeneralizedMomentTable g(order + 1, order + 1);
  for (int b = 0; b <= order; ++b) {
    const Eigen::VectorXcd ob = od * v[static_cast<std::size_t>(b)];
    for (int a = 0; a <= order; ++a)
      g(a, b) = v[static_cast<std::size_t>(a)].dot(ob).real();
  }
  return g;
}

/// Same table from measured string expectations.
inline GeneralizedMomentTable
generalized_moments_from_expectations(const PauliSum &h, const PauliSum &o,
                                      int order,
                                      const ExpectationMap &expectations) {
  require_same_qubits(h.n_qubits(), o.n_qubits(), "generalized_moments");
  if (order < 0)
    throw ContractViolation("generalized_moments: order must be >= 0");
  detail::check_expectation_range(expectations);
  std::unordered_map<PauliString, double, PauliStringHash> lookup(
      expectations.begin(), expectations.end());
  lookup[PauliString::identity(h.n_qubits())] = 1.0;

  // Column b starts at O H^b; each row step multiplies H on the left.
  GeneralizedMomentTable g(order + 1, order + 1);
  std::vector<std::string> missing;
  PauliSum column_start = o;
  for (int b = 0; b <= order; ++b) {
    PauliSum op = column_start;
    for (int a = 0; a <= order; ++a) {
      if (a > 0)
        op = multiply(h, op).pruned_relative(kRelativePrune);
      Complex acc{};
      for (const auto &[s, c] : op) {
        auto it = lookup.find(s);
        if (it == lookup.end())
          missing.push_back(s.literal());
        else
          acc += c * it->second;
      }
      g(a, b) = acc.real();
    }
    column_start = multiply(column_start, h).pruned_relative(kRelativePrune);
  }
  if (!missing.empty())
    detail::throw_coverage(std::move(missing), "generalized_moments");
  return g;
}

/// Re <phi|H^a O H^b|phi> by repeated application.
inline double generalized_moment(const StateVector &state, const PauliSum &h,
                                 const PauliSum &o, int a, int b) {
  if (a < 0 || b < 0)
    throw ContractViolation("generalized_moment: powers must be >= 0");
  const Eigen::MatrixXcd hd = detail::hermitian_dense(h, "generalized_moment");
  const Eigen::MatrixXcd od = detail::hermitian_dense(o, "generalized_moment");
  Eigen::VectorXcd left = state.amplitudes(), right = state.amplitudes();
  for (int k = 0; k < a; ++k)
    left = hd * left;
  for (int k = 0; k < b; ++k)
    right = hd * right;
  return left.dot(od * right).real();
}

/// Re <phi|H^a O H^b|phi> from measured string expectations.
inline double generalized_moment(const PauliSum &h, const PauliSum &o, int a,
                                 int b, const ExpectationMap &expectations) {
  if (a < 0 || b < 0)
    throw ContractViolation("generalized_moment: powers must be >= 0");
  const PauliSum op = multiply(multiply(power(h, a), o), power(h, b))
                          .pruned_relative(kRelativePrune);
  auto missing = detail::missing_strings(op, expectations);
  if (!missing.empty())
    detail::throw_coverage(std::move(missing), "generalized_moment");
  Complex acc{};
  for (const auto &[s, c] : op)
    acc += c * detail::lookup(expectations, s);
  return acc.real();
}

/// c_n = m_n - sum_{k=1}^{n-1} C(n-1, k-1) c_k m_{n-k}.
inline ConnectedMomentTable connected_moments(const MomentTable &m) {
  if (m.max_order() < 1)
    throw InsufficientOrderError("connected_moments", 1, m.max_order());
  ConnectedMomentTable out;
  for (int n = 1; n <= m.max_order(); ++n) {
    double c = m[n];
    for (int k = 1; k < n; ++k)
      c -= detail::binomial(n - 1, k - 1) * out(k) * m[n - k];
    out.values.push_back(c);
  }
  return out;
}

/// Central finite difference of the propagator U(t) = exp(-iHt):
///   H^n ~ i^n [U(dt/2) - U(-dt/2)]^n / dt^n
///       = sum_k i^n (-1)^k C(n,k) / dt^n  U(dt/2)^{n-2k},
/// with each U^p applied to |phi> in the eigenbasis of the dense H. The
/// binomial combination cancels down to O((E dt)^n), so it is accumulated in
/// quad precision.
inline double moments_via_cfd(const StateVector &state, const PauliSum &h, int n,
                         double dt) {
  using quad = boost::multiprecision::cpp_bin_float_quad;
  require_same_qubits(state.n_qubits(), h.n_qubits(), "moments_via_cfd");
  if (n < 1)
    throw ContractViolation("moments_via_cfd: order must be >= 1");
  if (!(dt > 0.0))
    throw ContractViolation("moments_via_cfd: dt must be positive");
  const SpectrumResult spec = exact_spectrum(h, 1e-10);
  const Eigen::VectorXcd coeffs = spec.eigenvectors.adjoint() * state.amplitudes();

  // i^n split into (re, im) of the prefactor.
  const Complex in = detail::i_pow(n);
  const quad qdt = dt;
  const quad scale = 1 / boost::multiprecision::pow(qdt, n);
  double result = 0.0;
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
    const quad energy = spec.eigenvalues(j);
    quad re = 0, im = 0;
    for (int k = 0; k <= n; ++k) {
      const quad w = (k % 2 ? -1 : 1) * quad(detail::binomial(n, k));
      const quad angle = -energy * (n - 2 * k) * qdt / 2;
      re += w * cos(angle);
      im += w * sin(angle);
    }
    // (in.re + i in.im)(re + i im) * scale, real part only.
    const quad value = (quad(in.real()) * re - quad(in.imag()) * im) * scale;
    result += std::norm(coeffs(j)) * static_cast<double>(value);
  }
  return result;
}

/// Richardson extrapolation of the O(dt^2) CFD error: (4 f(dt/2) - f(dt)) / 3.
inline double moments_via_cfd_richardson(const StateVector &state, const PauliSum &h,
                                    int n, double dt) {
  return (4.0 * moments_via_cfd(state, h, n, dt / 2) - moments_via_cfd(state, h, n, dt)) /
         3.0;
}

inline MomentTable moments_cfd(const StateVector &state, const PauliSum &h,
                               int max_order, double dt, bool extrapolate) {
  MomentTable out;
  out.provenance = Provenance::Cfd;
  detail::check_moment_order(max_order, out);
  out.values.push_back(state.amplitudes().squaredNorm());
  for (int n = 1; n <= max_order; ++n)
    out.values.push_back(extrapolate ? moments_via_cfd_richardson(state, h, n, dt)
                                     : moments_via_cfd(state, h, n, dt));
  return out;
}

/// x^n = sum_k C_{n,k} T_k(x): C_{n,k} = 2^{1-n} binom(n, (n-k)/2) for k > 0
/// with n-k even, 2^{-n} binom(n, n/2) for k = 0 with n even, zero otherwise.
inline std::vector<double> chebyshev_coefficients(int n) {
  if (n < 0)
    throw ContractViolation("chebyshev_coefficients: n must be >= 0");
  std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = 0; k <= n; ++k) {
    if ((n - k) % 2)
      continue;
    if (k == 0)
      c[0] = std::ldexp(detail::binomial(n, n / 2), -n);
    else
      c[static_cast<std::size_t>(k)] =
          std::ldexp(detail::binomial(n, (n - k) / 2), 1 - n);
  }
  return c;
}

inline void write_csv(std::ostream &os, const MomentTable &m) {
  os << "order,value,provenance\n";
  for (int n = 0; n <= m.max_order(); ++n)
    os << n << ',' << csv::number(m[n]) << ',' << to_string(m.provenance)
       << '\n';
}

/// Reads what write_csv produced; '#' lines are comments.
inline MomentTable read_csv(std::istream &is) {
  MomentTable m;
  std::string line;
  bool header = false;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#')
      continue;
    if (!header) {
      if (line != "order,value,provenance")
        throw ContractViolation("moment CSV: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    const auto cols = csv::split(line);
    if (cols.size() != 3)
      throw ContractViolation("moment CSV line " + std::to_string(line_no) +
                              ": expected 3 columns");
    const int order = std::stoi(cols[0]);
    if (order != m.max_order() + 1)
      throw ContractViolation("moment CSV line " + std::to_string(line_no) +
                              ": orders must be consecutive from 0");
    m.values.push_back(csv::parse_number(cols[1]));
    m.provenance = provenance_from_string(cols[2]);
  }
  if (m.values.empty())
    throw ContractViolation("moment CSV: no rows");
  return m;
}

} // namespace hmoments
