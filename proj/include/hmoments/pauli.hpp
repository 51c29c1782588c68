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
 * Pauli strings in symplectic bit-mask form and weighted sums of them.
 *
 * Conventions used throughout the library:
 *  - qubit 0 is the leftmost letter of a string literal ("XYZI") and the
 *    leftmost symbol of a ket literal (|1100> has qubits 0 and 1 set);
 *  - in a dense state vector, basis index bit q holds the value of qubit q,
 *    so |1000> is index 1 and |0001> is index 8;
 *  - a factor at qubit q is I (x=0,z=0), X (1,0), Z (0,1) or Y (1,1), and
 *    Y = i X Z. Strings carry no phase; phases live in coefficients.
 */

#include <algorithm>
#include <bit>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hmoments/errors.hpp"

namespace hmoments {

using Complex = std::complex<double>;

inline constexpr int kMaxQubits = 64;
inline constexpr int kMaxDenseQubits = 12;
inline constexpr double kDefaultDropout = 1e-12;

namespace detail {
inline std::uint64_t low_mask(int n) {
  return n >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
}
inline int popcount(std::uint64_t v) { return std::popcount(v); }

/// i^k for k taken mod 4.
inline Complex i_pow(int k) {
  switch (((k % 4) + 4) % 4) {
  case 0:
    return {1.0, 0.0};
  case 1:
    return {0.0, 1.0};
  case 2:
    return {-1.0, 0.0};
  default:
    return {0.0, -1.0};
  }
}
} // namespace detail

class PauliString {
public:
  PauliString() = default;

  PauliString(int n_qubits, std::uint64_t x_mask, std::uint64_t z_mask)
      : n_(n_qubits), x_(x_mask), z_(z_mask) {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
      throw DimensionError("PauliString: qubit count must be in [1, 64], got " +
                           std::to_string(n_qubits));
    const auto outside = ~detail::low_mask(n_qubits);
    if ((x_mask & outside) || (z_mask & outside))
      throw ContractViolation("PauliString: mask bits beyond qubit count");
  }

  static PauliString identity(int n_qubits) { return {n_qubits, 0, 0}; }

  /// Parses a literal such as "XYZI"; qubit 0 is the first character.
  static PauliString from_literal(std::string_view text) {
    const int n = static_cast<int>(text.size());
    if (n < 1 || n > kMaxQubits)
      throw DimensionError("PauliString literal must have 1..64 letters");
    std::uint64_t x = 0, z = 0;
    for (int q = 0; q < n; ++q) {
      const std::uint64_t bit = std::uint64_t{1} << q;
      switch (text[static_cast<std::size_t>(q)]) {
      case 'I':
        break;
      case 'X':
        x |= bit;
        break;
      case 'Y':
        x |= bit;
        z |= bit;
        break;
      case 'Z':
        z |= bit;
        break;
      default:
        throw ContractViolation("invalid Pauli letter '" +
                                std::string(1, text[static_cast<std::size_t>(q)]) +
                                "' in literal " + std::string(text));
      }
    }
    return {n, x, z};
  }

  /// Single non-identity factor `letter` on `qubit`.
  static PauliString single(int n_qubits, int qubit, char letter) {
    if (qubit < 0 || qubit >= n_qubits)
      throw DimensionError("PauliString::single: qubit out of range");
    std::string lit(static_cast<std::size_t>(n_qubits), 'I');
    lit[static_cast<std::size_t>(qubit)] = letter;
    return from_literal(lit);
  }

  int n_qubits() const noexcept { return n_; }
  std::uint64_t x_mask() const noexcept { return x_; }
  std::uint64_t z_mask() const noexcept { return z_; }
  std::uint64_t support() const noexcept { return x_ | z_; }
  int weight() const noexcept { return detail::popcount(support()); }
  bool is_identity() const noexcept { return support() == 0; }
  bool is_diagonal() const noexcept { return x_ == 0; }

  char letter(int q) const {
    const bool x = (x_ >> q) & 1U, z = (z_ >> q) & 1U;
    return x ? (z ? 'Y' : 'X') : (z ? 'Z' : 'I');
  }

  std::string literal() const {
    std::string out(static_cast<std::size_t>(n_), 'I');
    for (int q = 0; q < n_; ++q)
      out[static_cast<std::size_t>(q)] = letter(q);
    return out;
  }

  friend bool operator==(const PauliString &, const PauliString &) = default;
  friend auto operator<=>(const PauliString &, const PauliString &) = default;

private:
  int n_ = 1;
  std::uint64_t x_ = 0;
  std::uint64_t z_ = 0;
};

struct PauliStringHash {
  std::size_t operator()(const PauliString &p) const noexcept {
    std::size_t h = std::hash<std::uint64_t>{}(p.x_mask());
    h ^= std::hash<std::uint64_t>{}(p.z_mask()) + 0x9e3779b97f4a7c15ULL +
         (h << 6) + (h >> 2);
    return h ^ static_cast<std::size_t>(p.n_qubits());
  }
};

struct PauliTerm {
  PauliString string;
  Complex coefficient{1.0, 0.0};
};

inline void require_same_qubits(int a, int b, const char *where) {
  if (a != b)
    throw DimensionError(std::string(where) + ": qubit count mismatch (" +
                         std::to_string(a) + " vs " + std::to_string(b) + ")");
}

struct PauliProduct {
  Complex phase;
  PauliString string;
};

/// a * b as phase * string. With P = i^{x.z} X^x Z^z per qubit, moving Z^za
/// past X^xb costs (-1)^{za.xb}; the exponent of i is accumulated bitwise.
inline PauliProduct multiply(const PauliString &a, const PauliString &b) {
  require_same_qubits(a.n_qubits(), b.n_qubits(), "pauli multiply");
  const std::uint64_t x = a.x_mask() ^ b.x_mask();
  const std::uint64_t z = a.z_mask() ^ b.z_mask();
  const int exponent = detail::popcount(a.x_mask() & a.z_mask()) +
                       detail::popcount(b.x_mask() & b.z_mask()) +
                       2 * detail::popcount(a.z_mask() & b.x_mask()) -
                       detail::popcount(x & z);
  return {detail::i_pow(exponent), PauliString(a.n_qubits(), x, z)};
}

inline PauliTerm operator*(const PauliTerm &a, const PauliTerm &b) {
  const auto [phase, s] = multiply(a.string, b.string);
  return {s, a.coefficient * b.coefficient * phase};
}

/// True iff at every qubit the factors are equal or one of them is I.
inline bool qubitwise_commutes(const PauliString &a, const PauliString &b) {
  require_same_qubits(a.n_qubits(), b.n_qubits(), "qubitwise_commutes");
  const std::uint64_t differ =
      (a.x_mask() ^ b.x_mask()) | (a.z_mask() ^ b.z_mask());
  return (differ & a.support() & b.support()) == 0;
}

/// Symplectic commutation test.
inline bool commutes(const PauliString &a, const PauliString &b) {
  require_same_qubits(a.n_qubits(), b.n_qubits(), "commutes");
  const std::uint64_t anti =
      (a.x_mask() & b.z_mask()) ^ (a.z_mask() & b.x_mask());
  return detail::popcount(anti) % 2 == 0;
}

/// Linear combination of Pauli strings with complex coefficients. Entries with
/// magnitude below the dropout tolerance are never stored.
class PauliSum {
public:
  using TermMap = std::map<PauliString, Complex>;

  explicit PauliSum(int n_qubits, double dropout = kDefaultDropout)
      : n_(n_qubits), dropout_(dropout) {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
      throw DimensionError("PauliSum: qubit count must be in [1, 64]");
  }

  PauliSum(int n_qubits,
           std::initializer_list<std::pair<std::string_view, Complex>> terms,
           double dropout = kDefaultDropout)
      : PauliSum(n_qubits, dropout) {
    for (const auto &[lit, c] : terms)
      add(PauliString::from_literal(lit), c);
  }

  static PauliSum identity(int n_qubits, Complex scale = 1.0) {
    PauliSum out(n_qubits);
    out.add(PauliString::identity(n_qubits), scale);
    return out;
  }

  int n_qubits() const noexcept { return n_; }
  double dropout_tolerance() const noexcept { return dropout_; }
  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }
  const TermMap &terms() const noexcept { return terms_; }
  auto begin() const { return terms_.begin(); }
  auto end() const { return terms_.end(); }

  void add(const PauliString &s, Complex c) {
    require_same_qubits(n_, s.n_qubits(), "PauliSum::add");
    auto [it, inserted] = terms_.try_emplace(s, c);
    if (!inserted)
      it->second += c;
    if (std::abs(it->second) < dropout_)
      terms_.erase(it);
  }
  void add(const PauliTerm &t) { add(t.string, t.coefficient); }

  Complex coefficient(const PauliString &s) const {
    auto it = terms_.find(s);
    return it == terms_.end() ? Complex{} : it->second;
  }

  std::vector<PauliString> strings() const {
    std::vector<PauliString> out;
    out.reserve(terms_.size());
    for (const auto &kv : terms_)
      out.push_back(kv.first);
    return out;
  }

  /// Every coefficient real within `tol` (Pauli strings are Hermitian).
  bool is_hermitian(double tol = 1e-12) const {
    return std::all_of(terms_.begin(), terms_.end(), [tol](const auto &kv) {
      return std::abs(kv.second.imag()) <= tol;
    });
  }

  /// Copy without the terms below `relative` times the largest magnitude.
  /// Powers of a sum carry rounding residue proportional to their scale,
  /// which an absolute dropout cannot remove.
  PauliSum pruned_relative(double relative) const {
    double top = 0.0;
    for (const auto &kv : terms_)
      top = std::max(top, std::abs(kv.second));
    PauliSum out(n_, dropout_);
    for (const auto &[s, c] : terms_)
      if (std::abs(c) > relative * top)
        out.terms_.emplace(s, c);
    return out;
  }

  /// Largest |imaginary part| over all coefficients.
  double max_imaginary() const {
    double out = 0.0;
    for (const auto &kv : terms_)
      out = std::max(out, std::abs(kv.second.imag()));
    return out;
  }

  PauliSum &operator+=(const PauliSum &other) {
    require_same_qubits(n_, other.n_, "PauliSum::operator+=");
    for (const auto &[s, c] : other.terms_)
      add(s, c);
    return *this;
  }
  friend PauliSum operator+(PauliSum a, const PauliSum &b) { return a += b; }

  PauliSum &operator*=(Complex scale) {
    TermMap scaled;
    for (const auto &[s, c] : terms_)
      if (std::abs(c * scale) >= dropout_)
        scaled.emplace(s, c * scale);
    terms_ = std::move(scaled);
    return *this;
  }
  friend PauliSum operator*(PauliSum a, Complex scale) { return a *= scale; }
  friend PauliSum operator*(Complex scale, PauliSum a) { return a *= scale; }

  friend bool operator==(const PauliSum &a, const PauliSum &b) {
    return a.n_ == b.n_ && a.terms_ == b.terms_;
  }

private:
  friend PauliSum multiply(const PauliSum &a, const PauliSum &b);

  int n_;
  double dropout_;
  TermMap terms_;
};

/// All pairwise products, merged per string, pruned at the dropout tolerance
/// of `a` once the full sum is accumulated.
inline PauliSum multiply(const PauliSum &a, const PauliSum &b) {
  require_same_qubits(a.n_qubits(), b.n_qubits(), "PauliSum multiply");
  PauliSum::TermMap acc;
  for (const auto &[sa, ca] : a.terms_)
    for (const auto &[sb, cb] : b.terms_) {
      const auto [phase, s] = multiply(sa, sb);
      acc[s] += ca * cb * phase;
    }
  PauliSum out(a.n_qubits(), a.dropout_tolerance());
  for (auto &[s, c] : acc)
    if (std::abs(c) >= out.dropout_)
      out.terms_.emplace(s, c);
  return out;
}

inline PauliSum operator*(const PauliSum &a, const PauliSum &b) {
  return multiply(a, b);
}

inline PauliSum power(const PauliSum &a, int n) {
  if (n < 0)
    throw ContractViolation("PauliSum power: exponent must be non-negative");
  PauliSum out = PauliSum::identity(a.n_qubits());
  for (int k = 0; k < n; ++k)
    out = multiply(out, a);
  return out;
}

struct ClosureResult {
  std::vector<PauliString> strings; ///< sorted, duplicate free
  bool closed = false;              ///< set stopped growing before max_power
  int powers_used = 0;              ///< highest power multiplied out
  std::vector<std::size_t> growth;  ///< union size after each power
};

/// Union of the strings of A^1..A^k, stopping at the first k where the union
/// does not grow.
inline ClosureResult basis_closure(const PauliSum &a, int max_power) {
  if (max_power < 1)
    throw ContractViolation("basis_closure: max_power must be >= 1");
  ClosureResult out;
  std::vector<PauliString> seen;
  PauliSum current = PauliSum::identity(a.n_qubits());
  for (int k = 1; k <= max_power; ++k) {
    current = multiply(current, a);
    const std::size_t before = seen.size();
    for (const auto &kv : current)
      seen.push_back(kv.first);
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    out.powers_used = k;
    out.growth.push_back(seen.size());
    if (k > 1 && seen.size() == before) {
      out.closed = true;
      break;
    }
  }
  out.strings = std::move(seen);
  return out;
}

/// Column j of the dense matrix of P: P|j> = i^{|x&z|} (-1)^{|z&j|} |j^x>.
inline Eigen::MatrixXcd to_dense(const PauliString &p) {
  if (p.n_qubits() > kMaxDenseQubits)
    throw ResourceError("to_dense: more than 12 qubits");
  const std::size_t dim = std::size_t{1} << p.n_qubits();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim),
                                              static_cast<Eigen::Index>(dim));
  const Complex base = detail::i_pow(detail::popcount(p.x_mask() & p.z_mask()));
  for (std::uint64_t j = 0; j < dim; ++j) {
    const double sign = detail::popcount(p.z_mask() & j) % 2 ? -1.0 : 1.0;
    m(static_cast<Eigen::Index>(j ^ p.x_mask()), static_cast<Eigen::Index>(j)) =
        base * sign;
  }
  return m;
}

inline Eigen::MatrixXcd to_dense(const PauliSum &a) {
  if (a.n_qubits() > kMaxDenseQubits)
    throw ResourceError("to_dense: more than 12 qubits");
  const std::size_t dim = std::size_t{1} << a.n_qubits();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim),
                                              static_cast<Eigen::Index>(dim));
  for (const auto &[s, c] : a) {
    const Complex base =
        c * detail::i_pow(detail::popcount(s.x_mask() & s.z_mask()));
    for (std::uint64_t j = 0; j < dim; ++j) {
      const double sign = detail::popcount(s.z_mask() & j) % 2 ? -1.0 : 1.0;
      m(static_cast<Eigen::Index>(j ^ s.x_mask()),
        static_cast<Eigen::Index>(j)) += base * sign;
    }
  }
  return m;
}

} // namespace hmoments
