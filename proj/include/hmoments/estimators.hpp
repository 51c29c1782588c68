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
 * Classical post-processing of moment tables into energies and observables.
 *
 * Every estimator takes a MomentTable (or its connected counterpart) and
 * returns an EstimatorResult. Nothing here touches a state vector, so the
 * same code serves exact, sampled and finite-difference moments alike.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "hmoments/csv.hpp"
#include "hmoments/errors.hpp"
#include "hmoments/moments.hpp"

namespace hmoments {

struct EstimatorResult {
  std::string method;
  std::map<std::string, double> params;
  double energy = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> spectrum;              ///< Krylov eigenvalues or real PDS roots
  std::vector<Complex> complex_roots;        ///< PDS roots with sizeable imaginary part
  std::vector<double> alpha, beta;           ///< Lanczos coefficients, if computed
  std::optional<double> tau;                 ///< ITE step actually used
  std::map<std::string, double> diagnostics;
  std::vector<std::string> warnings;
};

inline void write_result_header(std::ostream &os) {
  os << "method,params,estimate,diagnostics\n";
}

/// `key=value` pairs joined by ';' inside a CSV cell.
inline void write_result_row(std::ostream &os, const EstimatorResult &r) {
  auto join = [](const std::map<std::string, double> &kv) {
    std::string s;
    for (const auto &[k, v] : kv) {
      if (!s.empty())
        s += ';';
      s += k + "=" + csv::number(v);
    }
    return s;
  };
  os << r.method << ',' << join(r.params) << ',' << csv::number(r.energy) << ','
     << join(r.diagnostics) << '\n';
}

// ---------------------------------------------------------------------------
// Krylov subspace

struct KrylovMatrices {
  Eigen::MatrixXd L; ///< L_ij = m_{i+j}
  Eigen::MatrixXd R; ///< R_ij = m_{i+j+1}
};

inline KrylovMatrices krylov_matrices(const MomentTable &m, int r) {
  if (r < 0)
    throw ContractViolation("krylov_matrices: r must be >= 0");
  m.require_order(2 * r + 1, "krylov_matrices");
  KrylovMatrices k{Eigen::MatrixXd(r + 1, r + 1), Eigen::MatrixXd(r + 1, r + 1)};
  for (int i = 0; i <= r; ++i)
    for (int j = 0; j <= r; ++j) {
      k.L(i, j) = m[i + j];
      k.R(i, j) = m[i + j + 1];
    }
  return k;
}

inline constexpr double kDefaultDropTolerance = 1e-10;

/// Whitened Krylov frame: U = V_kept s_kept^{-1/2}, so U^T L U = I and the
/// projected Hamiltonian is U^T R U.
struct CanonicalFrame {
  Eigen::MatrixXd transform;
  Eigen::MatrixXd hamiltonian;
  Eigen::VectorXd overlap_eigenvalues; ///< all eigenvalues of L, ascending
  int kept = 0;
  double drop_tolerance = kDefaultDropTolerance;
};

inline CanonicalFrame canonical_frame(const KrylovMatrices &k,
                                      double drop_tol = kDefaultDropTolerance) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.L);
  CanonicalFrame f;
  f.drop_tolerance = drop_tol;
  f.overlap_eigenvalues = es.eigenvalues();
  const double s_max = es.eigenvalues().maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (s_max > 0.0 && es.eigenvalues()(i) >= drop_tol * s_max)
      keep.push_back(i);
  if (keep.empty())
    throw DegenerateSubspaceError(
        "krylov: every overlap eigenvalue fell below the drop tolerance");
  f.kept = static_cast<int>(keep.size());
  f.transform.resize(k.L.rows(), f.kept);
  for (int c = 0; c < f.kept; ++c) {
    const Eigen::Index i = keep[static_cast<std::size_t>(c)];
    f.transform.col(c) = es.eigenvectors().col(i) / std::sqrt(es.eigenvalues()(i));
  }
  const Eigen::MatrixXd h = f.transform.transpose() * k.R * f.transform;
  f.hamiltonian = 0.5 * (h + h.transpose());
  return f;
}

/// Ground and excited estimates from R v = E L v in the Krylov space of
/// dimension r + 1.
inline EstimatorResult krylov_generalized_eig(const MomentTable &m, int r,
                                              double drop_tol = kDefaultDropTolerance) {
  const CanonicalFrame f = canonical_frame(krylov_matrices(m, r), drop_tol);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.hamiltonian);
  EstimatorResult out;
  out.method = "krylov";
  out.params["r"] = r;
  out.spectrum.assign(es.eigenvalues().data(),
                      es.eigenvalues().data() + es.eigenvalues().size());
  out.energy = out.spectrum.front();
  const auto &s = f.overlap_eigenvalues;
  out.diagnostics["drop_tolerance"] = drop_tol;
  out.diagnostics["kept_dimension"] = f.kept;
  out.diagnostics["dropped_dimension"] = static_cast<double>(s.size()) - f.kept;
  out.diagnostics["overlap_condition"] =
      s(0) > 0.0 ? s(s.size() - 1) / s(0) : std::numeric_limits<double>::infinity();
  if (f.kept < r + 1)
    out.warnings.push_back("krylov: " + std::to_string(r + 1 - f.kept) +
                           " near-null overlap directions dropped");
  return out;
}

// ---------------------------------------------------------------------------
// Lanczos

struct LanczosCoefficients {
  std::vector<double> alpha; ///< alpha_1 ..
  std::vector<double> beta;  ///< beta_1 .., a trailing zero marks termination
  bool terminated = false;   ///< an invariant subspace was reached

  /// The leading tridiagonal block with `alpha.size()` rows.
  Eigen::MatrixXd tridiagonal() const {
    const auto n = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < n)
        t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    return t;
  }

  Eigen::VectorXd eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tridiagonal());
    return es.eigenvalues();
  }
};

/// Gram-Schmidt of the Krylov vectors carried out on the moment matrices:
/// L = C C^T (Cholesky), T = C^{-1} R C^{-T}. The Cholesky pivots give
/// beta_k = C_{k+1,k+1} / C_{k,k}; a pivot below `tol` times m_{2k} means the
/// Krylov space closed and the recursion stops with beta = 0.
inline LanczosCoefficients lanczos_coefficients(const MomentTable &m, int depth,
                                                double tol = 1e-10) {
  if (depth < 1)
    throw ContractViolation("lanczos_coefficients: depth must be >= 1");
  m.require_order(2 * depth, "lanczos_coefficients");
  const int size = depth + 1;
  Eigen::MatrixXd L(size, size), R(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      L(i, j) = m[i + j];
      R(i, j) = i + j + 1 <= m.max_order() ? m[i + j + 1] : 0.0;
    }

  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(size, size);
  int rank = 0;
  for (int k = 0; k < size; ++k) {
    for (int j = 0; j < k; ++j) {
      double s = L(k, j);
      for (int p = 0; p < j; ++p)
        s -= C(k, p) * C(j, p);
      C(k, j) = s / C(j, j);
    }
    double pivot = L(k, k);
    for (int p = 0; p < k; ++p)
      pivot -= C(k, p) * C(k, p);
    if (!(pivot > tol * std::abs(L(k, k))))
      break;
    C(k, k) = std::sqrt(pivot);
    rank = k + 1;
  }
  if (rank == 0)
    throw DegenerateSubspaceError("lanczos_coefficients: m_0 vanishes");

  LanczosCoefficients out;
  const int n_alpha = std::min(rank, depth);
  const auto Cb = C.topLeftCorner(n_alpha, n_alpha).triangularView<Eigen::Lower>();
  const Eigen::MatrixXd half = Cb.solve(R.topLeftCorner(n_alpha, n_alpha));
  const Eigen::MatrixXd T = Cb.solve(half.transpose()).transpose();
  for (int i = 0; i < n_alpha; ++i)
    out.alpha.push_back(T(i, i));
  for (int k = 0; k + 1 < rank && k < depth; ++k)
    out.beta.push_back(C(k + 1, k + 1) / C(k, k));
  if (rank <= depth) {
    out.terminated = true;
    out.beta.push_back(0.0);
  }
  return out;
}

/// The explicit low-order moment formulas, for cross-checking the recursion.
/// The printed expression usually labelled beta_2 evaluates to beta_2^2.
struct LanczosClosedForms {
  double alpha1, beta1, alpha2, beta2_squared;
};

inline LanczosClosedForms lanczos_closed_forms(const MomentTable &m) {
  m.require_order(4, "lanczos_closed_forms");
  const double m1 = m[1], m2 = m[2], m3 = m[3], m4 = m[4];
  LanczosClosedForms f{};
  f.alpha1 = m1;
  const double var = m2 - m1 * m1;
  f.beta1 = std::sqrt(std::max(0.0, var));
  f.alpha2 = (m3 - 2.0 * m2 * m1 + m1 * m1 * m1) / var;
  const double b1sq = f.beta1 * f.beta1;
  const double s = f.alpha1 * f.alpha1 + b1sq;
  f.beta2_squared =
      (m4 - (f.alpha1 + f.alpha2) * (f.alpha1 + f.alpha2) * b1sq - s * s) / b1sq;
  return f;
}

// ---------------------------------------------------------------------------
// Connected-moment estimators

inline constexpr double kZeroVariance = 1e-12;

/// First-order infimum of alpha(z) - 2 beta(z) with
///   alpha(z)   = c1 + z c3 / c2,
///   beta^2(z)  = z c2 + z^2 (c2 c4 - c3^2) / (2 c2^2).
/// Closed form, written without the 0/0 at c2 c4 = c3^2:
///   E = c1 - 2 c2^2 / (sqrt(3 c3^2 - 2 c2 c4) + c3).
inline EstimatorResult infimum_estimate(const ConnectedMomentTable &c) {
  c.require_order(4, "infimum_estimate");
  const double c1 = c(1), c2 = c(2), c3 = c(3), c4 = c(4);
  EstimatorResult out;
  out.method = "infimum";
  if (c2 < kZeroVariance) {
    out.energy = c1;
    out.diagnostics["eigenstate"] = 1.0;
    return out;
  }
  const double radicand = 3.0 * c3 * c3 - 2.0 * c2 * c4;
  if (radicand < 0.0)
    throw DomainError("infimum_estimate: radicand 3c3^2 - 2c2c4 = " +
                      std::to_string(radicand) + " is negative");
  const double denom = std::sqrt(radicand) + c3;
  if (!(denom > 0.0))
    throw DomainError("infimum_estimate: first-order expansion is unbounded "
                      "below");
  out.energy = c1 - 2.0 * c2 * c2 / denom;
  out.diagnostics["radicand"] = radicand;

  const double curvature = c2 * c4 - c3 * c3;
  if (curvature < 0.0) {
    const double z_max = 2.0 * c2 * c2 * c2 / -curvature;
    auto f = [&](double z) {
      const double b2 = z * c2 + z * z * curvature / (2.0 * c2 * c2);
      return c1 + z * c3 / c2 - 2.0 * std::sqrt(std::max(0.0, b2));
    };
    const auto [z_star, value] = boost::math::tools::brent_find_minima(
        f, 0.0, z_max, std::numeric_limits<double>::digits);
    out.diagnostics["z_max"] = z_max;
    out.diagnostics["z_star"] = z_star;
    out.diagnostics["numeric_minimum"] = value;
    out.diagnostics["closed_vs_numeric"] = std::abs(value - out.energy);
  } else {
    out.warnings.push_back("infimum_estimate: c2 c4 >= c3^2, the z-expansion "
                           "has no interior minimum; closed form reported "
                           "without numeric confirmation");
  }
  return out;
}

namespace detail {

/// S_{k,i} as Hankel determinants of the connected moments, built by the
/// Desnanot-Jacobi step
///   S_{k,i+1} = (S_{k,i} S_{k+2,i} - S_{k+1,i}^2) / S_{k+2,i-1},  S_{k,0} = 1,
/// and summed as CMX(n) = c1 - sum_{i<n} S_{2,i}^2 / (S_{3,i-1} S_{3,i}).
/// Dropping the division (`divided = false`) gives the undivided recursion
/// evaluated in the nested fraction, which matches the matrix form only up
/// to n = 3; it is kept as a diagnostic.
inline double cmx_recursion(const ConnectedMomentTable &c, int n,
                            bool divided = true) {
  const int top = 2 * n - 1;
  // S[i][k] = S_{k,i}, i = 0 .. n-1.
  std::vector<std::vector<double>> S(static_cast<std::size_t>(n));
  S[0].assign(static_cast<std::size_t>(top) + 1, 1.0);
  S[1].assign(static_cast<std::size_t>(top) + 1, 0.0);
  for (int k = 1; k <= top; ++k)
    S[1][static_cast<std::size_t>(k)] = c(k);
  for (int i = 1; i + 1 < n; ++i) {
    const auto &prev = S[static_cast<std::size_t>(i)];
    const auto &older = S[static_cast<std::size_t>(i - 1)];
    const int kmax = top - 2 * i;
    auto &cur = S[static_cast<std::size_t>(i + 1)];
    cur.assign(static_cast<std::size_t>(kmax) + 1, 0.0);
    for (int k = 1; k <= kmax; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const double det = prev[uk] * prev[uk + 2] - prev[uk + 1] * prev[uk + 1];
      cur[uk] = divided ? det / older[uk + 2] : det;
    }
  }
  auto s = [&](int k, int i) {
    return S[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  };
  auto guard = [&](int i) {
    double scale = 0.0;
    for (std::size_t k = 1; k < S[static_cast<std::size_t>(i)].size(); ++k)
      scale = std::max(scale, std::abs(S[static_cast<std::size_t>(i)][k]));
    if (!(std::abs(s(3, i)) > 1e-13 * scale))
      throw CmxSingularityError("cmx: S_{3," + std::to_string(i) +
                                "} vanishes, the expansion is singular");
  };
  if (divided) {
    double e = c(1);
    for (int i = 1; i < n; ++i) {
      guard(i);
      e -= s(2, i) * s(2, i) / (s(3, i - 1) * s(3, i));
    }
    return e;
  }
  double tail = 1.0;
  for (int i = n - 1; i >= 2; --i) {
    guard(i);
    tail = 1.0 + s(2, i) * s(2, i) / (s(2, i - 1) * s(2, i - 1) * s(3, i)) * tail;
  }
  guard(1);
  return c(1) - s(2, 1) * s(2, 1) / s(3, 1) * tail;
}

inline double cmx_matrix(const ConnectedMomentTable &c, int n) {
  const int d = n - 1;
  Eigen::MatrixXd A(d, d);
  Eigen::VectorXd b(d);
  for (int i = 0; i < d; ++i) {
    b(i) = c(i + 2);
    for (int j = 0; j < d; ++j)
      A(i, j) = c(i + j + 3);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto &sv = svd.singularValues();
  if (!(sv(d - 1) > 1e-13 * sv(0)))
    throw CmxSingularityError("cmx: connected-moment matrix is singular");
  return c(1) - b.dot(svd.solve(b));
}

} // namespace detail

/// CMX(n) = c1 - b^T A^{-1} b, A_ij = c_{i+j+1}, b = (c2 .. cn), together
/// with the Hankel-determinant recursion over S_{k,i}.
inline EstimatorResult cmx_energy(const ConnectedMomentTable &c, int n) {
  if (n < 1)
    throw ContractViolation("cmx_energy: order must be >= 1");
  EstimatorResult out;
  out.method = "cmx";
  out.params["order"] = n;
  if (n == 1) {
    c.require_order(1, "cmx_energy");
    out.energy = c(1);
    return out;
  }
  c.require_order(2 * n - 1, "cmx_energy");
  if (c(2) < kZeroVariance) {
    out.energy = c(1);
    out.diagnostics["eigenstate"] = 1.0;
    return out;
  }
  const double matrix = detail::cmx_matrix(c, n);
  const double recursion = detail::cmx_recursion(c, n);
  out.energy = matrix;
  out.diagnostics["recursion"] = recursion;
  out.diagnostics["form_disagreement"] = std::abs(matrix - recursion);
  try {
    out.diagnostics["undivided_nested"] = detail::cmx_recursion(c, n, false);
  } catch (const CmxSingularityError &) {
    out.diagnostics["undivided_nested"] = std::numeric_limits<double>::quiet_NaN();
  }
  if (std::abs(matrix - recursion) > 1e-8 * std::max(1.0, std::abs(matrix)))
    out.warnings.push_back("cmx: matrix and recursion forms disagree by " +
                           std::to_string(std::abs(matrix - recursion)));
  return out;
}

// ---------------------------------------------------------------------------
// PDS(K)

/// Solves M X = -Y with M_ij = m_{2K-i-j}, Y_i = m_{2K-i} (1-based), then
/// returns the roots of a^K + sum_i X_i a^{K-i}.
inline EstimatorResult pds_energy(const MomentTable &m, int K) {
  if (K < 1)
    throw ContractViolation("pds_energy: K must be >= 1");
  m.require_order(2 * K - 1, "pds_energy");
  Eigen::MatrixXd M(K, K);
  Eigen::VectorXd Y(K);
  for (int i = 1; i <= K; ++i) {
    Y(i - 1) = m[2 * K - i];
    for (int j = 1; j <= K; ++j)
      M(i - 1, j - 1) = m[2 * K - i - j];
  }
  EstimatorResult out;
  out.method = "pds";
  out.params["K"] = K;

  constexpr double rank_threshold = 1e-13;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
  qr.setThreshold(rank_threshold);
  if (qr.rank() < K) {
    const double ridge = 1e-12 * std::abs(M.trace());
    out.warnings.push_back("pds: Hankel system singular, ridge " +
                           csv::number(ridge) + " added");
    out.diagnostics["ridge"] = ridge;
    qr.compute(M + ridge * Eigen::MatrixXd::Identity(K, K));
    if (qr.rank() < K)
      throw PdsDegeneracyError("pds: Hankel system singular after "
                               "regularization; the trial state spans fewer "
                               "than K eigenvalues, lower K");
  }
  const Eigen::VectorXd X = qr.solve(-Y);

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(K, K);
  for (int i = 0; i < K; ++i)
    companion(0, i) = -X(i);
  for (int i = 1; i < K; ++i)
    companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  const double scale = m.max_order() >= 2 ? m[2] : m[1] * m[1];
  const double imag_tol = 1e-8 * std::sqrt(std::max(0.0, scale));
  for (Eigen::Index i = 0; i < K; ++i) {
    const Complex root = es.eigenvalues()(i);
    if (std::abs(root.imag()) <= imag_tol)
      out.spectrum.push_back(root.real());
    else
      out.complex_roots.push_back(root);
  }
  std::sort(out.spectrum.begin(), out.spectrum.end());
  if (!out.complex_roots.empty())
    out.warnings.push_back("pds: " + std::to_string(out.complex_roots.size()) +
                           " roots with sizeable imaginary part (noisy moments)");
  if (!out.spectrum.empty()) {
    out.energy = out.spectrum.front();
  } else {
    double best = std::numeric_limits<double>::infinity();
    for (const auto &r : out.complex_roots)
      best = std::min(best, r.real());
    out.energy = best;
    out.warnings.push_back("pds: no real root, reporting smallest real part");
  }
  out.diagnostics["hankel_condition"] = condition_number(M);
  return out;
}

// ---------------------------------------------------------------------------
// Imaginary-time evolution from truncated Taylor series

inline constexpr double kIteDenominatorTolerance = 1e-12;

/// c_n = (-tau/2)^n / n!, n = 0 .. order.
inline std::vector<double> ite_taylor_coefficients(double tau, int order) {
  std::vector<double> c{1.0};
  for (int n = 1; n <= order; ++n)
    c.push_back(c.back() * (-tau / 2.0) / n);
  return c;
}

namespace detail {

struct IteSums {
  double numerator = 0.0, denominator = 0.0, denominator_magnitude = 0.0;
};

inline IteSums ite_sums(const MomentTable &m, double tau, int order) {
  const auto c = ite_taylor_coefficients(tau, order);
  IteSums s;
  for (int a = 0; a <= order; ++a)
    for (int b = 0; b <= order; ++b) {
      const double w = c[static_cast<std::size_t>(a)] * c[static_cast<std::size_t>(b)];
      s.numerator += w * m[a + b + 1];
      s.denominator += w * m[a + b];
      s.denominator_magnitude += std::abs(w * m[a + b]);
    }
  return s;
}

inline void check_ite_args(const MomentTable &m, double tau, int order,
                           const char *who) {
  if (order < 0)
    throw ContractViolation(std::string(who) + ": order must be >= 0");
  if (!(tau >= 0.0))
    throw ContractViolation(std::string(who) + ": tau must be >= 0");
  m.require_order(2 * order + 1, who);
}

} // namespace detail

/// E(tau) = <phi_tau|H|phi_tau> / <phi_tau|phi_tau> with
/// |phi_tau> = sum_{n <= order} c_n H^n |phi>.
inline EstimatorResult ite_energy(const MomentTable &m, double tau, int order,
                                  double denom_tol = kIteDenominatorTolerance) {
  detail::check_ite_args(m, tau, order, "ite_energy");
  const auto s = detail::ite_sums(m, tau, order);
  if (!(s.denominator > denom_tol))
    throw IteNormalizationError("ite_energy: truncated norm " +
                                csv::number(s.denominator) + " at tau " +
                                csv::number(tau) + " is below tolerance; "
                                "raise the order or lower tau");
  EstimatorResult out;
  out.method = "ite";
  out.params["order"] = order;
  out.params["tau"] = tau;
  out.tau = tau;
  out.energy = s.numerator / s.denominator;
  out.diagnostics["denominator"] = s.denominator;
  out.diagnostics["cancellation"] = s.denominator_magnitude / s.denominator;
  return out;
}

/// [sum c_a c_b G(a,b)] / [sum c_a c_b m_{a+b}], G(a,b) = <H^a O H^b>.
inline double ite_expectation(const GeneralizedMomentTable &g,
                              const MomentTable &m, double tau, int order,
                              double denom_tol = kIteDenominatorTolerance) {
  if (order < 0 || !(tau >= 0.0))
    throw ContractViolation("ite_expectation: need order >= 0 and tau >= 0");
  m.require_order(2 * order, "ite_expectation");
  if (g.rows() <= order || g.cols() <= order)
    throw InsufficientOrderError("ite_expectation", order,
                                 static_cast<int>(std::min(g.rows(), g.cols())) - 1);
  const auto c = ite_taylor_coefficients(tau, order);
  double num = 0.0, den = 0.0;
  for (int a = 0; a <= order; ++a)
    for (int b = 0; b <= order; ++b) {
      const double w = c[static_cast<std::size_t>(a)] * c[static_cast<std::size_t>(b)];
      num += w * g(a, b);
      den += w * m[a + b];
    }
  if (!(den > denom_tol))
    throw IteNormalizationError("ite_expectation: truncated norm " +
                                csv::number(den) + " is below tolerance");
  return num / den;
}

/// A denominator is healthy when it clears the absolute tolerance and is not
/// the residue of catastrophic cancellation (|sum| >= 1e-10 sum|terms|).
inline bool ite_denominator_healthy(const MomentTable &m, double tau, int order,
                                    double denom_tol = kIteDenominatorTolerance) {
  const auto s = detail::ite_sums(m, tau, order);
  return s.denominator > denom_tol &&
         s.denominator >= 1e-10 * s.denominator_magnitude;
}

/// Golden-section search for the tau minimizing ite_energy on [0, tau*],
/// tau* being tau_max clipped to the last healthy denominator on a uniform
/// probe grid.
inline EstimatorResult optimize_tau(const MomentTable &m, int order,
                                    double tau_max, double tol = 1e-4) {
  if (!(tau_max > 0.0))
    throw ContractViolation("optimize_tau: tau_max must be positive");
  detail::check_ite_args(m, 0.0, order, "optimize_tau");
  constexpr int probes = 1000;
  double limit = 0.0;
  for (int i = 1; i <= probes; ++i) {
    const double t = tau_max * i / probes;
    if (!ite_denominator_healthy(m, t, order))
      break;
    limit = t;
  }
  auto energy = [&](double t) { return ite_energy(m, t, order).energy; };

  int evaluations = 0;
  double lo = 0.0, hi = limit;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = energy(x1), f2 = energy(x2);
  evaluations += 2;
  while (hi - lo > tol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = energy(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = energy(x2);
    }
    ++evaluations;
  }
  double best_tau = f1 <= f2 ? x1 : x2;
  double best = std::min(f1, f2);
  for (double t : {0.0, limit}) {
    const double e = energy(t);
    ++evaluations;
    if (e < best) {
      best = e;
      best_tau = t;
    }
  }
  EstimatorResult out = ite_energy(m, best_tau, order);
  out.method = "ite-auto";
  out.params["tau_max"] = tau_max;
  out.diagnostics["tau_limit"] = limit;
  out.diagnostics["evaluations"] = evaluations;
  if (limit < tau_max)
    out.warnings.push_back("optimize_tau: search clipped to tau <= " +
                           csv::number(limit) + " by denominator health");
  return out;
}

// ---------------------------------------------------------------------------
// Real-time evolution of Krylov coefficients

struct RteResult {
  std::vector<double> times;
  std::vector<Eigen::VectorXcd> coefficients; ///< Krylov-basis coefficients c(t)
  std::vector<Complex> autocorrelation;       ///< <psi(0)|psi(t)>
  std::vector<double> peak_frequencies;       ///< DTFT maxima of the autocorrelation
  std::vector<double> krylov_spectrum;
};

namespace detail {

/// Local maxima of |sum_t w_t s_t e^{i omega t}| above 10% of the largest,
/// Hann-windowed, on a grid 8x finer than 2 pi / T.
inline std::vector<double> dtft_peaks(const std::vector<Complex> &signal,
                                      double dt, double omega_bound) {
  const std::size_t n = signal.size();
  if (n < 4)
    return {};
  const double T = dt * static_cast<double>(n);
  const double step = 2.0 * std::numbers::pi / (8.0 * T);
  const auto points = static_cast<std::size_t>(2.0 * omega_bound / step) + 3;
  std::vector<double> omega(points), mag(points);
  std::vector<double> window(n);
  for (std::size_t k = 0; k < n; ++k)
    window[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                     static_cast<double>(n - 1));
  for (std::size_t p = 0; p < points; ++p) {
    omega[p] = -omega_bound - step + step * static_cast<double>(p);
    const Complex rot = std::polar(1.0, omega[p] * dt);
    Complex phase = 1.0, acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += window[k] * signal[k] * phase;
      phase *= rot;
    }
    mag[p] = std::abs(acc);
  }
  const double top = *std::max_element(mag.begin(), mag.end());
  std::vector<double> peaks;
  for (std::size_t p = 1; p + 1 < points; ++p)
    if (mag[p] >= mag[p - 1] && mag[p] > mag[p + 1] && mag[p] >= 0.1 * top) {
      // Parabolic refinement of the grid maximum.
      const double a = mag[p - 1], b = mag[p], c = mag[p + 1];
      const double den = a - 2.0 * b + c;
      const double shift = den != 0.0 ? 0.5 * (a - c) / den : 0.0;
      peaks.push_back(omega[p] + shift * step);
    }
  return peaks;
}

} // namespace detail

/// Integrates i dc/dt = L^{-1} R c with classic RK4 in the whitened frame,
/// c = U c', i dc'/dt = (U^T R U) c'.
inline RteResult rte_propagate(const MomentTable &m, int r,
                               const Eigen::VectorXcd &c0, double dt, int steps,
                               double drop_tol = kDefaultDropTolerance) {
  if (c0.size() != r + 1)
    throw DimensionError("rte_propagate: c0 must have r + 1 entries");
  if (!(dt > 0.0) || steps < 1)
    throw ContractViolation("rte_propagate: need dt > 0 and steps >= 1");
  const KrylovMatrices km = krylov_matrices(m, r);
  const CanonicalFrame f = canonical_frame(km, drop_tol);
  const Eigen::MatrixXcd U = f.transform.cast<Complex>();
  const Eigen::MatrixXcd A = Complex(0.0, -1.0) * f.hamiltonian.cast<Complex>();
  const Eigen::VectorXcd start = U.transpose() * km.L.cast<Complex>() * c0;

  RteResult out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.hamiltonian);
  out.krylov_spectrum.assign(es.eigenvalues().data(),
                             es.eigenvalues().data() + es.eigenvalues().size());
  Eigen::VectorXcd y = start;
  for (int s = 0; s <= steps; ++s) {
    out.times.push_back(dt * s);
    out.coefficients.push_back(U * y);
    out.autocorrelation.push_back(start.dot(y));
    const Eigen::VectorXcd k1 = A * y;
    const Eigen::VectorXcd k2 = A * (y + 0.5 * dt * k1);
    const Eigen::VectorXcd k3 = A * (y + 0.5 * dt * k2);
    const Eigen::VectorXcd k4 = A * (y + dt * k3);
    y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  out.peak_frequencies =
      detail::dtft_peaks(out.autocorrelation, dt, f.hamiltonian.norm() + 1.0);
  return out;
}

} // namespace hmoments
