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

// Acceptance report: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "hmoments.hpp"
#include "hmoments/app/commands.hpp"
#include "oracles.hpp"

using namespace hmoments;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) { return csv::number(v); }

PauliSum heisenberg(double j, double u, double b) {
  return build_heisenberg({j, u, b, 4, Topology::OpenChain});
}

StateVector ansatz_state() { return apply_circuit(StateVector(4), build_ansatz(-2.0, 1.0)); }

app::ScanResult ite_scan(int order, bool sampled = false, bool calibrate = false) {
  app::Config c;
  c.estimator.order = order;
  c.workers = 1;
  if (sampled) {
    c.moments.source = app::MomentSource::Sampled;
    c.moments.noise = std::pair{0.02, 0.02};
    c.moments.shots = 8192;
    c.moments.calibrate = calibrate;
  }
  return app::scan(c);
}

Verdict closure_count() {
  const auto t0 = Clock::now();
  const auto closure = basis_closure(heisenberg(0.3, 0.7, 1.0), 40);
  const double dt = seconds_since(t0);
  return {closure.strings.size() == 72 && closure.closed && dt < 1.0,
          std::to_string(closure.strings.size()) + " strings after " +
              std::to_string(closure.powers_used) + " powers, " + fmt(dt) + " s"};
}

Verdict qwc_grouping() {
  const auto t0 = Clock::now();
  const auto closure = basis_closure(heisenberg(0.3, 0.7, 1.0), 40);
  const auto plan = greedy_qwc_grouping(closure.strings, OrderingPolicy::WeightDescending);
  std::size_t bad_pairs = 0;
  for (const auto &g : plan.groups)
    for (const auto &a : g)
      for (const auto &b : g)
        if (!qubitwise_commutes(a, b))
          ++bad_pairs;
  const double dt = seconds_since(t0);
  const bool partition = plan.string_count() == closure.strings.size();
  return {plan.groups.size() <= 27 && bad_pairs == 0 && partition && dt < 1.0,
          std::to_string(plan.groups.size()) + " groups (reference figure 25), " +
              std::to_string(bad_pairs) + " non-QWC pairs, " + fmt(dt) + " s"};
}

Verdict ite_grid() {
  const auto t0 = Clock::now();
  const auto r = ite_scan(15);
  const double dt = seconds_since(t0);
  return {r.mse_energy <= 2.5e-3 && r.mse_magnetization <= 1e-2 && r.scored == 81 && dt < 30.0,
          "MSE energy " + fmt(r.mse_energy) + " (bound 2.5e-3), magnetization " +
              fmt(r.mse_magnetization) + " (bound 1e-2), cells " + std::to_string(r.scored) +
              "/81, " + fmt(dt) + " s"};
}

Verdict taylor_orders() {
  std::vector<double> mse;
  std::string detail;
  for (int order : {9, 11, 15, 17}) {
    mse.push_back(ite_scan(order).mse_energy);
    detail += "order " + std::to_string(order) + " MSE " + fmt(mse.back()) + "; ";
  }
  bool monotone = true;
  for (std::size_t i = 1; i < mse.size(); ++i)
    monotone = monotone && mse[i] <= mse[i - 1];
  const bool order9_fails = mse[0] > 2.5e-3, order15_passes = mse[2] <= 2.5e-3;
  detail += std::string("non-increasing ") + (monotone ? "yes" : "no") + ", order 9 fails bound " +
            (order9_fails ? "yes" : "no") + ", order 15 meets bound " + (order15_passes ? "yes" : "no");
  return {monotone && order9_fails && order15_passes, detail};
}

Verdict noisy_pipeline() {
  const auto on = ite_scan(15, true, true);
  const auto off = ite_scan(15, true, false);
  return {on.mse_energy <= 1e-2 && on.mse_energy < off.mse_energy,
          "calibrated MSE " + fmt(on.mse_energy) + " (bound 1e-2), uncalibrated MSE " +
              fmt(off.mse_energy) + ", scored " + std::to_string(on.scored) + "/81"};
}

Verdict variational_suite() {
  const PauliSum h = heisenberg(1, 1, 1);
  const double e0 = exact_spectrum(h).eigenvalues(0);
  std::mt19937_64 rng(6);
  int violations = 0;
  for (int t = 0; t < 50; ++t) {
    const MomentTable m = moments_exact(StateVector(4, oracle::random_product_state(rng, 4)), h, 9);
    double prev = std::numeric_limits<double>::infinity();
    for (int r = 0; r <= 4; ++r) {
      const double e = krylov_generalized_eig(m, r).energy;
      violations += (e < e0 - 1e-9) + (e > prev);
      prev = e;
    }
    prev = std::numeric_limits<double>::infinity();
    for (int K = 1; K <= 4; ++K) {
      try {
        const double e = pds_energy(m, K).energy;
        violations += (e < e0 - 1e-9) + (e > prev);
        prev = e;
      } catch (const PdsDegeneracyError &) {
        ++violations;
      }
    }
  }
  return {violations == 0, "50 product states, " + std::to_string(violations) + " violations, E0 " + fmt(e0)};
}

Verdict cross_method() {
  const PauliSum model = heisenberg(1, 1, 1);
  const auto spec = exact_spectrum(model);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  int cmx_bad = 0, lanczos_bad = 0, route_bad = 0, pds_bad = 0, cmx_singular = 0;
  double worst_cmx = 0, worst_lanczos = 0, worst_route = 0, worst_cfd = 0, worst_pds = 0;
  for (int seed = 0; seed < 100; ++seed) {
    const StateVector s(4, oracle::random_state(rng, 4));
    const MomentTable m = moments_exact(s, model, 9);
    const auto c = connected_moments(m);
    for (int n = 2; n <= 4; ++n) {
      try {
        const auto r = cmx_energy(c, n);
        const double d = r.diagnostics.at("form_disagreement");
        worst_cmx = std::max(worst_cmx, d / std::max(1.0, std::abs(r.energy)));
        cmx_bad += d > 1e-8 * std::max(1.0, std::abs(r.energy));
      } catch (const CmxSingularityError &) {
        ++cmx_singular;
      }
    }
    for (int depth = 1; depth <= 4; ++depth) {
      const Eigen::VectorXd lz = lanczos_coefficients(m, depth).eigenvalues();
      const auto kr = krylov_generalized_eig(m, depth - 1).spectrum;
      if (static_cast<std::size_t>(lz.size()) != kr.size()) {
        ++lanczos_bad;
        continue;
      }
      for (std::size_t i = 0; i < kr.size(); ++i) {
        const double d = std::abs(lz(static_cast<Eigen::Index>(i)) - kr[i]);
        worst_lanczos = std::max(worst_lanczos, d);
        lanczos_bad += d > 1e-9;
      }
    }
    // Three routes on a random Hamiltonian.
    PauliSum h(4);
    for (int k = 0; k < 10; ++k)
      h.add(PauliString::from_literal(oracle::random_literal(rng, 4)), g(rng));
    const MomentTable ex = moments_exact(s, h, 6);
    const MomentTable pm = moments_from_expectations(h, 6, exact_expectations(s, basis_closure(h, 6).strings));
    const MomentTable cfd = moments_cfd(s, h, 6, 1e-3, true);
    for (int n = 0; n <= 6; ++n) {
      const double scale = std::max(1.0, std::abs(ex[n]));
      const double d1 = std::abs(pm[n] - ex[n]) / scale, d2 = std::abs(cfd[n] - ex[n]) / scale;
      worst_route = std::max(worst_route, d1);
      worst_cfd = std::max(worst_cfd, d2);
      route_bad += (d1 > 1e-8) + (d2 > 1e-4);
    }
    // Two-point support.
    std::uniform_int_distribution<int> pick(0, 15);
    int a = pick(rng), b = pick(rng);
    while (std::abs(spec.eigenvalues(a) - spec.eigenvalues(b)) < 1e-3)
      b = pick(rng);
    const Eigen::VectorXcd v = (oracle::cd(g(rng), g(rng)) * spec.eigenvectors.col(a) +
                                oracle::cd(g(rng), g(rng)) * spec.eigenvectors.col(b))
                                   .normalized();
    const auto roots = pds_energy(moments_exact(StateVector(4, v), model, 3), 2).spectrum;
    if (roots.size() != 2) {
      ++pds_bad;
    } else {
      const double lo = std::min(spec.eigenvalues(a), spec.eigenvalues(b));
      const double hi = std::max(spec.eigenvalues(a), spec.eigenvalues(b));
      const double d = std::max(std::abs(roots[0] - lo), std::abs(roots[1] - hi));
      worst_pds = std::max(worst_pds, d);
      pds_bad += d > 1e-7;
    }
  }
  const int total = cmx_bad + lanczos_bad + route_bad + pds_bad;
  return {total == 0,
          "100 seeds: CMX forms worst " + fmt(worst_cmx) + " (" + std::to_string(cmx_singular) +
              " singular skipped), Lanczos/Krylov worst " + fmt(worst_lanczos) +
              ", expectation route worst " + fmt(worst_route) + ", CFD worst " + fmt(worst_cfd) +
              ", PDS(2) two-point worst " + fmt(worst_pds) + ", violations " + std::to_string(total)};
}

Verdict ite_calculus() {
  const auto sp = exact_spectrum(heisenberg(0.3, 0.7, 1.0));
  const Eigen::VectorXd w = (sp.eigenvectors.adjoint() * ansatz_state().amplitudes()).cwiseAbs2();
  const double e0 = sp.eigenvalues(0);
  auto moments_at = [&](double tau) {
    double z = 0, e1 = 0, e2 = 0;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      const double x = w(k) * std::exp(-tau * (sp.eigenvalues(k) - e0));
      z += x;
      e1 += x * sp.eigenvalues(k);
      e2 += x * sp.eigenvalues(k) * sp.eigenvalues(k);
    }
    return std::pair{e1 / z, e2 / z - (e1 / z) * (e1 / z)};
  };
  int rises = 0;
  double worst = 0, prev = std::numeric_limits<double>::infinity();
  const double h = 1e-4;
  for (int i = 0; i <= 100; ++i) {
    const double tau = 0.05 * i;
    const auto [e, var] = moments_at(tau);
    rises += e > prev;
    prev = e;
    const double de = (moments_at(tau + h).first - moments_at(std::max(0.0, tau - h)).first) /
                      (tau + h - std::max(0.0, tau - h));
    if (tau > 0)
      worst = std::max(worst, std::abs(de + var));
  }
  return {rises == 0 && worst <= 1e-6,
          std::to_string(rises) + " increases on [0, 5], worst |dE/dtau + variance| " + fmt(worst)};
}

Verdict cfd_order() {
  const PauliSum h = heisenberg(1, 1, 1);
  const StateVector s = ansatz_state();
  const MomentTable ex = moments_exact(s, h, 3);
  bool ok = true;
  std::string detail;
  for (int n = 1; n <= 3; ++n) {
    const double ratio = std::abs(moments_via_cfd(s, h, n, 1e-2) - ex[n]) /
                         std::abs(moments_via_cfd(s, h, n, 5e-3) - ex[n]);
    ok = ok && ratio >= 3.5 && ratio <= 4.5;
    detail += "n=" + std::to_string(n) + " ratio " + fmt(ratio) + (n < 3 ? "; " : "");
  }
  return {ok, detail};
}

Verdict chebyshev() {
  double worst = 0;
  for (int n = 0; n <= 10; ++n) {
    const auto c = chebyshev_coefficients(n);
    for (int i = 0; i < 10000; ++i) {
      const double x = -1.0 + 2.0 * i / 9999.0;
      double sum = 0;
      for (int k = 0; k <= n; ++k)
        sum += c[static_cast<std::size_t>(k)] * oracle::chebyshev_t(k, x);
      worst = std::max(worst, std::abs(sum - std::pow(x, n)));
    }
  }
  return {worst < 1e-12, "worst error " + fmt(worst) + " over 10^4 points, n <= 10"};
}

Verdict hadamard() {
  std::mt19937_64 rng(11);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const StateVector s(4, oracle::random_state(rng, 4));
    const auto p = PauliString::from_literal(oracle::random_literal(rng, 4));
    worst = std::max(worst, std::abs(hadamard_test(s, p, 0, 0) - expectation(s, p)));
  }
  const StateVector s = ansatz_state();
  const auto p = PauliString::from_literal("ZZII");
  const double exact = expectation(s, p);
  auto rms = [&](std::uint64_t shots) {
    double acc = 0;
    for (std::uint64_t r = 0; r < 400; ++r) {
      const double e = hadamard_test(s, p, shots, derive_seed(shots, r)) - exact;
      acc += e * e;
    }
    return std::sqrt(acc / 400);
  };
  const double ratio = rms(1000) / rms(100000);
  return {worst <= 1e-12 && ratio > 7.0 && ratio < 14.0,
          "analytic worst " + fmt(worst) + ", RMS ratio 10^3 vs 10^5 shots " + fmt(ratio) + " (ideal 10)"};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"Pauli closure has 72 strings", closure_count},
      {"QWC grouping within 27 groups", qwc_grouping},
      {"ITE grid reproduction (order 15, tau 2.5)", ite_grid},
      {"Taylor-order ordering", taylor_orders},
      {"Noisy calibrated pipeline", noisy_pipeline},
      {"Variational bounds", variational_suite},
      {"Cross-method identities", cross_method},
      {"ITE calculus", ite_calculus},
      {"CFD convergence order", cfd_order},
      {"Chebyshev reconstruction", chebyshev},
      {"Hadamard test", hadamard},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception &e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": "
              << v.detail << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
