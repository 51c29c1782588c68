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
 * The five subcommands behind the `hmoments` executable. Each one writes its
 * product to a stream and reports failures through exceptions; run_command()
 * maps those onto process exit codes.
 */

#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hmoments.hpp"
#include "hmoments/app/config.hpp"

namespace hmoments::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitCoverage = 4,
};

struct PointModel {
  double u = 0.0, j = 0.0;
  PauliSum hamiltonian{1};
  PauliSum magnetization{1};
  StateVector state{1};
};

inline PointModel make_point(const Config &c, double u, double j) {
  HeisenbergParams p;
  p.J = j;
  p.U = u;
  p.B = c.b;
  p.n_sites = c.sites;
  p.topology = c.topology;
  return {u, j, build_heisenberg(p), build_magnetization(c.sites),
          apply_circuit(StateVector(c.sites), build_ansatz(c.theta0, c.theta1))};
}

/// The single (U, J) point used by the non-scan commands: the first value of
/// each grid axis.
inline PointModel first_point(const Config &c) {
  return make_point(c, c.u.values().front(), c.j.values().front());
}

/// Calibration matrix shared by every cell of a run; seeded independently of
/// the cells.
inline std::optional<CalibrationMatrix> run_calibration(const Config &c) {
  const auto noise = noise_model(c);
  if (!c.moments.calibrate || c.moments.source != MomentSource::Sampled)
    return std::nullopt;
  const ReadoutNoiseModel model = noise ? *noise : ReadoutNoiseModel::uniform(c.sites, 0, 0);
  return build_calibration(model, c.sites, c.moments.calibration_shots,
                           derive_seed(c.seed, 0xCA1B0000ULL));
}

struct MeasurementRecord {
  GroupingPlan plan;
  ExpectationMap expectations;
};

/// Samples every QWC group of the closure of H once; group g of cell seed s
/// draws from derive_seed(s, g).
inline MeasurementRecord measure_closure(const Config &c, const PointModel &pt,
                                         int max_order, std::uint64_t cell_seed,
                                         const std::optional<CalibrationMatrix> &cal) {
  const auto closure = basis_closure(pt.hamiltonian, std::max(1, max_order));
  MeasurementRecord rec{greedy_qwc_grouping(closure.strings), {}};
  const auto noise = noise_model(c);
  for (std::size_t g = 0; g < rec.plan.groups.size(); ++g) {
    CountsVector counts = sample_counts(pt.state, rec.plan.rotations[g], c.moments.shots,
                                        noise, derive_seed(cell_seed, g));
    if (cal)
      counts = calibrate_counts(*cal, counts);
    for (const auto &[s, v] : expectations_from_counts(counts, rec.plan.groups[g]))
      rec.expectations[s] = std::clamp(v, -1.0, 1.0);
  }
  return rec;
}

struct PointMoments {
  MomentTable moments;
  std::optional<GeneralizedMomentTable> magnetization; ///< G(a,b) for ITE
  std::size_t strings = 0, groups = 0;
};

inline PointMoments point_moments(const Config &c, const PointModel &pt,
                                  std::uint64_t cell_seed,
                                  const std::optional<CalibrationMatrix> &cal,
                                  bool with_magnetization) {
  const int n = effective_max_order(c);
  const int g_order = c.estimator.order;
  PointMoments out;
  if (c.moments.source == MomentSource::Exact) {
    out.moments = moments_exact(pt.state, pt.hamiltonian, n);
    out.strings = basis_closure(pt.hamiltonian, std::max(1, n)).strings.size();
    if (with_magnetization)
      out.magnetization = generalized_moments_exact(pt.state, pt.hamiltonian,
                                                    pt.magnetization, g_order);
    return out;
  }
  const MeasurementRecord rec = measure_closure(c, pt, n, cell_seed, cal);
  out.strings = rec.expectations.size();
  out.groups = rec.plan.groups.size();
  out.moments = moments_from_expectations(pt.hamiltonian, n, rec.expectations);
  if (with_magnetization)
    out.magnetization = generalized_moments_from_expectations(
        pt.hamiltonian, pt.magnetization, g_order, rec.expectations);
  return out;
}

inline EstimatorResult run_estimator(const EstimatorSettings &e,
                                     const MomentTable &m) {
  m.require_order(required_moment_order(e), e.method);
  if (e.method == "ite")
    return e.tau ? ite_energy(m, *e.tau, e.order)
                 : optimize_tau(m, e.order, e.tau_max);
  if (e.method == "krylov")
    return krylov_generalized_eig(m, e.order);
  if (e.method == "lanczos") {
    const auto lz = lanczos_coefficients(m, e.order);
    EstimatorResult r;
    r.method = "lanczos";
    r.params["depth"] = e.order;
    r.alpha = lz.alpha;
    r.beta = lz.beta;
    const Eigen::VectorXd ev = lz.eigenvalues();
    r.spectrum.assign(ev.data(), ev.data() + ev.size());
    r.energy = ev(0);
    r.diagnostics["terminated"] = lz.terminated ? 1.0 : 0.0;
    return r;
  }
  if (e.method == "pds")
    return pds_energy(m, e.order);
  if (e.method == "cmx")
    return cmx_energy(connected_moments(m), e.order);
  if (e.method == "infimum")
    return infimum_estimate(connected_moments(m));
  throw ConfigError("estimator.method: unknown method '" + e.method + "'");
}

/// Exact ground energy and ground-state magnetization. On a degenerate
/// ground level the magnetization is taken in the normalized projection of
/// the trial state onto that level, the state imaginary-time evolution
/// converges to.
struct Oracle {
  double energy = 0.0, magnetization = 0.0;
};

inline Oracle oracle(const PointModel &pt) {
  const SpectrumResult sp = exact_spectrum(pt.hamiltonian);
  const Eigen::MatrixXcd M = to_dense(pt.magnetization);
  const double e0 = sp.eigenvalues(0);
  Eigen::Index deg = 1;
  while (deg < sp.eigenvalues.size() && sp.eigenvalues(deg) - e0 < 1e-8)
    ++deg;
  const Eigen::MatrixXcd V = sp.eigenvectors.leftCols(deg);
  Eigen::VectorXcd proj = V * (V.adjoint() * pt.state.amplitudes());
  double mag = 0.0;
  if (proj.squaredNorm() > 1e-10) {
    mag = proj.dot(M * proj).real() / proj.squaredNorm();
  } else {
    for (Eigen::Index k = 0; k < deg; ++k)
      mag += V.col(k).dot(M * V.col(k)).real() / static_cast<double>(deg);
  }
  return {e0, mag};
}

// ---------------------------------------------------------------------------
// Output helpers

inline std::string noise_text(const Config &c) {
  if (!c.moments.noise)
    return "none";
  return csv::number(c.moments.noise->first) + "/" + csv::number(c.moments.noise->second);
}

inline std::string axis_text(const GridAxis &a) {
  return csv::number(a.min) + ".." + csv::number(a.max) + " (" +
         std::to_string(a.steps) + " steps)";
}

inline std::string estimator_text(const EstimatorSettings &e) {
  return "method=" + e.method + " order=" + std::to_string(e.order) +
         (e.method == "ite" ? " tau=" + (e.tau ? csv::number(*e.tau) : std::string("auto"))
                            : std::string());
}

inline std::string status_of(const std::exception_ptr &ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const IteNormalizationError &) {
    return "error-ite-normalization";
  } catch (const CmxSingularityError &) {
    return "error-cmx-singular";
  } catch (const PdsDegeneracyError &) {
    return "error-pds-degenerate";
  } catch (const DegenerateSubspaceError &) {
    return "error-degenerate-subspace";
  } catch (const DomainError &) {
    return "error-domain";
  } catch (const CoverageError &) {
    return "error-coverage";
  } catch (const CalibrationError &) {
    return "error-calibration";
  } catch (const InsufficientOrderError &) {
    return "error-order";
  } catch (const std::exception &) {
    return "error";
  }
}

// ---------------------------------------------------------------------------
// Commands

inline void cmd_moments(const Config &c, std::ostream &os) {
  const PointModel pt = first_point(c);
  const auto cal = run_calibration(c);
  const PointMoments pm = point_moments(c, pt, derive_seed(c.seed, 0), cal, false);
  os << "# point U=" << csv::number(pt.u) << " J=" << csv::number(pt.j)
     << " B=" << csv::number(c.b) << " topology=" << to_string(c.topology) << '\n';
  if (c.moments.source == MomentSource::Sampled)
    os << "# source=sampled seed=" << c.seed << " shots=" << c.moments.shots
       << " groups=" << pm.groups << " strings=" << pm.strings
       << " noise=" << noise_text(c) << " calibrate=" << (c.moments.calibrate ? 1 : 0)
       << '\n';
  else
    os << "# source=exact strings=" << pm.strings << '\n';
  for (const auto &w : pm.moments.warnings)
    os << "# warning: " << w << '\n';
  write_csv(os, pm.moments);
}

/// Estimates at the first grid point, or from a moment CSV when given.
inline EstimatorResult estimate(const Config &c,
                                const std::optional<MomentTable> &table) {
  if (table)
    return run_estimator(c.estimator, *table);
  const int need = required_moment_order(c.estimator);
  if (effective_max_order(c) < need)
    throw InsufficientOrderError(c.estimator.method, need, effective_max_order(c));
  const PointModel pt = first_point(c);
  const PointMoments pm =
      point_moments(c, pt, derive_seed(c.seed, 0), run_calibration(c), false);
  return run_estimator(c.estimator, pm.moments);
}

inline void cmd_estimate(const Config &c, const std::optional<MomentTable> &table,
                         std::ostream &os) {
  const EstimatorResult r = estimate(c, table);
  for (const auto &w : r.warnings)
    os << "# warning: " << w << '\n';
  write_result_header(os);
  write_result_row(os, r);
}

struct ScanCell {
  double u = 0, j = 0;
  double energy_est = std::nan(""), energy_exact = std::nan("");
  double mag_est = std::nan(""), mag_exact = std::nan("");
  std::string status = "ok";
};

struct ScanResult {
  std::vector<ScanCell> cells;
  double mse_energy = std::nan(""), mse_magnetization = std::nan("");
  std::size_t scored = 0;
};

/// Cells are independent: cell k samples from derive_seed(seed, k), so the
/// result does not depend on the worker count.
inline ScanResult scan(const Config &c) {
  if (required_moment_order(c.estimator) > effective_max_order(c))
    throw InsufficientOrderError(c.estimator.method,
                                 required_moment_order(c.estimator),
                                 effective_max_order(c));
  const auto us = c.u.values(), js = c.j.values();
  ScanResult res;
  res.cells.resize(us.size() * js.size());
  const auto cal = run_calibration(c);
  const bool with_mag = c.estimator.method == "ite";

  auto work = [&](std::size_t k) {
    ScanCell &cell = res.cells[k];
    cell.u = us[k / js.size()];
    cell.j = js[k % js.size()];
    try {
      const PointModel pt = make_point(c, cell.u, cell.j);
      const Oracle o = oracle(pt);
      cell.energy_exact = o.energy;
      cell.mag_exact = o.magnetization;
      const PointMoments pm = point_moments(c, pt, derive_seed(c.seed, k), cal, with_mag);
      const EstimatorResult r = run_estimator(c.estimator, pm.moments);
      cell.energy_est = r.energy;
      if (with_mag)
        cell.mag_est = ite_expectation(*pm.magnetization, pm.moments,
                                       r.tau.value_or(0.0), c.estimator.order);
      if (!r.warnings.empty())
        cell.status = "warn";
    } catch (...) {
      cell.status = status_of(std::current_exception());
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < res.cells.size(); k = next++)
      work(k);
  };
  const int n_workers = std::max(1, std::min<int>(c.workers, static_cast<int>(res.cells.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w)
    pool.emplace_back(worker);
  worker();
  for (auto &t : pool)
    t.join();

  double se = 0.0, sm = 0.0;
  std::size_t nm = 0;
  for (const auto &cell : res.cells) {
    if (!std::isfinite(cell.energy_est))
      continue;
    ++res.scored;
    se += (cell.energy_est - cell.energy_exact) * (cell.energy_est - cell.energy_exact);
    if (std::isfinite(cell.mag_est)) {
      ++nm;
      sm += (cell.mag_est - cell.mag_exact) * (cell.mag_est - cell.mag_exact);
    }
  }
  if (res.scored)
    res.mse_energy = se / static_cast<double>(res.scored);
  if (nm)
    res.mse_magnetization = sm / static_cast<double>(nm);
  return res;
}

inline void cmd_scan(const Config &c, std::ostream &os) {
  const ScanResult r = scan(c);
  os << "# grid U=" << axis_text(c.u) << " J=" << axis_text(c.j)
     << " B=" << csv::number(c.b) << " topology=" << to_string(c.topology)
     << " ansatz=(" << csv::number(c.theta0) << "," << csv::number(c.theta1) << ")\n";
  os << "# source=" << (c.moments.source == MomentSource::Exact ? "exact" : "sampled");
  if (c.moments.source == MomentSource::Sampled)
    os << " shots=" << c.moments.shots << " noise=" << noise_text(c)
       << " calibrate=" << (c.moments.calibrate ? 1 : 0);
  os << ' ' << estimator_text(c.estimator) << " seed=" << c.seed << '\n';
  os << "U,J,energy_est,energy_exact,mag_est,mag_exact,status\n";
  for (const auto &cell : r.cells)
    os << csv::number(cell.u) << ',' << csv::number(cell.j) << ','
       << csv::number(cell.energy_est) << ',' << csv::number(cell.energy_exact) << ','
       << csv::number(cell.mag_est) << ',' << csv::number(cell.mag_exact) << ','
       << cell.status << '\n';
  os << "# MSE energy=" << csv::number(r.mse_energy)
     << " magnetization=" << csv::number(r.mse_magnetization) << " cells=" << r.scored
     << "/" << r.cells.size() << '\n';
}

struct CalibrationDemoRow {
  int repeat = 0;
  std::size_t group = 0;
  PauliString string = PauliString::identity(1);
  double exact = 0, raw = 0, calibrated = 0;
};

inline std::vector<CalibrationDemoRow> calibration_demo(const Config &c, int repeats) {
  if (repeats < 1)
    throw ConfigError("--repeats must be >= 1");
  const PointModel pt = first_point(c);
  const auto noise = noise_model(c);
  const ReadoutNoiseModel model = noise ? *noise : ReadoutNoiseModel::uniform(c.sites, 0, 0);
  const CalibrationMatrix cal = build_calibration(
      model, c.sites, c.moments.calibration_shots, derive_seed(c.seed, 0xCA1B0000ULL));
  const auto closure = basis_closure(pt.hamiltonian, 40);
  const GroupingPlan plan = greedy_qwc_grouping(closure.strings);
  std::vector<CalibrationDemoRow> rows;
  for (int rep = 0; rep < repeats; ++rep) {
    const std::uint64_t rep_seed = derive_seed(c.seed, 1000 + static_cast<std::uint64_t>(rep));
    for (std::size_t g = 0; g < plan.groups.size(); ++g) {
      const CountsVector raw = sample_counts(pt.state, plan.rotations[g], c.moments.shots,
                                             noise, derive_seed(rep_seed, g));
      const auto raw_ex = expectations_from_counts(raw, plan.groups[g]);
      const auto cal_ex = expectations_from_counts(calibrate_counts(cal, raw), plan.groups[g]);
      for (const auto &s : plan.groups[g])
        rows.push_back({rep, g, s, expectation(pt.state, s), raw_ex.at(s), cal_ex.at(s)});
    }
  }
  return rows;
}

inline void cmd_calibrate_demo(const Config &c, int repeats, std::ostream &os) {
  const auto rows = calibration_demo(c, repeats);
  os << "# noise=" << noise_text(c) << " shots=" << c.moments.shots
     << " calibration_shots=" << c.moments.calibration_shots << " repeats=" << repeats
     << " seed=" << c.seed << '\n';
  os << "repeat,group,string,exact,raw,calibrated,abs_err_raw,abs_err_calibrated\n";
  double er = 0, ec = 0;
  for (const auto &r : rows) {
    const double dr = std::abs(r.raw - r.exact), dc = std::abs(r.calibrated - r.exact);
    er += dr;
    ec += dc;
    os << r.repeat << ',' << r.group << ',' << r.string.literal() << ','
       << csv::number(r.exact) << ',' << csv::number(r.raw) << ','
       << csv::number(r.calibrated) << ',' << csv::number(dr) << ','
       << csv::number(dc) << '\n';
  }
  const auto n = static_cast<double>(rows.size());
  os << "# mean_abs_err raw=" << csv::number(er / n)
     << " calibrated=" << csv::number(ec / n) << '\n';
}

inline void cmd_group(const Config &c, OrderingPolicy policy, CommutationRule rule,
                      std::ostream &os) {
  const PointModel pt = first_point(c);
  const auto closure = basis_closure(pt.hamiltonian, 40);
  const GroupingPlan plan = greedy_grouping(closure.strings, policy, rule);
  os << "# strings=" << closure.strings.size() << " groups=" << plan.groups.size()
     << " policy=" << to_string(policy)
     << " rule=" << (rule == CommutationRule::Qubitwise ? "qwc" : "general") << '\n';
  write_plan(os, plan);
}

/// Runs `body`, mapping failures onto exit codes with a one-line message.
inline int run_command(const std::function<void()> &body, std::ostream &err) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CoverageError &e) {
    err << "coverage error: " << e.what() << '\n';
    return kExitCoverage;
  } catch (const InsufficientOrderError &e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const EstimatorError &e) {
    err << "estimator error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DomainError &e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const CalibrationError &e) {
    err << "calibration error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ContractViolation &e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

} // namespace hmoments::app
