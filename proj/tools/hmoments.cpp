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

// hmoments: moment-based ground-state estimation for the four-site
// Heisenberg chain, driven by a JSON config with command-line overrides.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hmoments/app/commands.hpp"

namespace {

using namespace hmoments;
using namespace hmoments::app;

std::vector<std::string> split_list(const std::string &s) { return csv::split(s, ','); }

double to_double(const std::string &s, const std::string &flag) {
  try {
    return csv::parse_number(s);
  } catch (const std::exception &) {
    throw ConfigError(flag + ": '" + s + "' is not a number");
  }
}

GridAxis parse_axis(const std::string &s, const std::string &flag) {
  const auto parts = split_list(s);
  if (parts.size() == 1) {
    const double v = to_double(parts[0], flag);
    return {v, v, 1};
  }
  if (parts.size() != 3)
    throw ConfigError(flag + ": expected A,B,STEPS or a single value");
  const double steps = to_double(parts[2], flag);
  if (steps != std::floor(steps))
    throw ConfigError(flag + ": STEPS must be an integer");
  return {to_double(parts[0], flag), to_double(parts[1], flag), static_cast<int>(steps)};
}

struct Overrides {
  std::string config_path, out, u, j, method, tau, noise, source;
  std::optional<std::uint64_t> seed, shots, calibration_shots;
  std::optional<int> workers, order, max_order;
  std::optional<double> b;
  bool calibrate = false, no_calibrate = false;
};

Config load_config(const Overrides &o) {
  Config c;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in)
      throw ConfigError("cannot open config file '" + o.config_path + "'");
    std::stringstream text;
    text << in.rdbuf();
    c = parse_config(text.str());
  }
  if (!o.out.empty())
    c.out = o.out;
  if (o.seed)
    c.seed = *o.seed;
  if (o.workers)
    c.workers = *o.workers;
  if (!o.u.empty())
    c.u = parse_axis(o.u, "--u");
  if (!o.j.empty())
    c.j = parse_axis(o.j, "--j");
  if (o.b)
    c.b = *o.b;
  if (!o.method.empty())
    c.estimator.method = o.method;
  if (o.order)
    c.estimator.order = *o.order;
  if (!o.tau.empty()) {
    if (o.tau == "auto")
      c.estimator.tau.reset();
    else
      c.estimator.tau = to_double(o.tau, "--tau");
  }
  if (o.shots)
    c.moments.shots = *o.shots;
  if (o.calibration_shots)
    c.moments.calibration_shots = *o.calibration_shots;
  if (o.max_order)
    c.moments.max_order = *o.max_order;
  if (!o.noise.empty()) {
    const auto parts = split_list(o.noise);
    if (parts.size() == 1)
      c.moments.noise = std::pair{to_double(parts[0], "--noise"), to_double(parts[0], "--noise")};
    else if (parts.size() == 2)
      c.moments.noise = std::pair{to_double(parts[0], "--noise"), to_double(parts[1], "--noise")};
    else
      throw ConfigError("--noise: expected p01,p10");
  }
  if (!o.source.empty()) {
    if (o.source == "exact")
      c.moments.source = MomentSource::Exact;
    else if (o.source == "sampled")
      c.moments.source = MomentSource::Sampled;
    else
      throw ConfigError("--source: expected exact or sampled");
  }
  if (o.calibrate)
    c.moments.calibrate = true;
  if (o.no_calibrate)
    c.moments.calibrate = false;
  validate(c);
  return c;
}

/// Writes through `c.out` when set, stdout otherwise.
void emit(const Config &c, const std::function<void(std::ostream &)> &write) {
  if (c.out.empty()) {
    write(std::cout);
    return;
  }
  std::ostringstream buffer;
  write(buffer);
  std::ofstream file(c.out, std::ios::binary);
  if (!file)
    throw ConfigError("cannot write output file '" + c.out + "'");
  file << buffer.str();
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Hamiltonian-moment ground-state estimation for the 4-site Heisenberg chain"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config_path, "JSON config file");
  app.add_option("--out", o.out, "output path (default stdout)");
  app.add_option("--seed", o.seed, "base RNG seed");
  app.add_option("--workers", o.workers, "scan worker threads");
  app.add_option("--u", o.u, "U grid as A,B,STEPS or a single value");
  app.add_option("--j", o.j, "J grid as A,B,STEPS or a single value");
  app.add_option("--b", o.b, "magnetic field B");
  app.add_option("--method", o.method, "ite, krylov, lanczos, pds, cmx or infimum");
  app.add_option("--order", o.order, "estimator order (Taylor order, r, depth, K or n)");
  app.add_option("--tau", o.tau, "ITE imaginary time, or auto");
  app.add_option("--shots", o.shots, "shots per measurement group");
  app.add_option("--noise", o.noise, "readout flip probabilities p01,p10");
  app.add_flag("--calibrate", o.calibrate, "invert the readout calibration matrix");
  app.add_flag("--no-calibrate", o.no_calibrate, "disable calibration");
  app.add_option("--source", o.source, "moment source: exact or sampled");
  app.add_option("--max-order", o.max_order, "highest moment order (0 = what the estimator needs)");
  app.add_option("--calibration-shots", o.calibration_shots,
                 "shots per basis state for the calibration matrix (0 = analytic)");

  auto *moments = app.add_subcommand("moments", "write the moment table as CSV");
  auto *estimate = app.add_subcommand("estimate", "run one estimator at the first grid point");
  std::string moments_in;
  estimate->add_option("--moments", moments_in, "read moments from this CSV instead");
  auto *scan = app.add_subcommand("scan", "sweep the (U, J) grid");
  auto *demo = app.add_subcommand("calibrate-demo", "raw vs calibrated expectations");
  int repeats = 1;
  demo->add_option("--repeats", repeats, "independent sampling repeats");
  auto *group = app.add_subcommand("group", "print the measurement grouping plan");
  std::string policy = "weight-descending", rule = "qwc";
  group->add_option("--policy", policy, "weight-descending, lexicographic or insertion");
  group->add_option("--rule", rule, "qwc or general");
  auto *dump = app.add_subcommand("config", "print the effective config as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  return run_command(
      [&] {
        const Config c = load_config(o);
        if (moments->parsed()) {
          emit(c, [&](std::ostream &os) { cmd_moments(c, os); });
        } else if (estimate->parsed()) {
          std::optional<MomentTable> table;
          if (!moments_in.empty()) {
            std::ifstream in(moments_in);
            if (!in)
              throw ConfigError("cannot open moment file '" + moments_in + "'");
            try {
              table = read_csv(in);
            } catch (const std::exception &e) {
              throw ConfigError(moments_in + ": " + e.what());
            }
          }
          emit(c, [&](std::ostream &os) { cmd_estimate(c, table, os); });
        } else if (scan->parsed()) {
          emit(c, [&](std::ostream &os) { cmd_scan(c, os); });
        } else if (demo->parsed()) {
          emit(c, [&](std::ostream &os) { cmd_calibrate_demo(c, repeats, os); });
        } else if (group->parsed()) {
          OrderingPolicy p;
          try {
            p = ordering_policy_from_string(policy);
          } catch (const ContractViolation &e) {
            throw ConfigError(std::string("--policy: ") + e.what());
          }
          if (rule != "qwc" && rule != "general")
            throw ConfigError("--rule: expected qwc or general");
          emit(c, [&](std::ostream &os) {
            cmd_group(c, p, rule == "qwc" ? CommutationRule::Qubitwise : CommutationRule::General,
                      os);
          });
        } else if (dump->parsed()) {
          emit(c, [&](std::ostream &os) { os << serialize_config(c); });
        }
      },
      std::cerr);
}
