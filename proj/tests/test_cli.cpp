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

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "hmoments/app/commands.hpp"

using namespace hmoments;
using namespace hmoments::app;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out, err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("hmoments_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliRun cli(const std::string &args) {
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = std::string(HMOMENTS_CLI) + " " + args + " 2>" + err.string();
  CliRun r;
  FILE *pipe = ::popen(cmd.c_str(), "r");
  if (!pipe)
    return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0)
    r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

fs::path write_file(const std::string &name, const std::string &text) {
  const fs::path p = scratch() / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

std::vector<std::string> lines(const std::string &text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    out.push_back(l);
  return out;
}

/// Estimate cell of a one-row estimator CSV.
std::string estimate_cell(const std::string &text) {
  for (const auto &l : lines(text))
    if (!l.empty() && l[0] != '#' && l.rfind("method,", 0) != 0)
      return csv::split(l)[2];
  return {};
}

double summary_value(const std::string &text, const std::string &key) {
  const auto pos = text.rfind(key + "=");
  return csv::parse_number(text.substr(pos + key.size() + 1, text.find_first_of(" \n", pos) - pos - key.size() - 1));
}

} // namespace

TEST(Config, DefaultsMatchReferenceSettings) {
  const Config c;
  EXPECT_EQ(c.b, 1.0);
  EXPECT_EQ(c.u.values().size(), 9u);
  EXPECT_DOUBLE_EQ(c.u.values().front(), 0.1);
  EXPECT_DOUBLE_EQ(c.u.values().back(), 0.9);
  EXPECT_EQ(c.theta0, -2.0);
  EXPECT_EQ(c.theta1, 1.0);
  EXPECT_EQ(c.estimator.method, "ite");
  EXPECT_EQ(c.estimator.order, 15);
  EXPECT_EQ(*c.estimator.tau, 2.5);
  EXPECT_EQ(effective_max_order(c), 31);
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, RoundTripIsIdentity) {
  Config c;
  EXPECT_EQ(parse_config(serialize_config(c)), c);
  c.b = -0.75;
  c.topology = Topology::Ring;
  c.u = {0.05, 0.95, 7};
  c.j = {0.3, 0.3, 1};
  c.theta0 = 0.123456789012345;
  c.moments.source = MomentSource::Sampled;
  c.moments.noise = std::pair{0.02, 0.03};
  c.moments.calibrate = true;
  c.moments.shots = 1234;
  c.moments.max_order = 12;
  c.estimator = {"pds", 3, std::nullopt, 7.5};
  c.seed = 99;
  c.workers = 3;
  c.out = "x.csv";
  const Config back = parse_config(serialize_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), serialize_config(c));
}

TEST(Config, ErrorsNameTheKey) {
  auto message = [](const std::string &text) {
    try {
      parse_config(text);
    } catch (const ConfigError &e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("{\"model\": {\"bb\": 1}}").find("model.bb"), std::string::npos);
  EXPECT_NE(message("{\"estimator\": {\"order\": \"x\"}}").find("estimator.order"), std::string::npos);
  EXPECT_NE(message("{\"seed\": \"x\"}").find("seed: wrong type"), std::string::npos);
  EXPECT_NE(message("{\n  \"seed\": 1,\n  oops\n}").find("line 3"), std::string::npos);
  EXPECT_NE(message("{\"grid\": {\"u\": [0.1, 0.9, 0]}}").find("grid.u.steps"), std::string::npos);
  EXPECT_NE(message("{\"estimator\": {\"method\": \"magic\"}}").find("magic"), std::string::npos);
}

TEST(Config, RequiredOrders) {
  EXPECT_EQ(required_moment_order({"ite", 15, 2.5, 10}), 31);
  EXPECT_EQ(required_moment_order({"krylov", 4, 2.5, 10}), 9);
  EXPECT_EQ(required_moment_order({"lanczos", 3, 2.5, 10}), 6);
  EXPECT_EQ(required_moment_order({"pds", 3, 2.5, 10}), 5);
  EXPECT_EQ(required_moment_order({"cmx", 4, 2.5, 10}), 7);
  EXPECT_EQ(required_moment_order({"infimum", 1, 2.5, 10}), 4);
}

TEST(RunCommand, ExitCodes) {
  std::ostringstream err;
  EXPECT_EQ(run_command([] {}, err), kExitOk);
  EXPECT_EQ(run_command([] { throw ConfigError("x"); }, err), kExitConfig);
  EXPECT_EQ(run_command([] { throw CoverageError("x", {"XXII"}); }, err), kExitCoverage);
  EXPECT_EQ(run_command([] { throw InsufficientOrderError("ite", 31, 8); }, err), kExitNumerical);
  EXPECT_EQ(run_command([] { throw IteNormalizationError("x"); }, err), kExitNumerical);
  EXPECT_EQ(run_command([] { throw CmxSingularityError("x"); }, err), kExitNumerical);
  EXPECT_EQ(run_command([] { throw PdsDegeneracyError("x"); }, err), kExitNumerical);
  EXPECT_EQ(run_command([] { throw DomainError("x"); }, err), kExitNumerical);
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(cli("estimate --config /nonexistent/config.json").code, kExitConfig);
  const auto bad = write_file("bad.json", "{\n  \"estimator\": {\"ordr\": 3}\n}\n");
  const CliRun r = cli("estimate --config " + bad.string());
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("estimator.ordr"), std::string::npos);
  EXPECT_EQ(cli("estimate --method nonsense").code, kExitConfig);
  EXPECT_EQ(cli("estimate --bogus-flag").code, kExitConfig);
  EXPECT_EQ(cli("scan --u 0.1,0.9").code, kExitConfig);
}

TEST(Cli, InsufficientOrderIsReported) {
  const CliRun r = cli("estimate --max-order 8");
  EXPECT_EQ(r.code, kExitNumerical);
  EXPECT_NE(r.err.find("need order >= 31"), std::string::npos) << r.err;
}

TEST(Cli, EstimatorFailureExitsWithThree) {
  // All-zero moments leave the PDS(2) Hankel system singular.
  const auto csv_path = write_file("zero.csv", "order,value,provenance\n0,0,exact\n1,0,exact\n2,0,exact\n3,0,exact\n");
  EXPECT_EQ(cli("estimate --method pds --order 2 --moments " + csv_path.string()).code, kExitNumerical);
}

TEST(Cli, EstimateMatchesLibraryBitForBit) {
  const CliRun r = cli("estimate --u 0.5 --j 0.5 --method ite --order 15 --tau 2.5");
  ASSERT_EQ(r.code, 0) << r.err;
  const StateVector s = apply_circuit(StateVector(4), build_ansatz(-2.0, 1.0));
  const PauliSum h = build_heisenberg({0.5, 0.5, 1.0, 4, Topology::OpenChain});
  const double lib = ite_energy(moments_exact(s, h, 31), 2.5, 15).energy;
  EXPECT_EQ(estimate_cell(r.out), csv::number(lib));
}

TEST(Cli, TrivialEstimatesPrintMean) {
  const StateVector s = apply_circuit(StateVector(4), build_ansatz(-2.0, 1.0));
  const PauliSum h = build_heisenberg({0.1, 0.1, 1.0, 4, Topology::OpenChain});
  const std::string mean = csv::number(moments_exact(s, h, 1)[1]);
  const std::string ite = estimate_cell(cli("estimate --tau 0").out);
  const std::string pds = estimate_cell(cli("estimate --method pds --order 1").out);
  EXPECT_NEAR(csv::parse_number(ite), csv::parse_number(mean), 1e-11);
  EXPECT_NEAR(csv::parse_number(pds), csv::parse_number(mean), 1e-11);
}

TEST(Cli, EstimateFromMomentFile) {
  const CliRun m = cli("moments --u 0.4 --j 0.6 --max-order 9");
  ASSERT_EQ(m.code, 0);
  const auto path = write_file("m.csv", m.out);
  const CliRun e = cli("estimate --method krylov --order 4 --moments " + path.string());
  ASSERT_EQ(e.code, 0) << e.err;
  std::istringstream in(m.out);
  EXPECT_EQ(estimate_cell(e.out), csv::number(krylov_generalized_eig(read_csv(in), 4).energy));
}

TEST(Cli, MomentsOfEigenstate) {
  const auto cfg = write_file("eig.json", R"({"ansatz": {"theta0": 0, "theta1": 0},
    "grid": {"u": 0, "j": 0}, "moments": {"max_order": 6}})");
  const CliRun r = cli("moments --config " + cfg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  const MomentTable m = read_csv(in);
  ASSERT_EQ(m.max_order(), 6);
  // X on qubits 0 and 1 and Ry(pi) on qubit 3 give |1101>, field energy -2.
  for (int n = 0; n <= 6; ++n)
    EXPECT_NEAR(m[n], std::pow(-2.0, n), 1e-9);
}

TEST(Cli, DefaultHeaderNamesSeventyTwoStrings) {
  const CliRun exact = cli("moments");
  ASSERT_EQ(exact.code, 0);
  EXPECT_NE(exact.out.find("strings=72"), std::string::npos);
  const CliRun sampled = cli("moments --source sampled --shots 64");
  ASSERT_EQ(sampled.code, 0) << sampled.err;
  EXPECT_NE(sampled.out.find("strings=72"), std::string::npos);
  EXPECT_NE(sampled.out.find("seed=20211"), std::string::npos);
  EXPECT_NE(sampled.out.find("shots=64"), std::string::npos);
  EXPECT_NE(sampled.out.find("groups="), std::string::npos);
}

TEST(Cli, SampledMomentsApproachExact) {
  const CliRun exact = cli("moments --max-order 3");
  const CliRun sampled = cli("moments --max-order 3 --source sampled --shots 1000000");
  ASSERT_EQ(sampled.code, 0) << sampled.err;
  std::istringstream a(exact.out), b(sampled.out);
  const MomentTable me = read_csv(a), ms = read_csv(b);
  EXPECT_EQ(ms.provenance, Provenance::PauliMeasured);
  for (int n = 0; n <= 3; ++n)
    EXPECT_NEAR(ms[n], me[n], 5e-3 * std::max(1.0, std::abs(me[n]))) << "order " << n;
}

TEST(Cli, ScanOutputShape) {
  const CliRun r = cli("scan --u 0.1,0.9,3 --j 0.2,0.8,2");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  std::vector<std::string> body;
  for (const auto &l : ls)
    if (!l.empty() && l[0] != '#')
      body.push_back(l);
  ASSERT_EQ(body.size(), 7u);
  EXPECT_EQ(body[0], "U,J,energy_est,energy_exact,mag_est,mag_exact,status");
  EXPECT_EQ(body[1].substr(0, 8), "0.1,0.2,");
  EXPECT_EQ(body[2].substr(0, 8), "0.1,0.8,");
  EXPECT_EQ(body[3].substr(0, 8), "0.5,0.2,");
  EXPECT_EQ(ls.back().rfind("# MSE energy=", 0), 0u);
  EXPECT_NE(ls.back().find("cells=6/6"), std::string::npos);
}

TEST(Cli, ScanIsDeterministicAndWorkerInvariant) {
  const std::string base = "scan --u 0.1,0.9,3 --j 0.1,0.9,3 --source sampled --shots 256 "
                           "--noise 0.02,0.02 --calibrate --max-order 31";
  const std::string args = base + " --seed 7";
  const auto out1 = scratch() / "scan1.csv", out2 = scratch() / "scan2.csv",
             out3 = scratch() / "scan3.csv";
  ASSERT_EQ(cli(args + " --workers 1 --out " + out1.string()).code, 0);
  ASSERT_EQ(cli(args + " --workers 1 --out " + out2.string()).code, 0);
  ASSERT_EQ(cli(args + " --workers 3 --out " + out3.string()).code, 0);
  EXPECT_FALSE(slurp(out1).empty());
  EXPECT_EQ(slurp(out1), slurp(out2));
  EXPECT_EQ(slurp(out1), slurp(out3));
  ASSERT_EQ(cli(base + " --seed 8 --out " + out2.string()).code, 0);
  EXPECT_NE(slurp(out1), slurp(out2));
}

TEST(Cli, DiagonalModelSingleCell) {
  Config c;
  c.u = {0.0, 0.0, 1};
  c.j = {0.0, 0.0, 1};
  c.estimator = {"krylov", 4, std::nullopt, 10};
  const ScanResult r = scan(c);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_TRUE(r.cells[0].status == "ok" || r.cells[0].status == "warn") << r.cells[0].status;
  EXPECT_DOUBLE_EQ(r.cells[0].energy_exact, -4.0);
  EXPECT_NEAR(r.cells[0].energy_est, r.cells[0].energy_exact, 1e-9);

  c.estimator = EstimatorSettings{};
  const ScanResult ite = scan(c);
  EXPECT_DOUBLE_EQ(ite.cells[0].energy_exact, -4.0);
  EXPECT_GE(ite.cells[0].energy_est, -4.0 - 1e-9);
  EXPECT_DOUBLE_EQ(ite.cells[0].mag_exact, -4.0);
}

TEST(Cli, ScanRecordsCellFailures) {
  // Without the field term no single-Z string is measured, so the sampled
  // magnetization cannot be contracted.
  Config c;
  c.b = 0.0;
  c.u = {0.5, 0.5, 1};
  c.j = {0.5, 0.5, 1};
  c.moments.source = MomentSource::Sampled;
  c.moments.shots = 64;
  const ScanResult r = scan(c);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_EQ(r.cells[0].status, "error-coverage");
  EXPECT_EQ(r.scored, 0u);
}

TEST(Cli, CalibrateDemoNoiseFree) {
  const CliRun r = cli("calibrate-demo --source sampled --shots 2000 --noise 0,0");
  ASSERT_EQ(r.code, 0) << r.err;
  int rows = 0;
  for (const auto &l : lines(r.out)) {
    if (l.empty() || l[0] == '#' || l.rfind("repeat,", 0) == 0)
      continue;
    const auto cols = csv::split(l);
    ASSERT_EQ(cols.size(), 8u);
    EXPECT_EQ(cols[4], cols[5]);
    EXPECT_LT(std::abs(csv::parse_number(cols[4]) - csv::parse_number(cols[3])), 5.0 / std::sqrt(2000.0));
    ++rows;
  }
  EXPECT_EQ(rows, 72);
}

TEST(Cli, CalibrationReducesError) {
  const CliRun r = cli("calibrate-demo --shots 8192 --noise 0.05,0.05 --repeats 5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(summary_value(r.out, "calibrated"), summary_value(r.out, "raw"));

  Config c;
  c.moments.noise = std::pair{0.05, 0.05};
  const auto demo = calibration_demo(c, 5);
  // Spread over repeats per string, raw vs calibrated.
  std::map<std::string, std::vector<std::pair<double, double>>> by_string;
  for (const auto &row : demo)
    by_string[row.string.literal()].push_back({row.raw - row.exact, row.calibrated - row.exact});
  double raw_rms = 0, cal_rms = 0;
  for (const auto &[s, errs] : by_string)
    for (auto [a, b] : errs) {
      raw_rms += a * a;
      cal_rms += b * b;
    }
  EXPECT_LT(cal_rms, raw_rms);
}

TEST(Cli, GroupCommand) {
  const CliRun r = cli("group");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("# strings=72 groups="), std::string::npos);
  std::istringstream in(r.out);
  const GroupingPlan plan = read_plan(in);
  EXPECT_EQ(plan.string_count(), 72u);
  EXPECT_LE(plan.groups.size(), 27u);
  EXPECT_EQ(cli("group --policy nope").code, kExitConfig);
  EXPECT_EQ(cli("group --rule general").code, 0);
}

TEST(Cli, ConfigDumpRoundTrips) {
  const CliRun r = cli("config --seed 5 --tau auto --u 0.2,0.4,3");
  ASSERT_EQ(r.code, 0);
  const Config c = parse_config(r.out);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_FALSE(c.estimator.tau.has_value());
  EXPECT_EQ(c.u.steps, 3);
  const auto path = write_file("dump.json", r.out);
  EXPECT_EQ(cli("config --config " + path.string()).out, r.out);
}
