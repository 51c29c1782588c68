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

/// @file
/// Run configuration: one JSON document whose defaults reproduce the
/// four-site study (B = 1, ansatz (-2, 1), ITE order 15 at tau = 2.5 over a
/// 9 x 9 grid of U and J in {0.1 .. 0.9}).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmoments/errors.hpp"
#include "hmoments/models.hpp"
#include "hmoments/simulator.hpp"

namespace hmoments::app {

class ConfigError : public Error {
public:
  using Error::Error;
};

struct GridAxis {
  double min = 0.1;
  double max = 0.9;
  int steps = 9;

  std::vector<double> values() const {
    if (steps == 1)
      return {min};
    std::vector<double> v;
    for (int i = 0; i < steps; ++i)
      v.push_back(min + (max - min) * i / (steps - 1));
    return v;
  }
  bool operator==(const GridAxis &) const = default;
};

enum class MomentSource { Exact, Sampled };

struct MomentSettings {
  MomentSource source = MomentSource::Exact;
  int max_order = 0; ///< 0 derives the order the estimator needs
  std::uint64_t shots = 8192;
  std::optional<std::pair<double, double>> noise; ///< (p01, p10) per qubit
  bool calibrate = false;
  std::uint64_t calibration_shots = 8192; ///< 0 builds the analytic matrix
  bool operator==(const MomentSettings &) const = default;
};

struct EstimatorSettings {
  std::string method = "ite";
  int order = 15;
  std::optional<double> tau = 2.5; ///< empty means golden-section search
  double tau_max = 10.0;
  bool operator==(const EstimatorSettings &) const = default;
};

struct Config {
  double b = 1.0;
  Topology topology = Topology::OpenChain;
  int sites = 4;
  GridAxis u, j;
  double theta0 = -2.0, theta1 = 1.0;
  MomentSettings moments;
  EstimatorSettings estimator;
  std::uint64_t seed = 20211;
  int workers = 1;
  std::string out; ///< empty writes to stdout
  bool operator==(const Config &) const = default;
};

inline const std::vector<std::string> &estimator_methods() {
  static const std::vector<std::string> names{"ite",  "krylov", "lanczos",
                                              "pds",  "cmx",    "infimum"};
  return names;
}

/// Highest moment order `method` reads at the given order parameter.
inline int required_moment_order(const EstimatorSettings &e) {
  const std::string &m = e.method;
  if (m == "ite")
    return 2 * e.order + 1;
  if (m == "krylov")
    return 2 * e.order + 1;
  if (m == "lanczos")
    return 2 * e.order;
  if (m == "pds" || m == "cmx")
    return 2 * e.order - 1;
  if (m == "infimum")
    return 4;
  throw ConfigError("estimator.method: unknown method '" + m + "'");
}

inline int effective_max_order(const Config &c) {
  return c.moments.max_order > 0 ? c.moments.max_order
                                 : required_moment_order(c.estimator);
}

inline std::optional<ReadoutNoiseModel> noise_model(const Config &c) {
  if (!c.moments.noise)
    return std::nullopt;
  return ReadoutNoiseModel::uniform(c.sites, c.moments.noise->first,
                                    c.moments.noise->second);
}

inline void validate(const Config &c) {
  auto axis = [](const GridAxis &a, const char *key) {
    if (a.steps < 1)
      throw ConfigError(std::string(key) + ".steps must be >= 1");
    if (a.steps > 1 && !(a.max >= a.min))
      throw ConfigError(std::string(key) + ": max must be >= min");
  };
  axis(c.u, "grid.u");
  axis(c.j, "grid.j");
  if (c.sites != 4)
    throw ConfigError("model.sites: the ansatz circuit is defined for 4 sites");
  if (c.moments.shots < 1)
    throw ConfigError("moments.shots must be >= 1");
  if (c.moments.max_order < 0 || c.moments.max_order > 40)
    throw ConfigError("moments.max_order must lie in [0, 40]");
  if (c.moments.noise) {
    const auto [p01, p10] = *c.moments.noise;
    if (!(p01 >= 0 && p01 < 0.5 && p10 >= 0 && p10 < 0.5))
      throw ConfigError("moments.noise: flip probabilities must lie in [0, 0.5)");
  }
  required_moment_order(c.estimator);
  if (c.estimator.order < (c.estimator.method == "krylov" ? 0 : 1) &&
      c.estimator.method != "infimum")
    throw ConfigError("estimator.order is too small for " + c.estimator.method);
  if (c.estimator.tau && !(*c.estimator.tau >= 0.0))
    throw ConfigError("estimator.tau must be >= 0 or \"auto\"");
  if (!(c.estimator.tau_max > 0.0))
    throw ConfigError("estimator.tau_max must be positive");
  if (c.workers < 1)
    throw ConfigError("workers must be >= 1");
}

// ---------------------------------------------------------------------------
// JSON mapping

inline nlohmann::ordered_json to_json(const Config &c) {
  using J = nlohmann::ordered_json;
  auto axis = [](const GridAxis &a) { return J::array({a.min, a.max, a.steps}); };
  J j;
  j["model"] = {{"b", c.b}, {"topology", to_string(c.topology)}, {"sites", c.sites}};
  j["grid"] = {{"u", axis(c.u)}, {"j", axis(c.j)}};
  j["ansatz"] = {{"theta0", c.theta0}, {"theta1", c.theta1}};
  J m;
  m["source"] = c.moments.source == MomentSource::Exact ? "exact" : "sampled";
  m["max_order"] = c.moments.max_order;
  m["shots"] = c.moments.shots;
  m["noise"] = c.moments.noise ? J::array({c.moments.noise->first, c.moments.noise->second})
                               : J(nullptr);
  m["calibrate"] = c.moments.calibrate;
  m["calibration_shots"] = c.moments.calibration_shots;
  j["moments"] = m;
  J e;
  e["method"] = c.estimator.method;
  e["order"] = c.estimator.order;
  e["tau"] = c.estimator.tau ? J(*c.estimator.tau) : J("auto");
  e["tau_max"] = c.estimator.tau_max;
  j["estimator"] = e;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["out"] = c.out;
  return j;
}

namespace detail {

using Json = nlohmann::json;

inline void check_keys(const Json &obj, const std::string &path,
                       std::initializer_list<const char *> allowed) {
  if (!obj.is_object())
    throw ConfigError(path + ": expected an object");
  for (const auto &[k, v] : obj.items()) {
    bool ok = false;
    for (const char *a : allowed)
      ok = ok || k == a;
    if (!ok)
      throw ConfigError((path.empty() ? k : path + "." + k) + ": unknown key");
  }
}

template <class T>
void read(const Json &obj, const char *key, const std::string &path, T &dst) {
  if (!obj.contains(key))
    return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception &) {
    throw ConfigError((path.empty() ? std::string(key) : path + "." + key) +
                      ": wrong type (" + obj.at(key).type_name() + ")");
  }
}

inline GridAxis read_axis(const Json &v, const std::string &path) {
  if (v.is_number())
    return {v.get<double>(), v.get<double>(), 1};
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() ||
      !v[1].is_number() || !v[2].is_number_integer())
    throw ConfigError(path + ": expected [min, max, steps] or a single number");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<int>()};
}

inline std::string location(const std::string &text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

} // namespace detail

/// Missing keys keep their defaults; unknown keys and type mismatches are
/// errors naming the offending key path.
inline Config config_from_json(const nlohmann::json &root) {
  using detail::read;
  Config c;
  detail::check_keys(root, "", {"model", "grid", "ansatz", "moments",
                                "estimator", "seed", "workers", "out"});
  if (root.contains("model")) {
    const auto &m = root["model"];
    detail::check_keys(m, "model", {"b", "topology", "sites"});
    read(m, "b", "model", c.b);
    read(m, "sites", "model", c.sites);
    if (m.contains("topology")) {
      std::string t;
      read(m, "topology", "model", t);
      try {
        c.topology = topology_from_string(t);
      } catch (const Error &) {
        throw ConfigError("model.topology: unknown topology '" + t + "'");
      }
    }
  }
  if (root.contains("grid")) {
    const auto &g = root["grid"];
    detail::check_keys(g, "grid", {"u", "j"});
    if (g.contains("u"))
      c.u = detail::read_axis(g["u"], "grid.u");
    if (g.contains("j"))
      c.j = detail::read_axis(g["j"], "grid.j");
  }
  if (root.contains("ansatz")) {
    const auto &a = root["ansatz"];
    detail::check_keys(a, "ansatz", {"theta0", "theta1"});
    read(a, "theta0", "ansatz", c.theta0);
    read(a, "theta1", "ansatz", c.theta1);
  }
  if (root.contains("moments")) {
    const auto &m = root["moments"];
    detail::check_keys(m, "moments", {"source", "max_order", "shots", "noise",
                                      "calibrate", "calibration_shots"});
    if (m.contains("source")) {
      std::string s;
      read(m, "source", "moments", s);
      if (s == "exact")
        c.moments.source = MomentSource::Exact;
      else if (s == "sampled")
        c.moments.source = MomentSource::Sampled;
      else
        throw ConfigError("moments.source: expected \"exact\" or \"sampled\"");
    }
    read(m, "max_order", "moments", c.moments.max_order);
    read(m, "shots", "moments", c.moments.shots);
    read(m, "calibrate", "moments", c.moments.calibrate);
    read(m, "calibration_shots", "moments", c.moments.calibration_shots);
    if (m.contains("noise")) {
      const auto &n = m["noise"];
      if (n.is_null())
        c.moments.noise.reset();
      else if (n.is_number())
        c.moments.noise = std::pair{n.get<double>(), n.get<double>()};
      else if (n.is_array() && n.size() == 2 && n[0].is_number() && n[1].is_number())
        c.moments.noise = std::pair{n[0].get<double>(), n[1].get<double>()};
      else
        throw ConfigError("moments.noise: expected null, p or [p01, p10]");
    }
  }
  if (root.contains("estimator")) {
    const auto &e = root["estimator"];
    detail::check_keys(e, "estimator", {"method", "order", "tau", "tau_max"});
    read(e, "method", "estimator", c.estimator.method);
    read(e, "order", "estimator", c.estimator.order);
    read(e, "tau_max", "estimator", c.estimator.tau_max);
    if (e.contains("tau")) {
      const auto &t = e["tau"];
      if (t.is_string() && t.get<std::string>() == "auto")
        c.estimator.tau.reset();
      else if (t.is_number())
        c.estimator.tau = t.get<double>();
      else
        throw ConfigError("estimator.tau: expected a number or \"auto\"");
    }
  }
  read(root, "seed", "", c.seed);
  read(root, "workers", "", c.workers);
  read(root, "out", "", c.out);
  validate(c);
  return c;
}

inline Config parse_config(const std::string &text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError("config parse error at " + detail::location(text, e.byte) +
                      ": " + e.what());
  }
  return config_from_json(root);
}

inline std::string serialize_config(const Config &c) {
  return to_json(c).dump(2) + "\n";
}

} // namespace hmoments::app
