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
/// Greedy partitioning of Pauli strings into jointly measurable groups, and
/// the shot budget that follows from per-group covariances.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hmoments/pauli.hpp"
#include "hmoments/simulator.hpp"

namespace hmoments {

enum class OrderingPolicy { WeightDescending, Lexicographic, Insertion };

enum class CommutationRule { Qubitwise, General };

inline std::string to_string(OrderingPolicy p) {
  switch (p) {
  case OrderingPolicy::WeightDescending:
    return "weight-descending";
  case OrderingPolicy::Lexicographic:
    return "lexicographic";
  default:
    return "insertion";
  }
}

inline OrderingPolicy ordering_policy_from_string(const std::string &s) {
  if (s == "weight-descending")
    return OrderingPolicy::WeightDescending;
  if (s == "lexicographic")
    return OrderingPolicy::Lexicographic;
  if (s == "insertion")
    return OrderingPolicy::Insertion;
  throw ContractViolation("unknown ordering policy '" + s + "'");
}

struct GroupingPlan {
  std::vector<std::vector<PauliString>> groups;
  /// One per group for qubitwise plans; empty for general-commutation plans,
  /// which have no single-qubit measurement basis.
  std::vector<Circuit> rotations;
  OrderingPolicy policy = OrderingPolicy::WeightDescending;
  CommutationRule rule = CommutationRule::Qubitwise;

  std::size_t string_count() const {
    std::size_t n = 0;
    for (const auto &g : groups)
      n += g.size();
    return n;
  }
};

/// Sorted copy of `strings` per policy, duplicates removed (first occurrence
/// wins for the insertion policy). Weight ties break by literal.
inline std::vector<PauliString> order_strings(std::vector<PauliString> strings,
                                              OrderingPolicy policy) {
  std::vector<PauliString> unique;
  std::set<PauliString> seen;
  for (auto &s : strings)
    if (seen.insert(s).second)
      unique.push_back(std::move(s));
  auto by_literal = [](const PauliString &a, const PauliString &b) {
    return a.literal() < b.literal();
  };
  switch (policy) {
  case OrderingPolicy::WeightDescending:
    std::stable_sort(unique.begin(), unique.end(),
                     [&](const PauliString &a, const PauliString &b) {
                       if (a.weight() != b.weight())
                         return a.weight() > b.weight();
                       return by_literal(a, b);
                     });
    break;
  case OrderingPolicy::Lexicographic:
    std::stable_sort(unique.begin(), unique.end(), by_literal);
    break;
  case OrderingPolicy::Insertion:
    break;
  }
  return unique;
}

/// First-fit greedy: each string joins the first group it is compatible with
/// member by member, otherwise it opens a new group.
inline GroupingPlan greedy_grouping(const std::vector<PauliString> &strings,
                                    OrderingPolicy policy,
                                    CommutationRule rule) {
  if (strings.empty())
    throw ContractViolation("greedy_grouping: no strings to group");
  const int n = strings.front().n_qubits();
  for (const auto &s : strings)
    require_same_qubits(n, s.n_qubits(), "greedy_grouping");
  auto compatible = [rule](const PauliString &a, const PauliString &b) {
    return rule == CommutationRule::Qubitwise ? qubitwise_commutes(a, b)
                                              : commutes(a, b);
  };
  GroupingPlan plan;
  plan.policy = policy;
  plan.rule = rule;
  for (const auto &s : order_strings(strings, policy)) {
    auto fits = [&](const std::vector<PauliString> &g) {
      return std::all_of(g.begin(), g.end(),
                         [&](const PauliString &m) { return compatible(s, m); });
    };
    auto it = std::find_if(plan.groups.begin(), plan.groups.end(), fits);
    if (it == plan.groups.end())
      plan.groups.push_back({s});
    else
      it->push_back(s);
  }
  if (rule == CommutationRule::Qubitwise)
    for (const auto &g : plan.groups)
      plan.rotations.push_back(measurement_rotation(g));
  return plan;
}

inline GroupingPlan
greedy_qwc_grouping(const std::vector<PauliString> &strings,
                    OrderingPolicy policy = OrderingPolicy::WeightDescending) {
  return greedy_grouping(strings, policy, CommutationRule::Qubitwise);
}

/// One group per line, members space separated.
inline void write_plan(std::ostream &os, const GroupingPlan &plan) {
  for (const auto &g : plan.groups) {
    for (std::size_t i = 0; i < g.size(); ++i)
      os << (i ? " " : "") << g[i].literal();
    os << '\n';
  }
}

/// Inverse of write_plan. Blank lines and '#' comments are skipped; qubitwise
/// validity of each line is re-checked by building its rotation.
inline GroupingPlan read_plan(std::istream &is,
                              OrderingPolicy policy = OrderingPolicy::Insertion) {
  GroupingPlan plan;
  plan.policy = policy;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    std::istringstream words(line);
    std::vector<PauliString> group;
    std::string w;
    while (words >> w)
      group.push_back(PauliString::from_literal(w));
    if (group.empty())
      continue;
    plan.rotations.push_back(measurement_rotation(group));
    plan.groups.push_back(std::move(group));
  }
  return plan;
}

/// Cov(P_i, P_j) = Re<P_i P_j> - <P_i><P_j> for every pair in each group.
inline std::vector<Eigen::MatrixXd> group_covariances(const StateVector &state,
                                                      const GroupingPlan &plan) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(plan.groups.size());
  for (const auto &g : plan.groups) {
    const auto k = static_cast<Eigen::Index>(g.size());
    std::vector<double> mean;
    std::vector<Eigen::VectorXcd> images;
    for (const auto &p : g) {
      images.push_back(apply(p, state.amplitudes()));
      mean.push_back(state.amplitudes().dot(images.back()).real());
    }
    Eigen::MatrixXd cov(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) {
        const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
        // <P_i P_j> = <P_i phi | P_j phi> since P_i is Hermitian.
        cov(i, j) = images[ui].dot(images[uj]).real() - mean[ui] * mean[uj];
      }
    out.push_back(std::move(cov));
  }
  return out;
}

struct ShotBudget {
  double total = 0.0;               ///< (sum_G sigma_G / eps)^2
  std::vector<double> group_sigma;  ///< sqrt of h^T cov h per group
  std::vector<double> allocation;   ///< optimal shots per group, sums to total
  std::vector<std::string> warnings;
};

inline ShotBudget shot_budget(const GroupingPlan &plan,
                              const std::map<PauliString, double> &coefficients,
                              const std::vector<Eigen::MatrixXd> &covariances,
                              double epsilon) {
  if (!(epsilon > 0.0))
    throw ContractViolation("shot_budget: epsilon must be positive");
  if (covariances.size() != plan.groups.size())
    throw DimensionError("shot_budget: one covariance matrix per group needed");
  ShotBudget out;
  double sum_sigma = 0.0;
  for (std::size_t gi = 0; gi < plan.groups.size(); ++gi) {
    const auto &g = plan.groups[gi];
    const auto &cov = covariances[gi];
    const auto k = static_cast<Eigen::Index>(g.size());
    if (cov.rows() != k || cov.cols() != k)
      throw DimensionError("shot_budget: covariance size mismatch in group " +
                           std::to_string(gi));
    if (!cov.isApprox(cov.transpose(), 1e-9) && cov.norm() > 1e-300)
      throw ContractViolation("shot_budget: covariance of group " +
                              std::to_string(gi) + " is not symmetric");
    Eigen::VectorXd h(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      auto it = coefficients.find(g[static_cast<std::size_t>(i)]);
      h(i) = it == coefficients.end() ? 0.0 : it->second;
    }
    double var = h.dot(cov * h);
    if (var < 0.0) {
      out.warnings.push_back("group " + std::to_string(gi) +
                             ": negative variance " + std::to_string(var) +
                             " clipped to 0");
      var = 0.0;
    }
    out.group_sigma.push_back(std::sqrt(var));
    sum_sigma += out.group_sigma.back();
  }
  out.total = (sum_sigma / epsilon) * (sum_sigma / epsilon);
  for (double s : out.group_sigma)
    out.allocation.push_back(sum_sigma > 0.0 ? out.total * s / sum_sigma : 0.0);
  return out;
}

} // namespace hmoments
