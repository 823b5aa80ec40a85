#pragma once

// Shared by the prior unit tests and the acceptance binary: candidates sit
// on concentric shells around the origin so every bin has one exact kernel
// value, and acceptance frequency per shell can be compared to it directly.

#include "tdnoise/cloud.hpp"
#include "tdnoise/prior.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace tdn::testing {

struct ShellCloud {
  PointCloud cloud;                 // point 0 is the query at the origin
  std::vector<int> shell_of;        // -1 for the query
  std::vector<double> shell_radius;
  std::vector<std::size_t> shell_count;
};

inline ShellCloud make_shells(double radius, int shells, std::size_t per_shell, std::uint64_t seed) {
  ShellCloud s;
  s.cloud.positions.push_back(Vec3::Zero());
  s.shell_of.push_back(-1);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int b = 0; b < shells; ++b) {
    const double d = (b + 0.5) / shells * radius;
    s.shell_radius.push_back(d);
    s.shell_count.push_back(per_shell);
    for (std::size_t k = 0; k < per_shell; ++k) {
      s.cloud.positions.push_back(Vec3(g(rng), g(rng), g(rng)).normalized() * d);
      s.shell_of.push_back(b);
    }
  }
  return s;
}

struct ShellStats {
  std::vector<double> empirical;  // estimated acceptance probability per shell
  std::vector<double> expected;   // oracle kernel value at the shell radius
  double max_abs_error = 0.0;
};

// One try per trial, self excluded: P(accept in shell b) = n_b / N * k(d_b).
inline ShellStats shell_acceptance(const ShellCloud& s, PriorConfig config, std::size_t trials,
                                   std::uint64_t seed, const std::function<double(double)>& oracle) {
  config.max_tries = 1;
  config.include_self = false;
  const NeighborIndex index = build_index(s.cloud, config.radius);
  std::vector<std::size_t> accepted(s.shell_radius.size(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    if (auto hit = sample_prior(s.cloud, index, 0, config, rng)) ++accepted[s.shell_of[hit->id]];
  }
  double total = 0.0;
  for (std::size_t c : s.shell_count) total += static_cast<double>(c);
  ShellStats out;
  for (std::size_t b = 0; b < accepted.size(); ++b) {
    const double pick = static_cast<double>(s.shell_count[b]) / total;
    const double emp = static_cast<double>(accepted[b]) / (static_cast<double>(trials) * pick);
    const double k = oracle(s.shell_radius[b]);
    out.empirical.push_back(emp);
    out.expected.push_back(k);
    out.max_abs_error = std::max(out.max_abs_error, std::abs(emp - k));
  }
  return out;
}

}  // namespace tdn::testing
