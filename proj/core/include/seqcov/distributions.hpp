#pragma once

#include <cstddef>
#include <vector>

namespace seqcov {

/// Discounted state-action occupancy d^pi(s, a) of a policy in a tabular MDP.
struct OccupancyDist {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> d;  ///< row-major [s * n_actions + a]
  double gamma = 0.0;

  double at(std::size_t s, std::size_t a) const { return d[s * n_actions + a]; }
  double total() const;
};

/// Empirical state-action distribution mu(s, a) of a dataset.
///
/// `counts` are kept alongside the normalized table so that conditional
/// action frequencies can be formed without rounding.
struct EmpiricalDist {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> mu;                ///< row-major [s * n_actions + a]
  std::vector<std::size_t> counts;       ///< raw pair counts, same layout
  std::size_t total = 0;

  double at(std::size_t s, std::size_t a) const { return mu[s * n_actions + a]; }
  bool in_support(std::size_t s, std::size_t a) const { return counts[s * n_actions + a] > 0; }
  std::size_t state_count(std::size_t s) const;
  std::size_t support_size() const;
};

}  // namespace seqcov
