#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "seqcov/dataset.hpp"
#include "seqcov/envs.hpp"

namespace testing_util {

using seqcov::OfflineDataset;
using seqcov::Trajectory;
using seqcov::Transition;

/// One trajectory per entry of `states`; actions are [1.0], rewards 0, next_state chained.
inline OfflineDataset scalar_dataset(const std::vector<std::vector<double>>& states) {
  OfflineDataset d;
  d.meta = {1, 1, 0, 0.9, "toy", 0};
  std::int64_t id = 0;
  for (const auto& traj_states : states) {
    Trajectory t;
    t.id = id++;
    for (std::size_t i = 0; i < traj_states.size(); ++i) {
      const double next = i + 1 < traj_states.size() ? traj_states[i + 1] : traj_states[i];
      t.transitions.push_back({{traj_states[i]}, {1.0}, 0.0, {next}, false});
    }
    d.meta.max_length = std::max(d.meta.max_length, t.transitions.size());
    d.trajectories.push_back(std::move(t));
  }
  return d;
}

/// Random well-formed dataset with the given dimensions.
inline OfflineDataset random_dataset(std::uint64_t seed, std::size_t n_traj, std::size_t max_len,
                                     std::size_t state_dim = 3, std::size_t action_dim = 2) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, 10.0);
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  OfflineDataset d;
  d.meta = {state_dim, action_dim, max_len, 0.97, "random", seed};
  for (std::size_t i = 0; i < n_traj; ++i) {
    Trajectory t;
    t.id = static_cast<std::int64_t>(i);
    const std::size_t L = len(gen);
    std::vector<double> s(state_dim);
    for (auto& v : s) v = n(gen);
    for (std::size_t k = 0; k < L; ++k) {
      Transition x;
      x.state = s;
      x.action.resize(action_dim);
      for (auto& v : x.action) v = n(gen);
      x.reward = n(gen) / 3.0;
      for (auto& v : s) v = n(gen) * 1e-3 + v * 0.999;
      x.next_state = s;
      x.terminal = k + 1 == L && (gen() % 2 == 0);
      t.transitions.push_back(std::move(x));
    }
    d.trajectories.push_back(std::move(t));
  }
  return d;
}

/// Every (s, a) of a deterministic tabular MDP exactly once, each as a one-step trajectory.
inline OfflineDataset all_pairs_dataset(const seqcov::TabularMDP& m) {
  OfflineDataset d;
  d.meta = {m.codec.dim(), 1, 1, m.gamma, "all_pairs", 0};
  std::int64_t id = 0;
  for (std::size_t s = 0; s < m.n_states; ++s) {
    if (m.is_terminal(s)) continue;
    for (std::size_t a = 0; a < m.n_actions; ++a) {
      std::size_t s2 = 0;
      while (m.p(s, a, s2) < 1.0) ++s2;
      Trajectory t;
      t.id = id++;
      t.transitions.push_back({m.codec.encode_center(s), {static_cast<double>(a)}, m.realized_reward(s, a, s2),
                               m.codec.encode_center(s2), m.is_terminal(s2)});
      d.trajectories.push_back(std::move(t));
    }
  }
  return d;
}

}  // namespace testing_util
