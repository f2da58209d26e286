#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqcov/dataset.hpp"
#include "seqcov/distributions.hpp"
#include "seqcov/rng.hpp"

namespace seqcov {

/// How a tabular state is written into a dataset's real-valued state vector.
///
/// kIndex stores [s]. kGridPosition stores a continuous (x, y) position inside
/// the state's grid cell; decoding takes the floor and clamps to the grid, so
/// small state perturbations near a cell edge change the decoded cell.
enum class StateCodecKind { kIndex, kGridPosition };

struct StateCodec {
  StateCodecKind kind = StateCodecKind::kIndex;
  std::size_t n_states = 0;
  std::size_t width = 0;  ///< grid codecs only
  std::size_t height = 0;
  double jitter = 1.0;    ///< fraction of the cell the sampled position may occupy, in [0, 1]

  std::size_t dim() const { return kind == StateCodecKind::kIndex ? 1 : 2; }
  std::vector<double> encode(std::size_t s, Rng& rng) const;
  /// Cell centre (grid) or index (index codec); no randomness.
  std::vector<double> encode_center(std::size_t s) const;
  /// Decodes a possibly perturbed observation, clamping to a valid state.
  /// Throws ArgumentError if it is non-finite.
  std::size_t decode(std::span<const double> obs) const;
};

nlohmann::json to_json(const StateCodec& codec);
StateCodec codec_from_json(const nlohmann::json& j);

/// Tabular actions are stored as [a]; decoding rounds and clamps to [0, n_actions).
std::size_t decode_action(std::span<const double> action, std::size_t n_actions);

/// Finite MDP (S, A, P, R, gamma, initial distribution).
///
/// Terminal states are absorbing with zero reward, and an episode ends when
/// one is entered. Rewards realized in rollouts are `base_reward[s,a] +
/// arrival_bonus[s']`; `reward(s, a)` is their expectation.
struct TabularMDP {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> transition;     ///< [(s * A + a) * S + s']
  std::vector<double> base_reward;    ///< [s * A + a]
  std::vector<double> arrival_bonus;  ///< [s'], may be empty
  double gamma = 0.9;
  std::vector<double> initial;
  std::vector<char> terminal;         ///< may be empty (no terminal states)
  std::size_t max_steps = 100;
  StateCodec codec;
  std::string name = "tabular";

  double p(std::size_t s, std::size_t a, std::size_t s2) const {
    return transition[(s * n_actions + a) * n_states + s2];
  }
  std::span<const double> row(std::size_t s, std::size_t a) const {
    return {transition.data() + (s * n_actions + a) * n_states, n_states};
  }
  double reward(std::size_t s, std::size_t a) const;
  double realized_reward(std::size_t s, std::size_t a, std::size_t s2) const;
  bool is_terminal(std::size_t s) const { return !terminal.empty() && terminal[s] != 0; }
  /// Largest |realized reward| over all reachable (s, a, s').
  double max_abs_reward() const;

  /// Throws ArgumentError when an invariant (stochastic rows, gamma in (0,1), ...) fails.
  void check() const;
};

/// pi(a | s) table.
struct TabularPolicy {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> probs;  ///< [s * A + a]

  double prob(std::size_t s, std::size_t a) const { return probs[s * n_actions + a]; }
  std::span<const double> row(std::size_t s) const { return {probs.data() + s * n_actions, n_actions}; }
  void check() const;

  static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions);
  static TabularPolicy deterministic(std::span<const std::size_t> actions, std::size_t n_actions);
};

nlohmann::json to_json(const TabularPolicy& policy);
TabularPolicy policy_from_json(const nlohmann::json& j);

struct GridCell {
  std::size_t x = 0;
  std::size_t y = 0;
  bool operator==(const GridCell&) const = default;
};

/// Actions of make_gridworld, in index order.
enum GridAction : std::size_t { kUp = 0, kRight = 1, kDown = 2, kLeft = 3 };

struct GridworldOptions {
  GridCell start{0, 0};
  std::size_t max_steps = 100;
  StateCodecKind codec = StateCodecKind::kGridPosition;
  double jitter = 1.0;
};

/// 4-action grid MDP. Moves that leave the grid keep the position. With
/// probability `slip_prob` the move goes to one of the two perpendicular
/// directions (split evenly). Entering the goal pays +1, a trap -1; both are
/// terminal. Every other step pays 0.
TabularMDP make_gridworld(std::size_t width, std::size_t height, GridCell goal, const std::vector<GridCell>& traps,
                          double slip_prob, double gamma, const GridworldOptions& options = {});

std::size_t grid_state(std::size_t width, GridCell cell);

/// Q* by value iteration until the sup-norm update is below `tol`. Terminal states keep Q = 0.
std::vector<double> value_iteration(const TabularMDP& mdp, double tol = 1e-12, std::size_t max_iters = 100000);

/// Greedy policy of a Q table, ties to the lowest action index.
TabularPolicy greedy_policy(std::span<const double> q, std::size_t n_states, std::size_t n_actions);

/// Mixes a policy with the uniform one: (1 - epsilon) * pi + epsilon * uniform.
TabularPolicy epsilon_greedy(const TabularPolicy& policy, double epsilon);

/// d^pi(s, a) = (1 - gamma) sum_t gamma^t Pr(s_t = s, a_t = a), from a direct
/// solve of the discounted state balance equations.
OccupancyDist exact_occupancy(const TabularMDP& mdp, const TabularPolicy& policy);

/// mu(s, a) = count(s, a) / N over every dataset transition. Out-of-range
/// index values throw ArgumentError unless `clamp` is set, in which case they
/// are decoded like perturbed observations.
EmpiricalDist empirical_distribution(const OfflineDataset& dataset, const TabularMDP& mdp, bool clamp = false);

// --- continuous point-mass task -----------------------------------------------

/// 2-D point mass: observation (x, y, vx, vy), action = bounded acceleration (ax, ay).
struct PointMassEnv {
  std::array<double, 2> arena_lo{0.0, 0.0};
  std::array<double, 2> arena_hi{10.0, 10.0};
  std::array<double, 2> start{1.0, 1.0};
  double start_noise = 0.2;
  std::array<double, 2> goal{8.0, 5.0};
  double goal_radius = 0.6;
  double noise = 0.02;
  double dt = 0.2;
  double max_speed = 2.0;
  double max_accel = 1.0;
  double step_penalty = -0.01;
  double goal_reward = 1.0;
  double gamma = 0.98;
  std::size_t max_steps = 200;

  void check() const;
  std::vector<double> reset(Rng& rng) const;

  struct Step {
    std::vector<double> next_state;
    double reward = 0.0;
    bool terminal = false;
  };
  Step step(std::span<const double> state, std::span<const double> action, Rng& rng) const;
};

nlohmann::json to_json(const PointMassEnv& env);
PointMassEnv pointmass_from_json(const nlohmann::json& j);

using ContinuousPolicy = std::function<std::vector<double>(std::span<const double> state, Rng& rng)>;

/// Proportional-derivative controller toward the goal; with probability
/// `epsilon` a uniformly random acceleration instead.
ContinuousPolicy pointmass_behavior(const PointMassEnv& env, double epsilon, double gain = 1.0, double damping = 1.5);

// --- rollouts -----------------------------------------------------------------

/// Rolls out `n_trajectories` episodes. Deterministic for a fixed seed.
OfflineDataset rollout(const TabularMDP& mdp, const TabularPolicy& policy, std::size_t n_trajectories,
                       std::uint64_t seed);
OfflineDataset rollout(const PointMassEnv& env, const ContinuousPolicy& policy, std::size_t n_trajectories,
                       std::uint64_t seed);

/// Rolls out whole episodes until at least `min_transitions` transitions exist.
OfflineDataset rollout_transitions(const TabularMDP& mdp, const TabularPolicy& policy, std::size_t min_transitions,
                                   std::uint64_t seed);
OfflineDataset rollout_transitions(const PointMassEnv& env, const ContinuousPolicy& policy,
                                   std::size_t min_transitions, std::uint64_t seed);

}  // namespace seqcov
