#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqcov/dataset.hpp"
#include "seqcov/envs.hpp"

namespace seqcov {

/// Discrete state/action space of a tabular task.
struct TabularSpace {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  StateCodec codec;
};

/// Continuous task: actions are snapped to a grid of `bins_per_dim` values per
/// dimension over [action_low, action_high]; Q is linear in a fixed RBF map
/// of the standardized state.
struct ContinuousSpace {
  std::vector<double> action_low;
  std::vector<double> action_high;
  std::size_t bins_per_dim = 3;
  std::size_t rbf_per_dim = 3;
  double rbf_width = 1.0;
};

using LearnerSpace = std::variant<TabularSpace, ContinuousSpace>;

TabularSpace space_of(const TabularMDP& mdp);
ContinuousSpace space_of(const PointMassEnv& env, std::size_t bins_per_dim = 3);

struct TrainConfig {
  std::size_t iterations = 500;
  double learning_rate = 1.0;  ///< Q <- Q + lr (target - Q); 1 gives plain fitted Q-iteration
  std::optional<double> gamma;  ///< defaults to the dataset's gamma; must match it when set
  double alpha = 0.0;          ///< conservative penalty; ignored by fqi_train
  std::uint64_t seed = 0;
  double tol = 0.0;            ///< early stop when the sup-norm update is <= tol (tabular)
  double ridge = 1e-3;         ///< linear heads only
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Fixed feature map for linear Q heads: [1, z(s), rbf_1(z(s)), ...].
struct FeatureMap {
  std::vector<double> means;
  std::vector<double> scales;
  std::vector<double> centers;  ///< n_centers x state_dim
  double width = 1.0;

  std::size_t state_dim() const { return means.size(); }
  std::size_t n_centers() const { return state_dim() ? centers.size() / state_dim() : 0; }
  std::size_t dim() const { return 1 + state_dim() + n_centers(); }
  std::vector<double> operator()(std::span<const double> state) const;
};

enum class QKind { kTabular, kLinear };

/// Action-value function: a Q[s][a] table, or per-action linear heads over a
/// FeatureMap for continuous tasks.
struct QFunction {
  QKind kind = QKind::kTabular;
  bool trained = false;
  TrainConfig config;

  // tabular
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> table;  ///< [s * A + a]
  StateCodec codec;

  // linear
  FeatureMap features;
  std::vector<std::vector<double>> action_bins;  ///< discrete action vectors
  std::vector<double> weights;                   ///< n_actions x features.dim()

  /// Optional explicit input layer over standardized (s, a); used by fit_learned_linear.
  std::vector<double> input_layer;
  std::size_t input_layer_rows = 0;

  std::vector<double> values(std::span<const double> state) const;
  std::size_t greedy(std::span<const double> state) const;
  double q(std::span<const double> state, std::span<const double> action) const;
  std::size_t decode_action(std::span<const double> action) const;
  std::vector<double> action_vector(std::size_t a) const;
  void require_trained() const;
};

nlohmann::json to_json(const QFunction& q);
QFunction qfunction_from_json(const nlohmann::json& j);

/// Fitted Q-iteration: full-batch Bellman backups over the dataset in fixed
/// transition order. Unobserved (s, a) pairs keep value 0.
QFunction fqi_train(const OfflineDataset& dataset, const LearnerSpace& space, const TrainConfig& config);

/// FQI in which, after every backup, actions never observed at a state are
/// set to -alpha. alpha = 0 reproduces fqi_train bit for bit.
QFunction cql_lite_train(const OfflineDataset& dataset, const LearnerSpace& space, const TrainConfig& config);

struct NearestNeighborPolicy {
  std::size_t state_dim = 0;
  std::vector<double> states;   ///< n x state_dim
  std::vector<std::vector<double>> actions;

  /// Action of the nearest stored state (Euclidean; ties to the earliest).
  const std::vector<double>& act(std::span<const double> state) const;
};

/// Tabular BC keeps the codec so that raw observations can be decoded.
struct TabularAgent {
  TabularPolicy policy;
  StateCodec codec;
};

using BcPolicy = std::variant<TabularAgent, NearestNeighborPolicy>;

/// Behavioral cloning: empirical conditional action frequencies (unseen
/// states uniform) or nearest-neighbor lookup for continuous tasks.
BcPolicy bc_train(const OfflineDataset& dataset, const LearnerSpace& space, const TrainConfig& config);

nlohmann::json to_json(const BcPolicy& policy);
BcPolicy bc_policy_from_json(const nlohmann::json& j);

using Agent = std::variant<QFunction, BcPolicy>;
using Environment = std::variant<TabularMDP, PointMassEnv>;

/// Average cumulative (undiscounted) reward over `episodes` seeded episodes
/// in the true environment. Q agents act greedily; tabular BC samples pi.
double evaluate_policy(const Agent& agent, const Environment& env, std::size_t episodes, std::uint64_t seed);

inline constexpr std::size_t kDefaultEvalEpisodes = 50;

/// Attack effectiveness rate in percent: (clean - poisoned) / clean * 100.
double compute_aer(double clean_acr, double poisoned_acr);

}  // namespace seqcov
