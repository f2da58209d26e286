#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqcov/distributions.hpp"
#include "seqcov/envs.hpp"
#include "seqcov/patterns.hpp"

namespace seqcov {

struct SingleStepCoverage {
  double c = 0.0;               ///< max over the support of d(s,a) / mu(s,a)
  double uncovered_mass = 0.0;  ///< d mass on pairs with mu = 0
  std::size_t argmax_state = 0;
  std::size_t argmax_action = 0;
};

SingleStepCoverage single_step_concentrability(const OccupancyDist& d, const EmpiricalDist& mu);

/// Behavior side of a sequence ratio: mu(a | s), the states a sequence may
/// start from, and the states where mu is defined at all.
struct ConditionalBehavior {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> probs;          ///< mu(a | s), [s * A + a]; rows of unsupported states are 0
  std::vector<double> start_weights;  ///< > 0 where a sequence may begin
  std::vector<char> support;

  double prob(std::size_t s, std::size_t a) const { return probs[s * n_actions + a]; }
  std::span<const double> row_span(std::size_t s) const { return {probs.data() + s * n_actions, n_actions}; }

  /// Behavior policy in the MDP: support = non-terminal states reachable from
  /// the initial distribution; start weights = state occupancy.
  static ConditionalBehavior from_policy(const TabularMDP& mdp, const TabularPolicy& behavior);
  /// Dataset estimate: empirical conditional action frequencies (no
  /// smoothing) over visited states; start weights = visit counts.
  static ConditionalBehavior from_dataset(const OfflineDataset& dataset, const TabularMDP& mdp);
};

struct RatioBound {
  double value = 0.0;     ///< C_a = max pi(a|s) / mu(a|s) over supported (s, a)
  bool infinite = false;  ///< pi puts mass where mu(a|s) = 0
};

RatioBound per_step_ratio_bound(const TabularPolicy& target, const ConditionalBehavior& behavior);

enum class SequenceMethod { kExact, kMonteCarlo };

struct SequenceOptions {
  std::size_t cap = 10'000'000;  ///< largest admissible sequence count for exact enumeration
  SequenceMethod method = SequenceMethod::kExact;
  std::size_t samples = 100'000;  ///< Monte Carlo only
  std::uint64_t seed = 0;
};

struct SequenceCoverage {
  double value = 0.0;
  SequenceMethod method = SequenceMethod::kExact;
  std::size_t sequences = 0;  ///< admissible sequences (exact) or samples drawn (Monte Carlo)
  std::vector<std::size_t> argmax_states;
  std::vector<std::size_t> argmax_actions;
};

/// Number of length-l sequences with mu(tau) > 0 (saturates at SIZE_MAX).
std::size_t count_sequences(const TabularMDP& mdp, const ConditionalBehavior& behavior, std::size_t l);

/// C_tau = sup over sequences with mu(tau) > 0 of prod_t pi(a_t|s_t) / mu(a_t|s_t).
///
/// A sequence (s_1, a_1, ..., s_l, a_l) is admissible when s_1 has a positive
/// start weight, every s_t is supported and non-terminal, mu(a_t|s_t) > 0 and
/// P(s_{t+1} | s_t, a_t) > 0. Transition terms cancel. Exact mode throws
/// ResourceError when more than `cap` sequences would be enumerated.
SequenceCoverage sequence_concentrability(const TabularMDP& mdp, const TabularPolicy& target,
                                          const ConditionalBehavior& behavior, std::size_t l,
                                          const SequenceOptions& options = {});

struct QErrorBounds {
  double single = 0.0;    ///< 2 R C eps / (1 - gamma)
  double sequence = 0.0;  ///< 2 R C_tau eps / (1 - gamma)
  double cap = 0.0;       ///< 2 R C_a^l eps / (1 - gamma)
};

QErrorBounds q_error_bounds(double r_max, double c, double c_tau, double c_a, std::size_t l, double gamma,
                            double epsilon);

struct SequenceEntry {
  std::size_t l = 0;
  double c_tau = 0.0;
  double c_a_pow_l = 0.0;
  SequenceMethod method = SequenceMethod::kExact;
  std::size_t sequences = 0;
  QErrorBounds bounds;
};

struct CoverageReport {
  std::string kind = "exact";  ///< "exact" (tabular) or "proxy" (continuous)
  double c = 0.0;
  double uncovered_mass = 0.0;
  RatioBound c_a;
  double r_max = 0.0;
  double epsilon = 0.0;
  double gamma = 0.0;
  std::vector<SequenceEntry> sequence;

  // proxy only
  std::size_t l = 0;
  std::size_t distinct_patterns = 0;
  std::size_t min_frequency = 0;
  std::map<std::size_t, std::size_t> histogram;  ///< occurrence count -> number of patterns
};

/// Tabular report of a target policy against a dataset's behavior.
CoverageReport coverage_report(const TabularMDP& mdp, const TabularPolicy& target, const OfflineDataset& dataset,
                               const std::vector<std::size_t>& lengths, double epsilon,
                               const SequenceOptions& options = {});

/// Continuous stand-in: frequency statistics of the decision patterns.
CoverageReport coverage_proxy(const PatternIndex& index);

std::string to_string(SequenceMethod m);
nlohmann::json to_json(const CoverageReport& report);
/// `l,c_tau,c_a_pow_l,method` rows.
std::string to_csv(const CoverageReport& report);

}  // namespace seqcov
