#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqcov/dataset.hpp"
#include "seqcov/discretize.hpp"
#include "seqcov/learners.hpp"
#include "seqcov/patterns.hpp"

namespace seqcov {

struct PerturbationBudget {
  double eta = 0.05;             ///< relative infinity-norm bound, in [0, 1)
  std::size_t n_candidates = 32;  ///< including the unperturbed original
  std::uint64_t seed = 0;

  void check() const;
};

/// Perturbed (s, a) of every step of a window; rewards and next states are never touched.
struct CandidateWindow {
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> actions;
};

/// Adds zeta with |zeta_i| < eta * ||x||_inf, drawn uniformly per coordinate.
/// A zero vector is returned unchanged.
std::vector<double> perturb_vector(std::span<const double> x, double eta, Rng& rng);

/// `n_candidates` perturbed copies of the window's (s, a); candidate 0 is the original.
std::vector<CandidateWindow> gen_candidates(std::span<const Transition> window, const PerturbationBudget& budget);

/// Clustering artifacts of the clean dataset that the attack reuses.
struct AttackContext {
  FeatureExtractor extractor;
  KMeansModel model;
  UnitSequence units;
  PatternIndex index;
};

/// Builds units and the pattern index of `dataset` from a fitted extractor and model.
AttackContext make_context(const OfflineDataset& dataset, FeatureExtractor extractor, KMeansModel model, std::size_t l,
                           bool dedup);

struct CandidateScore {
  DecisionPattern pattern;
  std::size_t count = 0;
};

/// Relabels the candidate with the existing model and looks its pattern up in the index.
CandidateScore evaluate_candidate(const CandidateWindow& candidate, const FeatureExtractor& extractor,
                                  const KMeansModel& model, const PatternIndex& index);

enum class AttackKind { kNone, kCsdpc, kPerturbOnly, kDeleteRare, kRandomTarget, kValueTarget, kDiscreteSteps };

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& text);

struct WindowOutcome {
  Window window;
  DecisionPattern before;
  DecisionPattern after;
  std::size_t candidate = 0;
  double max_ratio = 0.0;  ///< largest ||delta||_inf / ||x||_inf written for this window
};

struct PatternCount {
  DecisionPattern pattern;
  std::size_t before = 0;
  std::size_t after = 0;
};

struct AttackReport {
  AttackKind kind = AttackKind::kNone;
  std::size_t clean_transitions = 0;
  std::size_t result_transitions = 0;
  std::size_t poisoned_transitions = 0;  ///< changed (or, for deletion, removed) transitions
  double poisoned_fraction = 0.0;
  std::vector<std::size_t> poisoned_mask;  ///< sorted flat indices of changed transitions (clean numbering)
  std::vector<WindowOutcome> windows;
  std::vector<PatternCount> rare;
  std::size_t rare_before = 0;
  std::size_t rare_after = 0;
  std::size_t distinct_before = 0;
  std::size_t distinct_after = 0;
  double max_perturbation_ratio = 0.0;
  bool warning = false;
  std::string message;
  nlohmann::json config;
};

struct AttackResult {
  OfflineDataset dataset;
  AttackReport report;
};

/// Rewrites every rare-set window with the candidate whose pattern is most
/// frequent in the clean index. Ties prefer a pattern different from the
/// window's current one, then a perturbed candidate over the original, then
/// the smallest candidate index. Windows are
/// processed in flat order and a transition is written at most once.
AttackResult csdpc_attack(const OfflineDataset& dataset, const AttackContext& context, const RareSet& rare,
                          const PerturbationBudget& budget);

/// Comparison attacks on the same footprint. `q` is required by kValueTarget only.
AttackResult baseline_attack(const OfflineDataset& dataset, AttackKind kind, const AttackContext& context,
                             const RareSet& rare, const PerturbationBudget& budget, const QFunction* q = nullptr);

/// Dispatches to csdpc_attack, baseline_attack, or the identity (kNone).
AttackResult run_attack(const OfflineDataset& dataset, AttackKind kind, const AttackContext& context,
                        const RareSet& rare, const PerturbationBudget& budget, const QFunction* q = nullptr);

struct StealthCheck {
  std::size_t checked = 0;
  std::size_t changed = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;
};

/// Exhaustive per-transition check of the relative bound. The datasets must have the same shape.
StealthCheck check_stealth(const OfflineDataset& clean, const OfflineDataset& poisoned, double eta);

nlohmann::json to_json(const PerturbationBudget& budget);
nlohmann::json to_json(const AttackReport& report);
/// `window,before,after,candidate,max_ratio` rows.
std::string windows_csv(const AttackReport& report);

}  // namespace seqcov
