#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqcov/coverage.hpp"
#include "seqcov/detect.hpp"
#include "seqcov/discretize.hpp"
#include "seqcov/envs.hpp"
#include "seqcov/learners.hpp"
#include "seqcov/patterns.hpp"
#include "seqcov/poison.hpp"

namespace seqcov {

/// Stage ids for derive_seed(master, stage).
namespace stage {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kCluster = 2;
inline constexpr std::uint64_t kAccess = 3;
inline constexpr std::uint64_t kAttack = 4;
inline constexpr std::uint64_t kTrain = 5;
inline constexpr std::uint64_t kEval = 6;
inline constexpr std::uint64_t kCoverage = 7;
}  // namespace stage

struct EnvSpec {
  std::string kind = "gridworld";  ///< "gridworld" or "pointmass"
  std::size_t width = 8;
  std::size_t height = 8;
  GridCell start{0, 0};
  GridCell goal{7, 7};
  std::vector<GridCell> traps;
  double slip = 0.1;
  double gamma = 0.95;
  std::size_t max_steps = 100;
  std::string codec = "grid_position";  ///< or "index"
  double jitter = 1.0;
  PointMassEnv pointmass;
};

struct BehaviorSpec {
  double epsilon = 0.3;  ///< mixing weight of uniform (gridworld) or random (pointmass) actions
  double gain = 1.0;
  double damping = 1.5;
};

struct DiscretizationSpec {
  std::string extractor = "concat_standardized";  ///< or "learned_linear"
  std::size_t k = 0;                              ///< 0 selects k with the elbow rule
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  std::size_t rank = 0;
  std::size_t sample_limit = 5000;  ///< elbow subsample; the final fit uses every point
  KMeansOptions kmeans;
};

struct PatternSpec {
  std::size_t l = 5;
  bool dedup = true;
  BudgetUnit budget_unit = BudgetUnit::kTransitions;
};

struct AttackSpec {
  std::vector<AttackKind> kinds{AttackKind::kCsdpc};
  double rho = 0.01;
  double eta = 0.05;
  std::size_t n_candidates = 32;
  double access_fraction = 1.0;
};

struct LearnerSpec {
  std::vector<std::string> kinds{"fqi", "cql_lite", "bc"};
  TrainConfig train;
  std::size_t action_bins = 3;
};

struct EvalSpec {
  std::size_t episodes = kDefaultEvalEpisodes;
  std::vector<std::uint64_t> seeds{0};
};

struct CoverageSpec {
  bool enabled = true;
  std::vector<std::size_t> lengths{1, 2, 3};
  double epsilon = 0.1;
  std::size_t cap = 10'000'000;
};

struct DetectSpec {
  bool enabled = true;
  double threshold_sigma = 3.0;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  EnvSpec env;
  BehaviorSpec behavior;
  std::size_t dataset_size = 100'000;
  DiscretizationSpec discretization;
  PatternSpec patterns;
  AttackSpec attack;
  LearnerSpec learners;
  EvalSpec evaluation;
  CoverageSpec coverage;
  DetectSpec detection;
  std::string out_dir = "runs";
  bool persist = true;

  /// Throws ArgumentError on an out-of-range field.
  void check() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a 64 of the canonical (sorted-key) JSON form, as 16 hex digits. `out_dir` and `persist` are excluded.
std::string config_hash(const ExperimentConfig& config);

/// A pipeline stage failed; `stage()` names it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// --- building blocks shared with the CLI -------------------------------------------------------

Environment make_environment(const ExperimentConfig& config);
LearnerSpace make_space(const Environment& env, const ExperimentConfig& config);
OfflineDataset generate_dataset(const Environment& env, const ExperimentConfig& config);

/// Optimal policy of a tabular environment (greedy in Q*).
TabularPolicy optimal_policy(const TabularMDP& mdp);

struct Discretization {
  FeatureExtractor extractor;
  KMeansModel model;
  std::optional<ElbowResult> elbow;
};

Discretization fit_discretization(const OfflineDataset& dataset, const Environment& env, const ExperimentConfig& config);

/// Trains "fqi", "cql_lite" or "bc".
Agent train_learner(const std::string& kind, const OfflineDataset& dataset, const LearnerSpace& space,
                    const ExperimentConfig& config);

/// Mean ACR over the configured evaluation seeds.
double evaluate_acr(const Agent& agent, const Environment& env, const ExperimentConfig& config);

// --- experiments ---------------------------------------------------------------------------------

struct LearnerResult {
  std::string learner;
  std::string attack;
  double clean_acr = 0.0;
  double poisoned_acr = 0.0;
  std::optional<double> aer;  ///< empty when the clean ACR is 0
};

struct AttackOutcome {
  AttackKind kind = AttackKind::kNone;
  AttackReport report;
  std::optional<CoverageReport> coverage;
  std::optional<DetectionResult> detection;
  std::optional<DetectionResult> detection_clean;  ///< detector on the clean data against an empty mask
};

struct RunResult {
  std::string config_hash;
  std::size_t n_transitions = 0;
  std::size_t k = 0;
  std::optional<ElbowResult> elbow;
  std::size_t distinct_patterns = 0;
  std::size_t rare_patterns = 0;
  std::size_t rare_footprint = 0;
  bool rare_warning = false;
  std::optional<CoverageReport> clean_coverage;
  std::map<std::string, double> clean_acr;
  std::vector<AttackOutcome> attacks;
  std::vector<LearnerResult> rows;
  double wall_seconds = 0.0;
  std::filesystem::path run_dir;
};

/// generate -> discretize -> patterns -> coverage -> attack -> train -> evaluate -> detect.
/// With `persist`, every artifact is written under out_dir/<config hash>/.
RunResult run_experiment(const ExperimentConfig& config);

/// Result JSON without wall-clock fields.
nlohmann::json to_json(const RunResult& result);

enum class SweepAxis { kRho, kEta, kL, kK, kAccessFraction, kDedup, kAttackKind };

std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& text);

/// Copy of `base` with `axis` set to `value`.
ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, const nlohmann::json& value);

struct SweepRow {
  nlohmann::json value;
  RunResult result;
};

struct SweepFailure {
  nlohmann::json value;
  std::string error;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::kRho;
  std::vector<SweepRow> rows;
  std::vector<SweepFailure> failures;
};

/// One run per value, continuing past failing values.
SweepResult sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<nlohmann::json>& values);

/// One row per successful value.
std::string to_csv(const SweepResult& sweep);
nlohmann::json to_json(const SweepResult& sweep);

}  // namespace seqcov
