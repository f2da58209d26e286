#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace seqcov {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;

  bool operator==(const Transition&) const = default;
};

struct Trajectory {
  std::int64_t id = 0;
  std::vector<Transition> transitions;

  bool operator==(const Trajectory&) const = default;
};

struct DatasetMeta {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::size_t max_length = 0;  ///< L: longest admissible trajectory.
  double gamma = 0.99;
  std::string env;
  std::uint64_t seed = 0;

  bool operator==(const DatasetMeta&) const = default;
};

/// Ordered trajectories of (s, a, r, s', terminal) transitions.
///
/// Transitions are also addressed by a flat index in trajectory order; see
/// `offsets()`.
struct OfflineDataset {
  DatasetMeta meta;
  std::vector<Trajectory> trajectories;
  /// Set by poisoning operations. Kept outside `meta` so that poisoning leaves meta untouched.
  bool poisoned = false;

  std::size_t transition_count() const;
  /// Prefix offsets: trajectory i spans flat indices [offsets[i], offsets[i+1]).
  std::vector<std::size_t> offsets() const;
  std::size_t longest_trajectory() const;

  bool operator==(const OfflineDataset&) const = default;
};

/// Flat (trajectory, step) address of a transition.
struct TransitionRef {
  std::size_t trajectory = 0;
  std::size_t step = 0;
};

/// Resolves flat transition indices to (trajectory, step) without copying.
class TransitionLocator {
 public:
  explicit TransitionLocator(const OfflineDataset& dataset);
  TransitionRef locate(std::size_t flat) const;
  std::size_t flat(std::size_t trajectory, std::size_t step) const { return offsets_[trajectory] + step; }
  std::size_t size() const { return offsets_.back(); }
  const std::vector<std::size_t>& offsets() const { return offsets_; }

 private:
  std::vector<std::size_t> offsets_;
};

enum class IssueKind {
  kEmptyDataset,
  kEmptyTrajectory,
  kTooLong,
  kDimensionMismatch,
  kNonFinite,
  kDiscontinuity,
  kTerminalNotLast,
  kIdNotDense,
};

std::string to_string(IssueKind kind);

struct ValidationIssue {
  IssueKind kind;
  std::size_t trajectory = 0;  ///< index into dataset.trajectories
  std::size_t step = 0;
  std::string message;
  /// Informational entries do not make a dataset ill-formed (e.g. next_state
  /// inconsistencies induced by poisoning).
  bool informational = false;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  /// True when there is no non-informational issue.
  bool ok() const;
  std::size_t count(IssueKind kind) const;
};

ValidationReport validate(const OfflineDataset& dataset);

nlohmann::json to_json(const ValidationReport& report);

// --- `.ord` files -----------------------------------------------------------
//
//   ORD 1 {"state_dim":..,"action_dim":..,"max_length":..,"gamma":..,"env":..,"seed":..,"poisoned":..}
//   {"id":0,"s":[[..],..],"a":[[..],..],"r":[..],"s2":[[..],..],"done":[..]}
//   ...
//
// Floats are written with shortest round-trip precision; non-finite values as null.

inline constexpr const char* kOrdTag = "ORD";
inline constexpr int kOrdVersion = 1;

void write_ord(const OfflineDataset& dataset, std::ostream& out);
OfflineDataset read_ord(std::istream& in);
void save(const OfflineDataset& dataset, const std::filesystem::path& path);
OfflineDataset load(const std::filesystem::path& path);

nlohmann::json meta_to_json(const DatasetMeta& meta);

// --- limited data access ----------------------------------------------------

struct AccessWindow {
  std::size_t start = 0;   ///< flat transition index
  std::size_t length = 0;  ///< number of consecutive transitions

  bool operator==(const AccessWindow&) const = default;
};

/// Uniformly random contiguous window of floor(fraction * N) transitions.
AccessWindow restrict_access(const OfflineDataset& dataset, double fraction, std::uint64_t seed);

/// Sub-dataset visible through an access window. Trajectories are cut at the
/// window edges; `global_index[i]` maps slice transition i back to the source.
struct AccessSlice {
  OfflineDataset data;
  std::vector<std::size_t> global_index;
};

AccessSlice slice(const OfflineDataset& dataset, const AccessWindow& window);

/// Writes the (state, action) of every slice transition back into a copy of `base`.
OfflineDataset merge_slice(const OfflineDataset& base, const AccessSlice& poisoned_slice);

/// Flattened (s, a) rows of every transition, in flat order.
std::vector<std::vector<double>> state_action_rows(const OfflineDataset& dataset);

}  // namespace seqcov
