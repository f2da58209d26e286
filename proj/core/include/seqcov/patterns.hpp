#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqcov/discretize.hpp"

namespace seqcov {

using Label = std::uint32_t;

/// Label sequence of a window, with consecutive repeats merged when built with dedup.
struct DecisionPattern {
  std::vector<Label> labels;

  auto operator<=>(const DecisionPattern&) const = default;
  bool operator==(const DecisionPattern&) const = default;
};

/// "1-2-3" form used in CSV/JSON output.
std::string to_string(const DecisionPattern& p);
DecisionPattern parse_pattern(const std::string& text);

DecisionPattern pattern_of(std::span<const Label> labels, bool dedup);

/// Stride-1 window of `length` units inside one trajectory.
struct Window {
  std::size_t trajectory = 0;
  std::size_t start = 0;       ///< step offset inside the trajectory
  std::size_t length = 0;
  std::size_t flat_start = 0;  ///< flat transition index of the first step

  auto operator<=>(const Window&) const = default;
  bool operator==(const Window&) const = default;
};

struct PatternEntry {
  std::size_t count = 0;
  std::vector<Window> windows;
};

struct PatternIndex {
  std::size_t l = 0;
  bool dedup = true;
  std::size_t total_windows = 0;
  std::map<DecisionPattern, PatternEntry> patterns;

  /// O(p); 0 for unseen patterns.
  std::size_t count(const DecisionPattern& p) const;
  std::size_t distinct() const { return patterns.size(); }
};

/// Enumerates every stride-1 window of length l inside each trajectory.
/// Trajectories shorter than l contribute no windows.
PatternIndex extract_patterns(const UnitSequence& units, std::size_t l, bool dedup);

/// How the poisoning budget is measured.
enum class BudgetUnit {
  kTransitions,  ///< distinct transitions covered, <= floor(rho * N)
  kWindows,      ///< windows covered, <= floor(rho * total_windows)
};

struct RareSet {
  std::vector<DecisionPattern> patterns;  ///< ascending count, ties lexicographic
  std::vector<std::size_t> counts;
  std::vector<Window> windows;            ///< covered windows, ascending (trajectory, start)
  std::size_t footprint = 0;              ///< distinct transitions covered
  std::size_t budget = 0;
  BudgetUnit unit = BudgetUnit::kTransitions;
  bool warning = false;                   ///< budget below the rarest pattern's cost

  bool empty() const { return patterns.empty(); }
  /// Sorted distinct flat transition indices covered by the windows.
  std::vector<std::size_t> transitions() const;
};

/// Adds patterns in ascending (count, labels) order while the covered budget
/// stays within floor(rho * N). Selection stops at the first pattern that
/// does not fit, so the result is always a prefix of that order.
RareSet identify_rare(const PatternIndex& index, double rho, std::size_t n_transitions,
                      BudgetUnit unit = BudgetUnit::kTransitions);

/// Distinct flat transitions covered by a set of windows.
std::size_t window_footprint(std::span<const Window> windows);

std::string to_csv(const PatternIndex& index);
nlohmann::json to_json(const PatternIndex& index, bool with_windows = true);
nlohmann::json to_json(const RareSet& rare);
nlohmann::json to_json(const Window& w);

std::string to_string(BudgetUnit unit);
BudgetUnit budget_unit_from_string(const std::string& text);

}  // namespace seqcov
