#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqcov/dataset.hpp"

namespace seqcov {

/// Per-coordinate mean and population standard deviation of concatenated (s, a).
struct CleanStats {
  std::vector<double> means;
  std::vector<double> stds;
};

CleanStats clean_stats(const OfflineDataset& reference);

struct DetectionResult {
  std::vector<std::size_t> flagged;  ///< sorted flat indices
  std::size_t true_positives = 0;
  std::size_t positives = 0;         ///< size of the ground-truth mask
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool zero_positives = false;       ///< empty mask: recall is reported as 0
  std::vector<std::size_t> skipped_dimensions;
  std::vector<std::string> warnings;
};

/// Flags transitions with |z| >= threshold_sigma in any coordinate of the
/// (s, a) vector standardized by `stats`, then scores the flags against the
/// ground-truth `mask` (sorted flat indices). Zero-variance coordinates are skipped.
DetectionResult detect_anomalies(const CleanStats& stats, const OfflineDataset& dataset, double threshold_sigma,
                                 std::span<const std::size_t> mask);

nlohmann::json to_json(const DetectionResult& result, bool with_flags = false);

}  // namespace seqcov
