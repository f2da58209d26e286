#include "seqcov/detect.hpp"

#include <algorithm>
#include <cmath>

#include "seqcov/errors.hpp"

namespace seqcov {

CleanStats clean_stats(const OfflineDataset& reference) {
  const auto rows = state_action_rows(reference);
  if (rows.empty()) throw ArgumentError("reference dataset is empty");
  const std::size_t d = rows.front().size();
  CleanStats st;
  st.means.assign(d, 0.0);
  st.stds.assign(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) st.means[j] += r[j];
  for (auto& m : st.means) m /= static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) st.stds[j] += (r[j] - st.means[j]) * (r[j] - st.means[j]);
  for (auto& s : st.stds) s = std::sqrt(s / static_cast<double>(rows.size()));
  return st;
}

DetectionResult detect_anomalies(const CleanStats& stats, const OfflineDataset& dataset, double threshold_sigma,
                                 std::span<const std::size_t> mask) {
  if (!(threshold_sigma >= 0.0)) throw ArgumentError("threshold must be >= 0");
  if (stats.means.size() != stats.stds.size()) throw ArgumentError("clean statistics are malformed");
  DetectionResult out;
  std::vector<char> active(stats.stds.size(), 1);
  for (std::size_t j = 0; j < stats.stds.size(); ++j) {
    if (stats.stds[j] > 1e-12) continue;
    active[j] = 0;
    out.skipped_dimensions.push_back(j);
    out.warnings.push_back("dimension " + std::to_string(j) + " has zero variance and is skipped");
  }

  std::size_t flat = 0;
  for (const auto& traj : dataset.trajectories) {
    for (const auto& x : traj.transitions) {
      if (x.state.size() + x.action.size() != stats.means.size())
        throw ArgumentError("transition dimension does not match the clean statistics");
      bool hit = false;
      for (std::size_t j = 0; j < stats.means.size() && !hit; ++j) {
        if (!active[j]) continue;
        const double v = j < x.state.size() ? x.state[j] : x.action[j - x.state.size()];
        hit = std::abs(v - stats.means[j]) / stats.stds[j] >= threshold_sigma;
      }
      if (hit) out.flagged.push_back(flat);
      ++flat;
    }
  }

  out.positives = mask.size();
  std::size_t i = 0, j = 0;
  while (i < out.flagged.size() && j < mask.size()) {
    if (out.flagged[i] == mask[j]) {
      ++out.true_positives;
      ++i;
      ++j;
    } else if (out.flagged[i] < mask[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  out.precision = out.flagged.empty() ? 0.0
                                      : static_cast<double>(out.true_positives) / static_cast<double>(out.flagged.size());
  out.zero_positives = mask.empty();
  out.recall = mask.empty() ? 0.0 : static_cast<double>(out.true_positives) / static_cast<double>(mask.size());
  const double s = out.precision + out.recall;
  out.f1 = s > 0.0 ? 2.0 * out.precision * out.recall / s : 0.0;
  return out;
}

nlohmann::json to_json(const DetectionResult& r, bool with_flags) {
  nlohmann::json j = {{"flagged_count", r.flagged.size()},
                      {"true_positives", r.true_positives},
                      {"positives", r.positives},
                      {"precision", r.precision},
                      {"recall", r.recall},
                      {"f1", r.f1},
                      {"zero_positives", r.zero_positives},
                      {"skipped_dimensions", r.skipped_dimensions},
                      {"warnings", r.warnings}};
  if (with_flags) j["flagged"] = r.flagged;
  return j;
}

}  // namespace seqcov
