#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqcov/dataset.hpp"

namespace seqcov {

struct QFunction;

/// Dense row-major point set.
struct PointSet {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  PointSet() = default;
  PointSet(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  static PointSet from_rows(const std::vector<std::vector<double>>& rows);

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

enum class ExtractorKind { kConcatStandardized, kLearnedLinear };

/// Maps a raw (s, a) pair to a feature vector f.
///
/// Both kinds z-score the concatenated (s, a) first. kLearnedLinear then
/// applies a `rank x input_dim` projection taken from a trained value model.
/// Zero-variance input dimensions get scale 1.
struct FeatureExtractor {
  ExtractorKind kind = ExtractorKind::kConcatStandardized;
  std::vector<double> means;
  std::vector<double> scales;
  std::size_t rank = 0;
  std::vector<double> projection;  ///< rank x input_dim, row-major

  std::size_t input_dim() const { return means.size(); }
  std::size_t output_dim() const { return kind == ExtractorKind::kLearnedLinear ? rank : means.size(); }
  std::vector<double> extract(std::span<const double> state, std::span<const double> action) const;
  std::vector<double> extract_row(std::span<const double> state_action) const;
  /// Features of every transition of `dataset`, in flat order.
  PointSet extract_all(const OfflineDataset& dataset) const;
};

FeatureExtractor fit_standardizer(const OfflineDataset& dataset);
FeatureExtractor fit_standardizer(const PointSet& rows);

/// Agent-aware extractor: standardized (s, a) projected through the value
/// model's input layer. When the model has no explicit input layer, the
/// layer is the rank-`rank` principal part (SVD) of the least-squares linear
/// map from standardized (s, a) to the model's per-action values. `rank` 0
/// means "full" (min(|A|, input_dim)).
FeatureExtractor fit_learned_linear(const OfflineDataset& dataset, const QFunction& q, std::size_t rank = 0);

struct KMeansModel {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;  ///< k x dim, row-major
  double inertia = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> inertia_history;  ///< inertia after each assignment step
  std::size_t iterations = 0;
  std::size_t repairs = 0;              ///< empty-cluster reseeds

  std::span<const double> centroid(std::size_t j) const { return {centroids.data() + j * dim, dim}; }
  /// Nearest centroid under Euclidean distance; ties go to the lowest index.
  std::size_t nearest(std::span<const double> point) const;
};

struct KMeansOptions {
  std::size_t max_iters = 100;
  double tol = 1e-6;  ///< stop when no centroid moves farther than this
};

/// k-means++ seeding followed by Lloyd iterations.
KMeansModel fit_kmeans(const PointSet& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

/// Lloyd iterations from explicit initial centroids (k x dim, row-major).
KMeansModel fit_kmeans_from(const PointSet& points, std::vector<double> initial_centroids, std::size_t k,
                            std::uint64_t seed, const KMeansOptions& options = {});

struct ElbowResult {
  std::size_t k = 0;
  std::vector<std::size_t> ks;
  std::vector<double> inertias;
  std::vector<double> curvature;  ///< second difference at each interior k, NaN at the ends
};

/// Fits k_min..k_max and picks the k with the largest second difference of
/// the inertia curve (ties to the smaller k). Each k > k_min is warm-started
/// from the previous solution plus one D^2-sampled centroid, so the curve is
/// non-increasing. `sample_limit` > 0 fits on a seeded subsample.
ElbowResult elbow_select_k(const PointSet& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                           const KMeansOptions& options = {}, std::size_t sample_limit = 0);

/// Per-transition decision-unit labels, aligned with flat transition order.
struct UnitSequence {
  std::vector<std::uint32_t> labels;
  std::vector<std::size_t> offsets;  ///< trajectory boundaries, size = trajectories + 1
  std::size_t k = 0;

  std::size_t trajectories() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::span<const std::uint32_t> trajectory(std::size_t i) const {
    return {labels.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
};

UnitSequence assign_units(const OfflineDataset& dataset, const FeatureExtractor& extractor, const KMeansModel& model);

nlohmann::json to_json(const FeatureExtractor& extractor);
FeatureExtractor extractor_from_json(const nlohmann::json& j);
nlohmann::json to_json(const KMeansModel& model);
KMeansModel kmeans_from_json(const nlohmann::json& j);
nlohmann::json to_json(const UnitSequence& units);
UnitSequence units_from_json(const nlohmann::json& j);

}  // namespace seqcov
