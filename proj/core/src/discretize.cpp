#include "seqcov/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "seqcov/errors.hpp"
#include "seqcov/learners.hpp"
#include "seqcov/rng.hpp"

namespace seqcov {

using nlohmann::json;

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

}  // namespace

PointSet PointSet::from_rows(const std::vector<std::vector<double>>& rows) {
  PointSet p;
  p.rows = rows.size();
  p.cols = rows.empty() ? 0 : rows.front().size();
  p.data.reserve(p.rows * p.cols);
  for (const auto& r : rows) {
    if (r.size() != p.cols) throw ArgumentError("ragged point set");
    p.data.insert(p.data.end(), r.begin(), r.end());
  }
  return p;
}

// --- feature extraction -----------------------------------------------------------

std::vector<double> FeatureExtractor::extract_row(std::span<const double> x) const {
  if (x.size() != input_dim()) throw ArgumentError("feature input dimension mismatch");
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - means[i]) / scales[i];
  if (kind == ExtractorKind::kConcatStandardized) return z;
  std::vector<double> f(rank, 0.0);
  for (std::size_t r = 0; r < rank; ++r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) acc += projection[r * z.size() + i] * z[i];
    f[r] = acc;
  }
  return f;
}

std::vector<double> FeatureExtractor::extract(std::span<const double> state, std::span<const double> action) const {
  std::vector<double> x(state.begin(), state.end());
  x.insert(x.end(), action.begin(), action.end());
  return extract_row(x);
}

PointSet FeatureExtractor::extract_all(const OfflineDataset& dataset) const {
  PointSet out(dataset.transition_count(), output_dim());
  std::size_t i = 0;
  for (const auto& traj : dataset.trajectories) {
    for (const auto& x : traj.transitions) {
      const auto f = extract(x.state, x.action);
      std::copy(f.begin(), f.end(), out.row(i++).begin());
    }
  }
  return out;
}

FeatureExtractor fit_standardizer(const PointSet& rows) {
  if (rows.rows == 0 || rows.cols == 0) throw ArgumentError("cannot standardize an empty point set");
  FeatureExtractor e;
  e.means.assign(rows.cols, 0.0);
  e.scales.assign(rows.cols, 1.0);
  const double n = static_cast<double>(rows.rows);
  for (std::size_t i = 0; i < rows.rows; ++i)
    for (std::size_t j = 0; j < rows.cols; ++j) e.means[j] += rows.row(i)[j];
  for (auto& m : e.means) m /= n;
  std::vector<double> var(rows.cols, 0.0);
  for (std::size_t i = 0; i < rows.rows; ++i) {
    for (std::size_t j = 0; j < rows.cols; ++j) {
      const double d = rows.row(i)[j] - e.means[j];
      var[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < rows.cols; ++j) {
    const double sd = std::sqrt(var[j] / n);
    e.scales[j] = sd > 1e-12 ? sd : 1.0;
  }
  return e;
}

FeatureExtractor fit_standardizer(const OfflineDataset& dataset) {
  return fit_standardizer(PointSet::from_rows(state_action_rows(dataset)));
}

FeatureExtractor fit_learned_linear(const OfflineDataset& dataset, const QFunction& q, std::size_t rank) {
  q.require_trained();
  const PointSet raw = PointSet::from_rows(state_action_rows(dataset));
  FeatureExtractor e = fit_standardizer(raw);
  e.kind = ExtractorKind::kLearnedLinear;
  const std::size_t d = e.input_dim();

  if (!q.input_layer.empty()) {
    if (q.input_layer_rows == 0 || q.input_layer.size() != q.input_layer_rows * d)
      throw ArgumentError("value model input layer does not match the (s, a) dimension");
    if (rank != 0 && rank != q.input_layer_rows) throw ArgumentError("rank differs from the input layer's row count");
    e.rank = q.input_layer_rows;
    e.projection = q.input_layer;
    return e;
  }

  // Linear surrogate of the value model: Q(s, .) ~ B z + c over the dataset.
  const auto n = static_cast<Eigen::Index>(raw.rows);
  const auto cols = static_cast<Eigen::Index>(d + 1);
  Eigen::MatrixXd z(n, cols);
  std::size_t n_out = 0;
  std::vector<std::vector<double>> targets;
  targets.reserve(raw.rows);
  std::size_t i = 0;
  for (const auto& traj : dataset.trajectories) {
    for (const auto& x : traj.transitions) {
      const auto row = raw.row(i);
      for (std::size_t j = 0; j < d; ++j)
        z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (row[j] - e.means[j]) / e.scales[j];
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = 1.0;
      targets.push_back(q.values(x.state));
      n_out = targets.back().size();
      ++i;
    }
  }
  Eigen::MatrixXd y(n, static_cast<Eigen::Index>(n_out));
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < y.cols(); ++c) y(r, c) = targets[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];

  Eigen::MatrixXd gram = z.transpose() * z;
  gram.diagonal().array() += 1e-9;
  const Eigen::MatrixXd coef = gram.ldlt().solve(z.transpose() * y);  // (d+1) x |A|
  const Eigen::MatrixXd b = coef.topRows(static_cast<Eigen::Index>(d)).transpose();  // |A| x d

  const std::size_t full = std::min(n_out, d);
  if (rank == 0) rank = full;
  if (rank > full) throw ArgumentError("projection rank exceeds min(|A|, input_dim)");
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinV);
  e.rank = rank;
  e.projection.assign(rank * d, 0.0);
  for (std::size_t r = 0; r < rank; ++r) {
    const double sigma = svd.singularValues()(static_cast<Eigen::Index>(r));
    // Sign convention: largest-magnitude component positive, for reproducible output.
    const auto v = svd.matrixV().col(static_cast<Eigen::Index>(r));
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    const double sign = v(arg) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) e.projection[r * d + j] = sign * sigma * v(static_cast<Eigen::Index>(j));
  }
  return e;
}

// --- k-means ------------------------------------------------------------------------

std::size_t KMeansModel::nearest(std::span<const double> point) const {
  if (point.size() != dim) throw ArgumentError("point dimension does not match the centroids");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    const double d = sq_dist(point, centroid(j));
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

namespace {

std::vector<double> plus_plus_seed(const PointSet& points, std::size_t k, Rng& rng,
                                   std::vector<double> centroids = {}) {
  const std::size_t dim = points.cols;
  std::vector<double> d2(points.rows, std::numeric_limits<double>::infinity());
  if (centroids.empty()) {
    const auto first = points.row(rng.index(points.rows));
    centroids.assign(first.begin(), first.end());
  }
  std::size_t have = centroids.size() / dim;
  for (std::size_t c = 0; c < have; ++c) {
    const std::span<const double> cen(centroids.data() + c * dim, dim);
    for (std::size_t i = 0; i < points.rows; ++i) d2[i] = std::min(d2[i], sq_dist(points.row(i), cen));
  }
  while (have < k) {
    const std::size_t pick = rng.categorical(d2);  // uniform fallback when every d2 is 0
    const auto p = points.row(pick);
    centroids.insert(centroids.end(), p.begin(), p.end());
    for (std::size_t i = 0; i < points.rows; ++i) d2[i] = std::min(d2[i], sq_dist(points.row(i), p));
    ++have;
  }
  return centroids;
}

}  // namespace

KMeansModel fit_kmeans_from(const PointSet& points, std::vector<double> initial, std::size_t k, std::uint64_t seed,
                            const KMeansOptions& options) {
  if (k < 2) throw ArgumentError("k must be >= 2");
  if (points.rows < k) throw ArgumentError("fewer points than clusters");
  const std::size_t dim = points.cols;
  if (initial.size() != k * dim) throw ArgumentError("initial centroids have the wrong shape");

  KMeansModel m;
  m.k = k;
  m.dim = dim;
  m.seed = seed;
  m.centroids = std::move(initial);

  std::vector<std::size_t> assign(points.rows, 0);
  std::vector<double> dist(points.rows, 0.0);
  auto assign_all = [&] {
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i) {
      const auto p = points.row(i);
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        const double d = sq_dist(p, m.centroid(j));
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      assign[i] = best;
      dist[i] = best_d;
      inertia += best_d;
    }
    return inertia;
  };

  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it < options.max_iters; ++it) {
    m.inertia_history.push_back(assign_all());
    ++m.iterations;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < points.rows; ++i) {
      const auto p = points.row(i);
      for (std::size_t c = 0; c < dim; ++c) sums[assign[i] * dim + c] += p[c];
      ++counts[assign[i]];
    }
    std::vector<double> next(k * dim);
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t c = 0; c < dim; ++c) {
        next[j * dim + c] = counts[j] ? sums[j * dim + c] / static_cast<double>(counts[j]) : m.centroids[j * dim + c];
      }
    }
    // Empty clusters are reseeded at the point farthest from its (updated) centroid.
    std::vector<char> taken(points.rows, 0);
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.rows; ++i) {
        if (taken[i]) continue;
        const std::span<const double> own(next.data() + assign[i] * dim, dim);
        const double d = sq_dist(points.row(i), own);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      taken[far] = 1;
      const auto p = points.row(far);
      std::copy(p.begin(), p.end(), next.begin() + static_cast<std::ptrdiff_t>(j * dim));
      ++m.repairs;
    }

    double shift = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      shift = std::max(shift, std::sqrt(sq_dist({next.data() + j * dim, dim}, m.centroid(j))));
    }
    m.centroids = std::move(next);
    if (shift < options.tol) break;
  }
  m.inertia = assign_all();
  m.inertia_history.push_back(m.inertia);
  return m;
}

KMeansModel fit_kmeans(const PointSet& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  if (k < 2) throw ArgumentError("k must be >= 2");
  if (points.rows < k) throw ArgumentError("fewer points than clusters");
  Rng rng(seed);
  return fit_kmeans_from(points, plus_plus_seed(points, k, rng), k, seed, options);
}

ElbowResult elbow_select_k(const PointSet& all_points, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                           const KMeansOptions& options, std::size_t sample_limit) {
  if (k_min < 2) throw ArgumentError("k_min must be >= 2");
  if (k_max < k_min + 2) throw ArgumentError("k_max must be >= k_min + 2");

  PointSet sampled;
  const PointSet* points = &all_points;
  Rng rng(seed);
  if (sample_limit > 0 && all_points.rows > sample_limit) {
    std::vector<std::size_t> idx(all_points.rows);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < sample_limit; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
    idx.resize(sample_limit);
    std::sort(idx.begin(), idx.end());
    sampled = PointSet(sample_limit, all_points.cols);
    for (std::size_t i = 0; i < sample_limit; ++i) {
      const auto r = all_points.row(idx[i]);
      std::copy(r.begin(), r.end(), sampled.row(i).begin());
    }
    points = &sampled;
  }

  ElbowResult out;
  std::vector<double> centroids;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    auto init = plus_plus_seed(*points, k, rng, centroids);
    auto model = fit_kmeans_from(*points, std::move(init), k, seed, options);
    out.ks.push_back(k);
    out.inertias.push_back(model.inertia);
    centroids = std::move(model.centroids);
  }
  out.curvature.assign(out.ks.size(), std::numeric_limits<double>::quiet_NaN());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < out.ks.size(); ++i) {
    out.curvature[i] = out.inertias[i - 1] - 2.0 * out.inertias[i] + out.inertias[i + 1];
    if (out.curvature[i] > best) {
      best = out.curvature[i];
      out.k = out.ks[i];
    }
  }
  return out;
}

UnitSequence assign_units(const OfflineDataset& dataset, const FeatureExtractor& extractor, const KMeansModel& model) {
  if (extractor.output_dim() != model.dim) throw ArgumentError("extractor output dimension differs from the centroids");
  UnitSequence u;
  u.k = model.k;
  u.offsets = dataset.offsets();
  u.labels.reserve(dataset.transition_count());
  for (const auto& traj : dataset.trajectories) {
    for (const auto& x : traj.transitions) {
      u.labels.push_back(static_cast<std::uint32_t>(model.nearest(extractor.extract(x.state, x.action))));
    }
  }
  return u;
}

// --- serialization -------------------------------------------------------------------

json to_json(const FeatureExtractor& e) {
  return {{"kind", e.kind == ExtractorKind::kConcatStandardized ? "concat_standardized" : "learned_linear"},
          {"means", e.means},
          {"scales", e.scales},
          {"rank", e.rank},
          {"projection", e.projection}};
}

FeatureExtractor extractor_from_json(const json& j) {
  FeatureExtractor e;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "concat_standardized") {
    e.kind = ExtractorKind::kConcatStandardized;
  } else if (kind == "learned_linear") {
    e.kind = ExtractorKind::kLearnedLinear;
  } else {
    throw ArgumentError("unknown extractor kind '" + kind + "'");
  }
  e.means = j.at("means").get<std::vector<double>>();
  e.scales = j.at("scales").get<std::vector<double>>();
  e.rank = j.value("rank", std::size_t{0});
  e.projection = j.value("projection", std::vector<double>{});
  if (e.scales.size() != e.means.size()) throw ArgumentError("extractor means/scales differ in size");
  if (e.kind == ExtractorKind::kLearnedLinear && e.projection.size() != e.rank * e.means.size())
    throw ArgumentError("extractor projection has the wrong shape");
  return e;
}

json to_json(const KMeansModel& m) {
  json cents = json::array();
  for (std::size_t j = 0; j < m.k; ++j) {
    const auto c = m.centroid(j);
    cents.push_back(std::vector<double>(c.begin(), c.end()));
  }
  return {{"k", m.k},          {"dim", m.dim},           {"seed", m.seed},
          {"inertia", m.inertia}, {"iterations", m.iterations}, {"repairs", m.repairs},
          {"centroids", cents}};
}

KMeansModel kmeans_from_json(const json& j) {
  KMeansModel m;
  m.k = j.at("k").get<std::size_t>();
  m.dim = j.at("dim").get<std::size_t>();
  m.seed = j.value("seed", std::uint64_t{0});
  m.inertia = j.value("inertia", 0.0);
  m.iterations = j.value("iterations", std::size_t{0});
  m.repairs = j.value("repairs", std::size_t{0});
  const auto& cents = j.at("centroids");
  if (cents.size() != m.k) throw ArgumentError("centroid count differs from k");
  for (const auto& c : cents) {
    const auto v = c.get<std::vector<double>>();
    if (v.size() != m.dim) throw ArgumentError("centroid dimension differs from dim");
    m.centroids.insert(m.centroids.end(), v.begin(), v.end());
  }
  return m;
}

json to_json(const UnitSequence& u) { return {{"k", u.k}, {"offsets", u.offsets}, {"labels", u.labels}}; }

UnitSequence units_from_json(const json& j) {
  UnitSequence u;
  u.k = j.at("k").get<std::size_t>();
  u.offsets = j.at("offsets").get<std::vector<std::size_t>>();
  u.labels = j.at("labels").get<std::vector<std::uint32_t>>();
  if (u.offsets.empty() || u.offsets.back() != u.labels.size()) throw ArgumentError("unit offsets do not match labels");
  return u;
}

}  // namespace seqcov
