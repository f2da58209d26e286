#include "seqcov/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Dense>

#include "seqcov/errors.hpp"
#include "seqcov/rng.hpp"

namespace seqcov {

using nlohmann::json;

TabularSpace space_of(const TabularMDP& mdp) { return {mdp.n_states, mdp.n_actions, mdp.codec}; }

ContinuousSpace space_of(const PointMassEnv& env, std::size_t bins_per_dim) {
  ContinuousSpace c;
  c.action_low = {-env.max_accel, -env.max_accel};
  c.action_high = {env.max_accel, env.max_accel};
  c.bins_per_dim = bins_per_dim;
  return c;
}

json to_json(const TrainConfig& c) {
  json j = {{"iterations", c.iterations}, {"learning_rate", c.learning_rate}, {"alpha", c.alpha},
            {"seed", c.seed},             {"tol", c.tol},                     {"ridge", c.ridge}};
  j["gamma"] = c.gamma ? json(*c.gamma) : json(nullptr);
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.iterations = j.value("iterations", c.iterations);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.alpha = j.value("alpha", c.alpha);
  c.seed = j.value("seed", c.seed);
  c.tol = j.value("tol", c.tol);
  c.ridge = j.value("ridge", c.ridge);
  if (j.contains("gamma") && !j.at("gamma").is_null()) c.gamma = j.at("gamma").get<double>();
  return c;
}

// --- feature map and Q evaluation ------------------------------------------------

std::vector<double> FeatureMap::operator()(std::span<const double> state) const {
  if (state.size() != state_dim()) throw ArgumentError("state dimension does not match the feature map");
  const std::size_t d = state_dim();
  std::vector<double> z(d);
  for (std::size_t i = 0; i < d; ++i) z[i] = (state[i] - means[i]) / scales[i];
  std::vector<double> f;
  f.reserve(dim());
  f.push_back(1.0);
  f.insert(f.end(), z.begin(), z.end());
  const double inv = 1.0 / (2.0 * width * width);
  for (std::size_t c = 0; c < n_centers(); ++c) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double t = z[i] - centers[c * d + i];
      d2 += t * t;
    }
    f.push_back(std::exp(-d2 * inv));
  }
  return f;
}

void QFunction::require_trained() const {
  if (!trained) throw StateError("value model is not trained");
}

std::vector<double> QFunction::values(std::span<const double> state) const {
  require_trained();
  if (kind == QKind::kTabular) {
    const std::size_t s = codec.decode(state);
    return {table.begin() + static_cast<std::ptrdiff_t>(s * n_actions),
            table.begin() + static_cast<std::ptrdiff_t>((s + 1) * n_actions)};
  }
  const auto phi = features(state);
  std::vector<double> v(n_actions, 0.0);
  for (std::size_t a = 0; a < n_actions; ++a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) acc += weights[a * phi.size() + i] * phi[i];
    v[a] = acc;
  }
  return v;
}

namespace {

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < v.size(); ++a)
    if (v[a] > v[best]) best = a;
  return best;
}

std::size_t nearest_bin(const std::vector<std::vector<double>>& bins, std::span<const double> action) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (bins[b].size() != action.size()) throw ArgumentError("action dimension does not match the action bins");
    double d = 0.0;
    for (std::size_t i = 0; i < action.size(); ++i) d += (bins[b][i] - action[i]) * (bins[b][i] - action[i]);
    if (d < best_d) {
      best_d = d;
      best = b;
    }
  }
  return best;
}

}  // namespace

std::size_t QFunction::greedy(std::span<const double> state) const { return argmax_lowest(values(state)); }

std::size_t QFunction::decode_action(std::span<const double> action) const {
  if (kind == QKind::kTabular) return seqcov::decode_action(action, n_actions);
  return nearest_bin(action_bins, action);
}

double QFunction::q(std::span<const double> state, std::span<const double> action) const {
  return values(state)[decode_action(action)];
}

std::vector<double> QFunction::action_vector(std::size_t a) const {
  if (a >= n_actions) throw ArgumentError("action index out of range");
  if (kind == QKind::kTabular) return {static_cast<double>(a)};
  return action_bins[a];
}

// --- training ----------------------------------------------------------------------

namespace {

double resolve_gamma(const OfflineDataset& dataset, const TrainConfig& config) {
  if (dataset.transition_count() == 0) throw ArgumentError("cannot train on an empty dataset");
  if (config.iterations < 1) throw ArgumentError("iterations must be >= 1");
  if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0))
    throw ArgumentError("learning rate must lie in (0, 1]");
  if (config.alpha < 0.0) throw ArgumentError("alpha must be >= 0");
  const double g = dataset.meta.gamma;
  if (config.gamma && std::abs(*config.gamma - g) > 1e-12) throw ArgumentError("gamma differs from the dataset's gamma");
  if (!(g > 0.0 && g < 1.0)) throw ArgumentError("gamma must lie in (0, 1)");
  return g;
}

struct PairStats {
  std::size_t n = 0;
  double reward_sum = 0.0;
  std::map<std::size_t, std::size_t> next;  ///< non-terminal successor counts
};

QFunction train_tabular(const OfflineDataset& dataset, const TabularSpace& space, const TrainConfig& config,
                        bool conservative) {
  const double gamma = resolve_gamma(dataset, config);
  const std::size_t S = space.n_states, A = space.n_actions;
  std::vector<PairStats> stats(S * A);
  for (const auto& traj : dataset.trajectories) {
    for (const auto& x : traj.transitions) {
      const std::size_t s = space.codec.decode(x.state);
      const std::size_t a = seqcov::decode_action(x.action, A);
      auto& st = stats[s * A + a];
      ++st.n;
      st.reward_sum += x.reward;
      if (!x.terminal) ++st.next[space.codec.decode(x.next_state)];
    }
  }
  // Flattened successor lists keep the sweep order fixed.
  struct Pair {
    std::size_t index;
    double mean_reward;
    std::vector<std::pair<std::size_t, double>> next;  ///< (state, probability)
  };
  std::vector<Pair> observed;
  std::vector<char> seen(S * A, 0);
  for (std::size_t i = 0; i < S * A; ++i) {
    const auto& st = stats[i];
    if (st.n == 0) continue;
    seen[i] = 1;
    Pair p{i, st.reward_sum / static_cast<double>(st.n), {}};
    for (const auto& [s2, c] : st.next) p.next.emplace_back(s2, static_cast<double>(c) / static_cast<double>(st.n));
    observed.push_back(std::move(p));
  }

  const double fill = conservative ? 0.0 - config.alpha : 0.0;
  std::vector<double> q(S * A, 0.0);
  for (std::size_t i = 0; i < S * A; ++i)
    if (!seen[i]) q[i] = fill;

  std::vector<double> v(S, 0.0);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    for (std::size_t s = 0; s < S; ++s) v[s] = *std::max_element(q.begin() + s * A, q.begin() + (s + 1) * A);
    double delta = 0.0;
    std::vector<double> next = q;
    for (const auto& p : observed) {
      double target = p.mean_reward;
      for (const auto& [s2, prob] : p.next) target += gamma * prob * v[s2];
      next[p.index] = q[p.index] + config.learning_rate * (target - q[p.index]);
      delta = std::max(delta, std::abs(next[p.index] - q[p.index]));
    }
    q = std::move(next);
    if (delta <= config.tol) break;
  }

  QFunction out;
  out.kind = QKind::kTabular;
  out.trained = true;
  out.config = config;
  out.config.gamma = gamma;
  out.n_states = S;
  out.n_actions = A;
  out.table = std::move(q);
  out.codec = space.codec;
  return out;
}

std::vector<std::vector<double>> make_bins(const ContinuousSpace& space) {
  if (space.action_low.size() != space.action_high.size() || space.action_low.empty())
    throw ArgumentError("action bounds are malformed");
  if (space.bins_per_dim < 2) throw ArgumentError("bins_per_dim must be >= 2");
  const std::size_t d = space.action_low.size();
  std::vector<std::vector<double>> bins{{}};
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<std::vector<double>> grown;
    for (const auto& prefix : bins) {
      for (std::size_t b = 0; b < space.bins_per_dim; ++b) {
        auto v = prefix;
        const double t = static_cast<double>(b) / static_cast<double>(space.bins_per_dim - 1);
        v.push_back(space.action_low[i] + t * (space.action_high[i] - space.action_low[i]));
        grown.push_back(std::move(v));
      }
    }
    bins = std::move(grown);
  }
  return bins;
}

FeatureMap make_feature_map(const OfflineDataset& dataset, const ContinuousSpace& space) {
  const std::size_t d = dataset.meta.state_dim;
  FeatureMap f;
  f.means.assign(d, 0.0);
  f.scales.assign(d, 1.0);
  f.width = space.rbf_width;
  const double n = static_cast<double>(dataset.transition_count());
  for (const auto& t : dataset.trajectories)
    for (const auto& x : t.transitions)
      for (std::size_t i = 0; i < d; ++i) f.means[i] += x.state[i];
  for (auto& m : f.means) m /= n;
  std::vector<double> var(d, 0.0);
  for (const auto& t : dataset.trajectories)
    for (const auto& x : t.transitions)
      for (std::size_t i = 0; i < d; ++i) var[i] += (x.state[i] - f.means[i]) * (x.state[i] - f.means[i]);
  for (std::size_t i = 0; i < d; ++i) {
    const double sd = std::sqrt(var[i] / n);
    f.scales[i] = sd > 1e-12 ? sd : 1.0;
  }
  if (space.rbf_per_dim >= 2) {
    std::vector<double> grid(space.rbf_per_dim);
    for (std::size_t b = 0; b < grid.size(); ++b)
      grid[b] = -1.5 + 3.0 * static_cast<double>(b) / static_cast<double>(grid.size() - 1);
    std::vector<std::vector<double>> pts{{}};
    for (std::size_t i = 0; i < d; ++i) {
      std::vector<std::vector<double>> grown;
      for (const auto& p : pts)
        for (double g : grid) {
          auto v = p;
          v.push_back(g);
          grown.push_back(std::move(v));
        }
      pts = std::move(grown);
    }
    for (const auto& p : pts) f.centers.insert(f.centers.end(), p.begin(), p.end());
  }
  return f;
}

QFunction train_linear(const OfflineDataset& dataset, const ContinuousSpace& space, const TrainConfig& config,
                       bool conservative) {
  const double gamma = resolve_gamma(dataset, config);
  QFunction out;
  out.kind = QKind::kLinear;
  out.config = config;
  out.config.gamma = gamma;
  out.action_bins = make_bins(space);
  out.n_actions = out.action_bins.size();
  out.features = make_feature_map(dataset, space);
  const std::size_t A = out.n_actions, D = out.features.dim();
  const std::size_t N = dataset.transition_count();

  Eigen::MatrixXd phi(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(D));
  Eigen::MatrixXd phi_next(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(D));
  Eigen::VectorXd reward(static_cast<Eigen::Index>(N));
  std::vector<char> terminal(N);
  std::vector<std::vector<Eigen::Index>> rows_of(A);
  Eigen::Index i = 0;
  for (const auto& t : dataset.trajectories) {
    for (const auto& x : t.transitions) {
      const auto f = out.features(x.state);
      const auto f2 = out.features(x.next_state);
      for (std::size_t c = 0; c < D; ++c) {
        phi(i, static_cast<Eigen::Index>(c)) = f[c];
        phi_next(i, static_cast<Eigen::Index>(c)) = f2[c];
      }
      reward(i) = x.reward;
      terminal[static_cast<std::size_t>(i)] = x.terminal;
      rows_of[nearest_bin(out.action_bins, x.action)].push_back(i);
      ++i;
    }
  }

  std::vector<Eigen::LDLT<Eigen::MatrixXd>> solvers(A);
  std::vector<Eigen::MatrixXd> designs(A);
  for (std::size_t a = 0; a < A; ++a) {
    if (rows_of[a].empty()) continue;
    designs[a] = phi(rows_of[a], Eigen::all);
    Eigen::MatrixXd gram = designs[a].transpose() * designs[a];
    gram.diagonal().array() += config.ridge * static_cast<double>(rows_of[a].size());
    solvers[a].compute(gram);
  }

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(A));
  // Heads without data stay constant: 0, or -alpha under the conservative penalty.
  const double fill = conservative ? 0.0 - config.alpha : 0.0;
  for (std::size_t a = 0; a < A; ++a)
    if (rows_of[a].empty()) w(0, static_cast<Eigen::Index>(a)) = fill;

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const Eigen::VectorXd vmax = (phi_next * w).rowwise().maxCoeff();
    Eigen::VectorXd target = reward;
    for (Eigen::Index r = 0; r < target.size(); ++r)
      if (!terminal[static_cast<std::size_t>(r)]) target(r) += gamma * vmax(r);
    double delta = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      if (rows_of[a].empty()) continue;
      const Eigen::VectorXd y = target(rows_of[a]);
      const Eigen::VectorXd fit = solvers[a].solve(designs[a].transpose() * y);
      auto col = w.col(static_cast<Eigen::Index>(a));
      const Eigen::VectorXd next = col + config.learning_rate * (fit - col);
      delta = std::max(delta, (next - col).cwiseAbs().maxCoeff());
      col = next;
    }
    if (delta <= config.tol) break;
  }

  out.weights.resize(A * D);
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t c = 0; c < D; ++c)
      out.weights[a * D + c] = w(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(a));
  out.trained = true;
  return out;
}

QFunction train(const OfflineDataset& dataset, const LearnerSpace& space, const TrainConfig& config,
                bool conservative) {
  if (const auto* t = std::get_if<TabularSpace>(&space)) return train_tabular(dataset, *t, config, conservative);
  return train_linear(dataset, std::get<ContinuousSpace>(space), config, conservative);
}

}  // namespace

QFunction fqi_train(const OfflineDataset& dataset, const LearnerSpace& space, const TrainConfig& config) {
  return train(dataset, space, config, false);
}

QFunction cql_lite_train(const OfflineDataset& dataset, const LearnerSpace& space, const TrainConfig& config) {
  return train(dataset, space, config, true);
}

// --- behavioral cloning ---------------------------------------------------------------

const std::vector<double>& NearestNeighborPolicy::act(std::span<const double> state) const {
  if (actions.empty()) throw StateError("nearest-neighbor policy is empty");
  if (state.size() != state_dim) throw ArgumentError("state dimension does not match the policy");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    double d = 0.0;
    for (std::size_t c = 0; c < state_dim; ++c) {
      const double t = states[i * state_dim + c] - state[c];
      d += t * t;
    }
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return actions[best];
}

BcPolicy bc_train(const OfflineDataset& dataset, const LearnerSpace& space, const TrainConfig& /*config*/) {
  if (dataset.transition_count() == 0) throw ArgumentError("cannot train on an empty dataset");
  if (const auto* t = std::get_if<TabularSpace>(&space)) {
    const std::size_t S = t->n_states, A = t->n_actions;
    std::vector<double> counts(S * A, 0.0);
    for (const auto& traj : dataset.trajectories)
      for (const auto& x : traj.transitions)
        counts[t->codec.decode(x.state) * A + seqcov::decode_action(x.action, A)] += 1.0;
    TabularPolicy pi = TabularPolicy::uniform(S, A);
    for (std::size_t s = 0; s < S; ++s) {
      double n = 0.0;
      for (std::size_t a = 0; a < A; ++a) n += counts[s * A + a];
      if (n == 0.0) continue;
      for (std::size_t a = 0; a < A; ++a) pi.probs[s * A + a] = counts[s * A + a] / n;
    }
    return TabularAgent{std::move(pi), t->codec};
  }
  NearestNeighborPolicy nn;
  nn.state_dim = dataset.meta.state_dim;
  for (const auto& traj : dataset.trajectories) {
    for (const auto& x : traj.transitions) {
      nn.states.insert(nn.states.end(), x.state.begin(), x.state.end());
      nn.actions.push_back(x.action);
    }
  }
  return nn;
}

// --- evaluation ----------------------------------------------------------------------------

namespace {

std::vector<double> choose(const Agent& agent, std::span<const double> obs, Rng& rng) {
  if (const auto* q = std::get_if<QFunction>(&agent)) return q->action_vector(q->greedy(obs));
  const auto& bc = std::get<BcPolicy>(agent);
  if (const auto* t = std::get_if<TabularAgent>(&bc))
    return {static_cast<double>(rng.categorical(t->policy.row(t->codec.decode(obs))))};
  return std::get<NearestNeighborPolicy>(bc).act(obs);
}

void require_ready(const Agent& agent) {
  if (const auto* q = std::get_if<QFunction>(&agent)) q->require_trained();
}

}  // namespace

double evaluate_policy(const Agent& agent, const Environment& env, std::size_t episodes, std::uint64_t seed) {
  if (episodes < 1) throw ArgumentError("episodes must be >= 1");
  require_ready(agent);
  Rng rng(seed);
  double total = 0.0;
  if (const auto* mdp = std::get_if<TabularMDP>(&env)) {
    for (std::size_t e = 0; e < episodes; ++e) {
      std::size_t s = rng.categorical(mdp->initial);
      for (std::size_t t = 0; t < mdp->max_steps; ++t) {
        const auto obs = mdp->codec.encode(s, rng);
        const std::size_t a = decode_action(choose(agent, obs, rng), mdp->n_actions);
        const std::size_t s2 = rng.categorical(mdp->row(s, a));
        total += mdp->realized_reward(s, a, s2);
        if (mdp->is_terminal(s2)) break;
        s = s2;
      }
    }
  } else {
    const auto& pm = std::get<PointMassEnv>(env);
    for (std::size_t e = 0; e < episodes; ++e) {
      auto s = pm.reset(rng);
      for (std::size_t t = 0; t < pm.max_steps; ++t) {
        const auto a = choose(agent, s, rng);
        auto step = pm.step(s, a, rng);
        total += step.reward;
        if (step.terminal) break;
        s = std::move(step.next_state);
      }
    }
  }
  return total / static_cast<double>(episodes);
}

double compute_aer(double clean_acr, double poisoned_acr) {
  if (clean_acr == 0.0 || !std::isfinite(clean_acr)) throw MetricError("AER is undefined for a clean ACR of 0");
  return (clean_acr - poisoned_acr) / clean_acr * 100.0;
}

// --- serialization ----------------------------------------------------------------------------

json to_json(const QFunction& q) {
  json j = {{"kind", q.kind == QKind::kTabular ? "tabular" : "linear"},
            {"trained", q.trained},
            {"config", to_json(q.config)},
            {"n_states", q.n_states},
            {"n_actions", q.n_actions}};
  if (q.kind == QKind::kTabular) {
    j["table"] = q.table;
    j["codec"] = to_json(q.codec);
  } else {
    j["features"] = {{"means", q.features.means},
                     {"scales", q.features.scales},
                     {"centers", q.features.centers},
                     {"width", q.features.width}};
    j["action_bins"] = q.action_bins;
    j["weights"] = q.weights;
  }
  if (!q.input_layer.empty()) {
    j["input_layer"] = q.input_layer;
    j["input_layer_rows"] = q.input_layer_rows;
  }
  return j;
}

QFunction qfunction_from_json(const json& j) {
  QFunction q;
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "tabular" && kind != "linear") throw ArgumentError("unknown value model kind '" + kind + "'");
  q.kind = kind == "tabular" ? QKind::kTabular : QKind::kLinear;
  q.trained = j.value("trained", false);
  if (j.contains("config")) q.config = train_config_from_json(j.at("config"));
  q.n_states = j.value("n_states", std::size_t{0});
  q.n_actions = j.at("n_actions").get<std::size_t>();
  if (q.kind == QKind::kTabular) {
    q.table = j.at("table").get<std::vector<double>>();
    q.codec = codec_from_json(j.at("codec"));
    if (q.table.size() != q.n_states * q.n_actions) throw ArgumentError("Q table has the wrong size");
  } else {
    const auto& f = j.at("features");
    q.features.means = f.at("means").get<std::vector<double>>();
    q.features.scales = f.at("scales").get<std::vector<double>>();
    q.features.centers = f.at("centers").get<std::vector<double>>();
    q.features.width = f.at("width").get<double>();
    q.action_bins = j.at("action_bins").get<std::vector<std::vector<double>>>();
    q.weights = j.at("weights").get<std::vector<double>>();
    if (q.action_bins.size() != q.n_actions || q.weights.size() != q.n_actions * q.features.dim())
      throw ArgumentError("linear value model has inconsistent shapes");
  }
  q.input_layer = j.value("input_layer", std::vector<double>{});
  q.input_layer_rows = j.value("input_layer_rows", std::size_t{0});
  return q;
}

json to_json(const BcPolicy& policy) {
  if (const auto* t = std::get_if<TabularAgent>(&policy))
    return {{"kind", "tabular"}, {"policy", to_json(t->policy)}, {"codec", to_json(t->codec)}};
  const auto& nn = std::get<NearestNeighborPolicy>(policy);
  return {{"kind", "nearest_neighbor"}, {"state_dim", nn.state_dim}, {"states", nn.states}, {"actions", nn.actions}};
}

BcPolicy bc_policy_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "tabular") return TabularAgent{policy_from_json(j.at("policy")), codec_from_json(j.at("codec"))};
  if (kind != "nearest_neighbor") throw ArgumentError("unknown policy kind '" + kind + "'");
  NearestNeighborPolicy nn;
  nn.state_dim = j.at("state_dim").get<std::size_t>();
  nn.states = j.at("states").get<std::vector<double>>();
  nn.actions = j.at("actions").get<std::vector<std::vector<double>>>();
  if (nn.state_dim == 0 || nn.states.size() != nn.actions.size() * nn.state_dim)
    throw ArgumentError("nearest-neighbor policy has inconsistent shapes");
  return nn;
}

}  // namespace seqcov
