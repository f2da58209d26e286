#include "seqcov/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "seqcov/errors.hpp"

namespace seqcov {

using nlohmann::json;

double OccupancyDist::total() const { return std::accumulate(d.begin(), d.end(), 0.0); }

std::size_t EmpiricalDist::state_count(std::size_t s) const {
  std::size_t n = 0;
  for (std::size_t a = 0; a < n_actions; ++a) n += counts[s * n_actions + a];
  return n;
}

std::size_t EmpiricalDist::support_size() const {
  return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
}

// --- codecs -------------------------------------------------------------------

namespace {

bool index_in_range(std::span<const double> v, std::size_t n) {
  if (v.size() != 1 || !std::isfinite(v[0])) return true;  // left to decode's own errors
  const double r = std::round(v[0]);
  return r >= 0.0 && r < static_cast<double>(n);
}

}  // namespace

std::vector<double> StateCodec::encode(std::size_t s, Rng& rng) const {
  if (kind == StateCodecKind::kIndex) return {static_cast<double>(s)};
  const double x = static_cast<double>(s % width), y = static_cast<double>(s / width);
  const double lo = 0.5 * (1.0 - jitter);
  return {x + lo + jitter * rng.uniform01(), y + lo + jitter * rng.uniform01()};
}

std::vector<double> StateCodec::encode_center(std::size_t s) const {
  if (kind == StateCodecKind::kIndex) return {static_cast<double>(s)};
  return {static_cast<double>(s % width) + 0.5, static_cast<double>(s / width) + 0.5};
}

std::size_t StateCodec::decode(std::span<const double> obs) const {
  if (obs.size() != dim()) throw ArgumentError("observation dimension does not match the state codec");
  for (double v : obs)
    if (!std::isfinite(v)) throw ArgumentError("non-finite observation");
  if (kind == StateCodecKind::kIndex) {
    const double r = std::clamp(std::round(obs[0]), 0.0, static_cast<double>(n_states - 1));
    return static_cast<std::size_t>(r);
  }
  auto cell = [](double v, std::size_t n) {
    const double f = std::floor(v);
    if (f < 0.0) return std::size_t{0};
    return std::min(static_cast<std::size_t>(f), n - 1);
  };
  return cell(obs[1], height) * width + cell(obs[0], width);
}

json to_json(const StateCodec& codec) {
  return {{"kind", codec.kind == StateCodecKind::kIndex ? "index" : "grid_position"},
          {"n_states", codec.n_states},
          {"width", codec.width},
          {"height", codec.height},
          {"jitter", codec.jitter}};
}

StateCodec codec_from_json(const json& j) {
  StateCodec c;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "index") {
    c.kind = StateCodecKind::kIndex;
  } else if (kind == "grid_position") {
    c.kind = StateCodecKind::kGridPosition;
  } else {
    throw ArgumentError("unknown state codec '" + kind + "'");
  }
  c.n_states = j.at("n_states").get<std::size_t>();
  c.width = j.value("width", std::size_t{0});
  c.height = j.value("height", std::size_t{0});
  c.jitter = j.value("jitter", 1.0);
  return c;
}

std::size_t decode_action(std::span<const double> action, std::size_t n_actions) {
  if (action.size() != 1) throw ArgumentError("tabular actions are 1-dimensional");
  if (!std::isfinite(action[0])) throw ArgumentError("non-finite action");
  const double r = std::clamp(std::round(action[0]), 0.0, static_cast<double>(n_actions - 1));
  return static_cast<std::size_t>(r);
}

// --- tabular MDP ----------------------------------------------------------------

double TabularMDP::reward(std::size_t s, std::size_t a) const {
  if (is_terminal(s)) return 0.0;
  double r = base_reward[s * n_actions + a];
  if (!arrival_bonus.empty()) {
    const auto pr = row(s, a);
    for (std::size_t s2 = 0; s2 < n_states; ++s2) r += pr[s2] * arrival_bonus[s2];
  }
  return r;
}

double TabularMDP::realized_reward(std::size_t s, std::size_t a, std::size_t s2) const {
  if (is_terminal(s)) return 0.0;
  return base_reward[s * n_actions + a] + (arrival_bonus.empty() ? 0.0 : arrival_bonus[s2]);
}

double TabularMDP::max_abs_reward() const {
  double m = 0.0;
  for (std::size_t s = 0; s < n_states; ++s)
    for (std::size_t a = 0; a < n_actions; ++a)
      for (std::size_t s2 = 0; s2 < n_states; ++s2)
        if (p(s, a, s2) > 0.0) m = std::max(m, std::abs(realized_reward(s, a, s2)));
  return m;
}

void TabularMDP::check() const {
  if (n_states == 0 || n_actions == 0) throw ArgumentError("MDP needs at least one state and one action");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ArgumentError("gamma must lie strictly in (0, 1)");
  if (transition.size() != n_states * n_actions * n_states) throw ArgumentError("transition table has wrong size");
  if (base_reward.size() != n_states * n_actions) throw ArgumentError("reward table has wrong size");
  if (!arrival_bonus.empty() && arrival_bonus.size() != n_states) throw ArgumentError("arrival bonus has wrong size");
  if (initial.size() != n_states) throw ArgumentError("initial distribution has wrong size");
  if (!terminal.empty() && terminal.size() != n_states) throw ArgumentError("terminal mask has wrong size");
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (double v : row(s, a)) {
        if (!(v >= 0.0)) throw ArgumentError("negative or NaN transition probability");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("transition row does not sum to 1");
    }
  }
  double total = 0.0;
  for (double v : initial) {
    if (!(v >= 0.0)) throw ArgumentError("negative initial probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("initial distribution does not sum to 1");
}

void TabularPolicy::check() const {
  if (probs.size() != n_states * n_actions) throw ArgumentError("policy table has wrong size");
  for (std::size_t s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (double v : row(s)) {
      if (!(v >= 0.0)) throw ArgumentError("negative policy probability");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("policy row does not sum to 1");
  }
}

TabularPolicy TabularPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
  return {n_states, n_actions, std::vector<double>(n_states * n_actions, 1.0 / static_cast<double>(n_actions))};
}

TabularPolicy TabularPolicy::deterministic(std::span<const std::size_t> actions, std::size_t n_actions) {
  TabularPolicy p{actions.size(), n_actions, std::vector<double>(actions.size() * n_actions, 0.0)};
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] >= n_actions) throw ArgumentError("action index out of range");
    p.probs[s * n_actions + actions[s]] = 1.0;
  }
  return p;
}

json to_json(const TabularPolicy& policy) {
  return {{"kind", "tabular"}, {"n_states", policy.n_states}, {"n_actions", policy.n_actions}, {"probs", policy.probs}};
}

TabularPolicy policy_from_json(const json& j) {
  TabularPolicy p{j.at("n_states").get<std::size_t>(), j.at("n_actions").get<std::size_t>(),
                  j.at("probs").get<std::vector<double>>()};
  p.check();
  return p;
}

// --- gridworld ------------------------------------------------------------------

std::size_t grid_state(std::size_t width, GridCell cell) { return cell.y * width + cell.x; }

TabularMDP make_gridworld(std::size_t width, std::size_t height, GridCell goal, const std::vector<GridCell>& traps,
                          double slip_prob, double gamma, const GridworldOptions& options) {
  if (width == 0 || height == 0) throw ArgumentError("grid must be non-empty");
  auto inside = [&](GridCell c) { return c.x < width && c.y < height; };
  if (!inside(goal)) throw ArgumentError("goal outside the grid");
  if (!inside(options.start)) throw ArgumentError("start outside the grid");
  for (const auto& t : traps) {
    if (!inside(t)) throw ArgumentError("trap outside the grid");
    if (t == goal) throw ArgumentError("trap coincides with the goal");
    if (t == options.start) throw ArgumentError("trap coincides with the start");
  }
  if (options.start == goal) throw ArgumentError("start coincides with the goal");
  if (!(slip_prob >= 0.0 && slip_prob < 1.0)) throw ArgumentError("slip_prob must lie in [0, 1)");
  if (!(options.jitter >= 0.0 && options.jitter <= 1.0)) throw ArgumentError("jitter must lie in [0, 1]");

  TabularMDP m;
  m.name = "gridworld";
  m.n_states = width * height;
  m.n_actions = 4;
  m.gamma = gamma;
  m.max_steps = options.max_steps;
  m.transition.assign(m.n_states * m.n_actions * m.n_states, 0.0);
  m.base_reward.assign(m.n_states * m.n_actions, 0.0);
  m.arrival_bonus.assign(m.n_states, 0.0);
  m.terminal.assign(m.n_states, 0);
  m.initial.assign(m.n_states, 0.0);
  m.initial[grid_state(width, options.start)] = 1.0;
  m.codec = {options.codec, m.n_states, width, height, options.jitter};

  const std::size_t goal_s = grid_state(width, goal);
  m.terminal[goal_s] = 1;
  m.arrival_bonus[goal_s] = 1.0;
  for (const auto& t : traps) {
    const std::size_t ts = grid_state(width, t);
    m.terminal[ts] = 1;
    m.arrival_bonus[ts] = -1.0;
  }

  auto move = [&](std::size_t x, std::size_t y, std::size_t dir) {
    switch (dir) {
      case kUp: if (y + 1 < height) ++y; break;
      case kRight: if (x + 1 < width) ++x; break;
      case kDown: if (y > 0) --y; break;
      default: if (x > 0) --x; break;
    }
    return y * width + x;
  };

  for (std::size_t s = 0; s < m.n_states; ++s) {
    const std::size_t x = s % width, y = s / width;
    for (std::size_t a = 0; a < 4; ++a) {
      double* row = m.transition.data() + (s * 4 + a) * m.n_states;
      if (m.terminal[s]) {
        row[s] = 1.0;
        continue;
      }
      row[move(x, y, a)] += 1.0 - slip_prob;
      if (slip_prob > 0.0) {
        row[move(x, y, (a + 1) % 4)] += 0.5 * slip_prob;
        row[move(x, y, (a + 3) % 4)] += 0.5 * slip_prob;
      }
    }
  }
  m.check();
  return m;
}

// --- solvers --------------------------------------------------------------------

std::vector<double> value_iteration(const TabularMDP& mdp, double tol, std::size_t max_iters) {
  mdp.check();
  const std::size_t S = mdp.n_states, A = mdp.n_actions;
  std::vector<double> r(S * A);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) r[s * A + a] = mdp.reward(s, a);

  std::vector<double> q(S * A, 0.0), v(S, 0.0);
  for (std::size_t it = 0; it < max_iters; ++it) {
    for (std::size_t s = 0; s < S; ++s) v[s] = *std::max_element(q.begin() + s * A, q.begin() + (s + 1) * A);
    double delta = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      if (mdp.is_terminal(s)) continue;
      for (std::size_t a = 0; a < A; ++a) {
        const auto pr = mdp.row(s, a);
        double ev = 0.0;
        for (std::size_t s2 = 0; s2 < S; ++s2) ev += pr[s2] * v[s2];
        const double nq = r[s * A + a] + mdp.gamma * ev;
        delta = std::max(delta, std::abs(nq - q[s * A + a]));
        q[s * A + a] = nq;
      }
    }
    if (delta < tol) break;
  }
  return q;
}

TabularPolicy greedy_policy(std::span<const double> q, std::size_t n_states, std::size_t n_actions) {
  if (q.size() != n_states * n_actions) throw ArgumentError("Q table has wrong size");
  std::vector<std::size_t> best(n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    std::size_t arg = 0;
    for (std::size_t a = 1; a < n_actions; ++a)
      if (q[s * n_actions + a] > q[s * n_actions + arg]) arg = a;
    best[s] = arg;
  }
  return TabularPolicy::deterministic(best, n_actions);
}

TabularPolicy epsilon_greedy(const TabularPolicy& policy, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("epsilon must lie in [0, 1]");
  TabularPolicy out = policy;
  const double u = epsilon / static_cast<double>(policy.n_actions);
  for (auto& p : out.probs) p = (1.0 - epsilon) * p + u;
  return out;
}

OccupancyDist exact_occupancy(const TabularMDP& mdp, const TabularPolicy& policy) {
  mdp.check();
  policy.check();
  if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
    throw ArgumentError("policy shape does not match the MDP");
  const std::size_t S = mdp.n_states, A = mdp.n_actions;
  const auto n = static_cast<Eigen::Index>(S);

  // rho = (1 - gamma) nu0 + gamma P_pi^T rho
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd rhs(n);
  for (std::size_t s = 0; s < S; ++s) {
    rhs(static_cast<Eigen::Index>(s)) = (1.0 - mdp.gamma) * mdp.initial[s];
    for (std::size_t a = 0; a < A; ++a) {
      const double pa = policy.prob(s, a);
      if (pa == 0.0) continue;
      const auto pr = mdp.row(s, a);
      for (std::size_t s2 = 0; s2 < S; ++s2) {
        system(static_cast<Eigen::Index>(s2), static_cast<Eigen::Index>(s)) -= mdp.gamma * pa * pr[s2];
      }
    }
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  Eigen::VectorXd rho = lu.solve(rhs);
  // One step of iterative refinement.
  rho += lu.solve(rhs - system * rho);
  const double residual = (system * rho - rhs).lpNorm<Eigen::Infinity>();
  if (!(residual < 1e-10)) throw NumericError("occupancy system residual " + std::to_string(residual));

  OccupancyDist out{S, A, std::vector<double>(S * A, 0.0), mdp.gamma};
  for (std::size_t s = 0; s < S; ++s) {
    const double rs = std::max(0.0, rho(static_cast<Eigen::Index>(s)));
    for (std::size_t a = 0; a < A; ++a) out.d[s * A + a] = rs * policy.prob(s, a);
  }
  return out;
}

EmpiricalDist empirical_distribution(const OfflineDataset& dataset, const TabularMDP& mdp, bool clamp) {
  const std::size_t N = dataset.transition_count();
  if (N == 0) throw ArgumentError("empirical distribution of an empty dataset");
  EmpiricalDist e{mdp.n_states, mdp.n_actions, std::vector<double>(mdp.n_states * mdp.n_actions, 0.0),
                  std::vector<std::size_t>(mdp.n_states * mdp.n_actions, 0), N};
  for (const auto& traj : dataset.trajectories) {
    for (const auto& x : traj.transitions) {
      if (!clamp) {
        if (mdp.codec.kind == StateCodecKind::kIndex && !index_in_range(x.state, mdp.n_states))
          throw ArgumentError("state index out of range");
        if (!index_in_range(x.action, mdp.n_actions)) throw ArgumentError("action index out of range");
      }
      const std::size_t s = mdp.codec.decode(x.state);
      const std::size_t a = decode_action(x.action, mdp.n_actions);
      ++e.counts[s * mdp.n_actions + a];
    }
  }
  for (std::size_t i = 0; i < e.mu.size(); ++i) e.mu[i] = static_cast<double>(e.counts[i]) / static_cast<double>(N);
  return e;
}

// --- point mass -----------------------------------------------------------------

void PointMassEnv::check() const {
  for (int i = 0; i < 2; ++i) {
    if (!(arena_lo[i] < arena_hi[i])) throw ArgumentError("empty arena");
    if (goal[i] < arena_lo[i] || goal[i] > arena_hi[i]) throw ArgumentError("goal outside the arena");
    if (start[i] < arena_lo[i] || start[i] > arena_hi[i]) throw ArgumentError("start outside the arena");
  }
  if (!(noise >= 0.0)) throw ArgumentError("noise scale must be >= 0");
  if (!(goal_radius > 0.0)) throw ArgumentError("goal radius must be > 0");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ArgumentError("gamma must lie strictly in (0, 1)");
  if (max_steps == 0) throw ArgumentError("max_steps must be >= 1");
}

std::vector<double> PointMassEnv::reset(Rng& rng) const {
  std::vector<double> s(4, 0.0);
  for (int i = 0; i < 2; ++i) {
    s[i] = std::clamp(start[i] + rng.uniform(-start_noise, start_noise), arena_lo[i], arena_hi[i]);
  }
  return s;
}

PointMassEnv::Step PointMassEnv::step(std::span<const double> state, std::span<const double> action,
                                      Rng& rng) const {
  if (state.size() != 4 || action.size() != 2) throw ArgumentError("point mass expects 4-D states and 2-D actions");
  Step out;
  out.next_state.resize(4);
  for (int i = 0; i < 2; ++i) {
    const double acc = std::clamp(action[i], -max_accel, max_accel);
    double v = state[2 + i] + dt * acc + noise * rng.normal();
    v = std::clamp(v, -max_speed, max_speed);
    double x = state[i] + dt * v;
    if (x < arena_lo[i] || x > arena_hi[i]) {
      x = std::clamp(x, arena_lo[i], arena_hi[i]);
      v = 0.0;
    }
    out.next_state[i] = x;
    out.next_state[2 + i] = v;
  }
  const double dx = out.next_state[0] - goal[0], dy = out.next_state[1] - goal[1];
  out.terminal = std::sqrt(dx * dx + dy * dy) <= goal_radius;
  out.reward = step_penalty + (out.terminal ? goal_reward : 0.0);
  return out;
}

json to_json(const PointMassEnv& e) {
  return {{"arena_lo", e.arena_lo},     {"arena_hi", e.arena_hi}, {"start", e.start},
          {"start_noise", e.start_noise}, {"goal", e.goal},       {"goal_radius", e.goal_radius},
          {"noise", e.noise},           {"dt", e.dt},             {"max_speed", e.max_speed},
          {"max_accel", e.max_accel},   {"step_penalty", e.step_penalty},
          {"goal_reward", e.goal_reward}, {"gamma", e.gamma},     {"max_steps", e.max_steps}};
}

PointMassEnv pointmass_from_json(const json& j) {
  PointMassEnv e;
  auto get2 = [&](const char* key, std::array<double, 2>& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::array<double, 2>>();
  };
  get2("arena_lo", e.arena_lo);
  get2("arena_hi", e.arena_hi);
  get2("start", e.start);
  get2("goal", e.goal);
  e.start_noise = j.value("start_noise", e.start_noise);
  e.goal_radius = j.value("goal_radius", e.goal_radius);
  e.noise = j.value("noise", e.noise);
  e.dt = j.value("dt", e.dt);
  e.max_speed = j.value("max_speed", e.max_speed);
  e.max_accel = j.value("max_accel", e.max_accel);
  e.step_penalty = j.value("step_penalty", e.step_penalty);
  e.goal_reward = j.value("goal_reward", e.goal_reward);
  e.gamma = j.value("gamma", e.gamma);
  e.max_steps = j.value("max_steps", e.max_steps);
  e.check();
  return e;
}

ContinuousPolicy pointmass_behavior(const PointMassEnv& env, double epsilon, double gain, double damping) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("epsilon must lie in [0, 1]");
  return [env, epsilon, gain, damping](std::span<const double> s, Rng& rng) {
    std::vector<double> a(2);
    if (rng.bernoulli(epsilon)) {
      for (auto& v : a) v = rng.uniform(-env.max_accel, env.max_accel);
      return a;
    }
    for (int i = 0; i < 2; ++i) {
      a[i] = std::clamp(gain * (env.goal[i] - s[i]) - damping * s[2 + i], -env.max_accel, env.max_accel);
    }
    return a;
  };
}

// --- rollouts -------------------------------------------------------------------

namespace {

Trajectory tabular_episode(const TabularMDP& mdp, const TabularPolicy& policy, Rng& rng, std::int64_t id) {
  Trajectory traj;
  traj.id = id;
  std::size_t s = rng.categorical(mdp.initial);
  std::vector<double> obs = mdp.codec.encode(s, rng);
  for (std::size_t t = 0; t < mdp.max_steps; ++t) {
    const std::size_t a = rng.categorical(policy.row(s));
    const std::size_t s2 = rng.categorical(mdp.row(s, a));
    Transition x;
    x.state = obs;
    x.action = {static_cast<double>(a)};
    x.reward = mdp.realized_reward(s, a, s2);
    obs = mdp.codec.encode(s2, rng);
    x.next_state = obs;
    x.terminal = mdp.is_terminal(s2);
    traj.transitions.push_back(std::move(x));
    if (traj.transitions.back().terminal) break;
    s = s2;
  }
  return traj;
}

Trajectory pointmass_episode(const PointMassEnv& env, const ContinuousPolicy& policy, Rng& rng, std::int64_t id) {
  Trajectory traj;
  traj.id = id;
  std::vector<double> s = env.reset(rng);
  for (std::size_t t = 0; t < env.max_steps; ++t) {
    auto a = policy(s, rng);
    for (int i = 0; i < 2; ++i) a[i] = std::clamp(a[i], -env.max_accel, env.max_accel);
    auto step = env.step(s, a, rng);
    Transition x{s, a, step.reward, step.next_state, step.terminal};
    traj.transitions.push_back(std::move(x));
    if (step.terminal) break;
    s = std::move(step.next_state);
  }
  return traj;
}

DatasetMeta tabular_meta(const TabularMDP& mdp, std::uint64_t seed) {
  return {mdp.codec.dim(), 1, mdp.max_steps, mdp.gamma, mdp.name, seed};
}

DatasetMeta pointmass_meta(const PointMassEnv& env, std::uint64_t seed) {
  return {4, 2, env.max_steps, env.gamma, "pointmass", seed};
}

void check_tabular_rollout(const TabularMDP& mdp, const TabularPolicy& policy) {
  mdp.check();
  policy.check();
  if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
    throw ArgumentError("policy shape does not match the MDP");
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    if (mdp.initial[s] > 0.0 && mdp.is_terminal(s)) throw ArgumentError("initial distribution covers a terminal state");
  if (mdp.max_steps == 0) throw ArgumentError("max_steps must be >= 1");
}

}  // namespace

OfflineDataset rollout(const TabularMDP& mdp, const TabularPolicy& policy, std::size_t n_trajectories,
                       std::uint64_t seed) {
  if (n_trajectories == 0) throw ArgumentError("n_trajectories must be >= 1");
  check_tabular_rollout(mdp, policy);
  OfflineDataset d{tabular_meta(mdp, seed), {}, false};
  Rng rng(seed);
  for (std::size_t i = 0; i < n_trajectories; ++i)
    d.trajectories.push_back(tabular_episode(mdp, policy, rng, static_cast<std::int64_t>(i)));
  return d;
}

OfflineDataset rollout_transitions(const TabularMDP& mdp, const TabularPolicy& policy, std::size_t min_transitions,
                                   std::uint64_t seed) {
  if (min_transitions == 0) throw ArgumentError("min_transitions must be >= 1");
  check_tabular_rollout(mdp, policy);
  OfflineDataset d{tabular_meta(mdp, seed), {}, false};
  Rng rng(seed);
  std::size_t n = 0;
  while (n < min_transitions) {
    d.trajectories.push_back(tabular_episode(mdp, policy, rng, static_cast<std::int64_t>(d.trajectories.size())));
    n += d.trajectories.back().transitions.size();
  }
  return d;
}

OfflineDataset rollout(const PointMassEnv& env, const ContinuousPolicy& policy, std::size_t n_trajectories,
                       std::uint64_t seed) {
  if (n_trajectories == 0) throw ArgumentError("n_trajectories must be >= 1");
  env.check();
  OfflineDataset d{pointmass_meta(env, seed), {}, false};
  Rng rng(seed);
  for (std::size_t i = 0; i < n_trajectories; ++i)
    d.trajectories.push_back(pointmass_episode(env, policy, rng, static_cast<std::int64_t>(i)));
  return d;
}

OfflineDataset rollout_transitions(const PointMassEnv& env, const ContinuousPolicy& policy,
                                   std::size_t min_transitions, std::uint64_t seed) {
  if (min_transitions == 0) throw ArgumentError("min_transitions must be >= 1");
  env.check();
  OfflineDataset d{pointmass_meta(env, seed), {}, false};
  Rng rng(seed);
  std::size_t n = 0;
  while (n < min_transitions) {
    d.trajectories.push_back(pointmass_episode(env, policy, rng, static_cast<std::int64_t>(d.trajectories.size())));
    n += d.trajectories.back().transitions.size();
  }
  return d;
}

}  // namespace seqcov
