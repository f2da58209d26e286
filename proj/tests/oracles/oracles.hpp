#pragma once

// Independent reference implementations used by the tests. They share no code
// with the library beyond its plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "seqcov/envs.hpp"

namespace oracle {

using seqcov::TabularMDP;
using seqcov::TabularPolicy;

inline std::vector<double> random_simplex(std::mt19937_64& gen, std::size_t n, double zero_prob) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n, 0.0);
  double total = 0.0;
  for (auto& x : v) {
    if (u(gen) < zero_prob) continue;
    x = 0.05 + u(gen);
    total += x;
  }
  if (total == 0.0) {
    v[std::uniform_int_distribution<std::size_t>(0, n - 1)(gen)] = 1.0;
    return v;
  }
  for (auto& x : v) x /= total;
  return v;
}

/// Random MDP with sparse rows. Terminal states self-loop and are never initial.
inline TabularMDP random_mdp(std::uint64_t seed, std::size_t S, std::size_t A, double terminal_prob = 0.0,
                             double zero_prob = 0.3) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TabularMDP m;
  m.n_states = S;
  m.n_actions = A;
  m.gamma = 0.5 + 0.45 * u(gen);
  m.terminal.assign(S, 0);
  for (std::size_t s = 1; s < S; ++s) m.terminal[s] = u(gen) < terminal_prob;
  m.transition.assign(S * A * S, 0.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      if (m.terminal[s]) {
        m.transition[(s * A + a) * S + s] = 1.0;
        continue;
      }
      const auto row = random_simplex(gen, S, zero_prob);
      std::copy(row.begin(), row.end(), m.transition.begin() + static_cast<std::ptrdiff_t>((s * A + a) * S));
    }
  m.base_reward.resize(S * A);
  for (auto& r : m.base_reward) r = 2.0 * u(gen) - 1.0;
  m.initial.assign(S, 0.0);
  double total = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    if (m.terminal[s] || (s > 0 && u(gen) < 0.4)) continue;
    m.initial[s] = 0.1 + u(gen);
    total += m.initial[s];
  }
  for (auto& x : m.initial) x /= total;
  m.codec = {seqcov::StateCodecKind::kIndex, S, 0, 0, 1.0};
  return m;
}

inline TabularPolicy random_policy(std::uint64_t seed, std::size_t S, std::size_t A, double zero_prob = 0.3) {
  std::mt19937_64 gen(seed);
  TabularPolicy p{S, A, {}};
  for (std::size_t s = 0; s < S; ++s) {
    const auto row = random_simplex(gen, A, zero_prob);
    p.probs.insert(p.probs.end(), row.begin(), row.end());
  }
  return p;
}

/// d(s, a) = (1 - gamma) sum_t gamma^t Pr(s_t = s) pi(a | s), summed until gamma^t < tol.
inline std::vector<double> series_occupancy(const TabularMDP& m, const TabularPolicy& pi, double tol = 1e-15) {
  const std::size_t S = m.n_states, A = m.n_actions;
  std::vector<double> rho = m.initial, state(S, 0.0), next(S);
  double w = 1.0;
  while (w > tol) {
    for (std::size_t s = 0; s < S; ++s) state[s] += (1.0 - m.gamma) * w * rho[s];
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a)
        for (std::size_t s2 = 0; s2 < S; ++s2)
          next[s2] += rho[s] * pi.probs[s * A + a] * m.transition[(s * A + a) * S + s2];
    rho.swap(next);
    w *= m.gamma;
  }
  std::vector<double> d(S * A);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) d[s * A + a] = state[s] * pi.probs[s * A + a];
  return d;
}

/// Q* with terminal states valued 0, by plain synchronous backups.
inline std::vector<double> value_iteration(const TabularMDP& m, std::size_t sweeps = 20000) {
  const std::size_t S = m.n_states, A = m.n_actions;
  auto term = [&](std::size_t s) { return !m.terminal.empty() && m.terminal[s]; };
  std::vector<double> q(S * A, 0.0), v(S, 0.0);
  for (std::size_t it = 0; it < sweeps; ++it) {
    for (std::size_t s = 0; s < S; ++s) {
      v[s] = term(s) ? 0.0 : q[s * A];
      for (std::size_t a = 1; a < A && !term(s); ++a) v[s] = std::max(v[s], q[s * A + a]);
    }
    std::vector<double> nq(S * A, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      if (term(s)) continue;
      for (std::size_t a = 0; a < A; ++a) {
        double x = m.base_reward[s * A + a];
        for (std::size_t s2 = 0; s2 < S; ++s2) {
          const double p = m.transition[(s * A + a) * S + s2];
          const double bonus = m.arrival_bonus.empty() ? 0.0 : m.arrival_bonus[s2];
          x += p * (bonus + m.gamma * v[s2]);
        }
        nq[s * A + a] = x;
      }
    }
    q.swap(nq);
  }
  return q;
}

/// Non-terminal states with positive discounted visitation under mu.
inline std::vector<char> behavior_support(const TabularMDP& m, const TabularPolicy& mu) {
  const auto d = series_occupancy(m, mu, 1e-30);
  std::vector<char> out(m.n_states, 0);
  for (std::size_t s = 0; s < m.n_states; ++s) {
    double mass = 0.0;
    for (std::size_t a = 0; a < m.n_actions; ++a) mass += d[s * m.n_actions + a];
    out[s] = mass > 0.0 && !(!m.terminal.empty() && m.terminal[s]);
  }
  return out;
}

/// max over supported (s, a) of pi / mu; infinity when pi leaves mu's support at a supported state.
inline double ratio_bound(const TabularMDP& m, const TabularPolicy& pi, const TabularPolicy& mu) {
  const auto support = behavior_support(m, mu);
  double best = 0.0;
  for (std::size_t s = 0; s < m.n_states; ++s) {
    if (!support[s]) continue;
    for (std::size_t a = 0; a < m.n_actions; ++a) {
      const double p = pi.probs[s * m.n_actions + a], q = mu.probs[s * m.n_actions + a];
      if (p > 0.0 && q == 0.0) return INFINITY;
      if (q > 0.0) best = std::max(best, p / q);
    }
  }
  return best;
}

/// Brute force over all S^l x A^l sequences: max of prod pi/mu over sequences with mu(tau) > 0.
inline double sequence_ratio(const TabularMDP& m, const TabularPolicy& pi, const TabularPolicy& mu, std::size_t l) {
  const std::size_t S = m.n_states, A = m.n_actions;
  const auto support = behavior_support(m, mu);
  std::size_t total = 1;
  for (std::size_t i = 0; i < l; ++i) total *= S * A;
  double best = 0.0;
  std::vector<std::size_t> st(l), ac(l);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < l; ++i) {
      st[i] = c % S;
      c /= S;
      ac[i] = c % A;
      c /= A;
    }
    bool ok = support[st[0]];
    double ratio = 1.0;
    for (std::size_t i = 0; i < l && ok; ++i) {
      const double q = mu.probs[st[i] * A + ac[i]];
      ok = support[st[i]] && q > 0.0;
      if (ok && i + 1 < l) ok = m.transition[(st[i] * A + ac[i]) * S + st[i + 1]] > 0.0;
      if (ok) ratio *= pi.probs[st[i] * A + ac[i]] / q;
    }
    if (ok) best = std::max(best, ratio);
  }
  return best;
}

}  // namespace oracle
