#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "../oracles/oracles.hpp"
#include "helpers.hpp"
#include "seqcov/envs.hpp"
#include "seqcov/errors.hpp"

using namespace seqcov;

namespace {

TabularMDP one_state(double gamma) {
  TabularMDP m;
  m.n_states = 1;
  m.n_actions = 1;
  m.transition = {1.0};
  m.base_reward = {0.0};
  m.gamma = gamma;
  m.initial = {1.0};
  m.codec = {StateCodecKind::kIndex, 1, 0, 0, 1.0};
  return m;
}

TabularMDP two_cycle() {
  TabularMDP m;
  m.n_states = 2;
  m.n_actions = 2;
  m.transition.assign(8, 0.0);
  // s0 -> s1 and s1 -> s0 under every action
  for (std::size_t a = 0; a < 2; ++a) {
    m.transition[(0 * 2 + a) * 2 + 1] = 1.0;
    m.transition[(1 * 2 + a) * 2 + 0] = 1.0;
  }
  m.base_reward = {0, 0, 0, 0};
  m.gamma = 0.5;
  m.initial = {1.0, 0.0};
  m.codec = {StateCodecKind::kIndex, 2, 0, 0, 1.0};
  return m;
}

}  // namespace

TEST(Occupancy, SingleStateSingleAction) {
  for (double g : {0.1, 0.5, 0.99}) {
    const auto d = exact_occupancy(one_state(g), TabularPolicy::uniform(1, 1));
    EXPECT_NEAR(d.at(0, 0), 1.0, 1e-12);
  }
}

TEST(Occupancy, TwoStateCycle) {
  const auto m = two_cycle();
  const std::vector<std::size_t> acts{0, 1};
  const auto pi = TabularPolicy::deterministic(acts, 2);
  const auto d = exact_occupancy(m, pi);
  const auto ref = oracle::series_occupancy(m, pi, 1e-12);
  EXPECT_NEAR(d.at(0, 0), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(d.at(1, 1), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(d.at(0, 1), 0.0);
  EXPECT_NEAR(ref[0], 2.0 / 3.0, 1e-11);
}

TEST(Occupancy, MatchesSeriesOracleOnRandomMdps) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const std::size_t S = 1 + seed % 6, A = 1 + seed % 4;
    const auto m = oracle::random_mdp(seed, S, A, 0.2);
    const auto pi = oracle::random_policy(seed + 1000, S, A);
    const auto d = exact_occupancy(m, pi);
    const auto ref = oracle::series_occupancy(m, pi);
    for (std::size_t i = 0; i < S * A; ++i) EXPECT_NEAR(d.d[i], ref[i], 1e-9) << "seed " << seed;
    EXPECT_NEAR(d.total(), 1.0, 1e-8);
  }
}

TEST(Gridworld, Construction) {
  GridworldOptions opts;
  opts.codec = StateCodecKind::kIndex;
  const auto m = make_gridworld(2, 1, {1, 0}, {}, 0.0, 0.9, opts);
  EXPECT_EQ(m.p(0, kRight, 1), 1.0);
  EXPECT_EQ(m.p(0, kLeft, 0), 1.0);  // off-grid keeps position
  EXPECT_TRUE(m.is_terminal(1));
  EXPECT_EQ(m.realized_reward(0, kRight, 1), 1.0);
  EXPECT_EQ(m.reward(1, kRight), 0.0);
}

TEST(Gridworld, SlipSplitsPerpendicular) {
  const auto m = make_gridworld(3, 3, {2, 2}, {{0, 2}}, 0.2, 0.9);
  const std::size_t centre = grid_state(3, {1, 1});
  EXPECT_NEAR(m.p(centre, kUp, grid_state(3, {1, 2})), 0.8, 1e-15);
  EXPECT_NEAR(m.p(centre, kUp, grid_state(3, {2, 1})), 0.1, 1e-15);
  EXPECT_NEAR(m.p(centre, kUp, grid_state(3, {0, 1})), 0.1, 1e-15);
  EXPECT_EQ(m.p(centre, kUp, grid_state(3, {1, 0})), 0.0);
  for (std::size_t s = 0; s < m.n_states; ++s)
    for (std::size_t a = 0; a < 4; ++a) {
      const auto row = m.row(s, a);
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
    }
  EXPECT_EQ(m.realized_reward(grid_state(3, {0, 1}), kUp, grid_state(3, {0, 2})), -1.0);
}

TEST(Gridworld, InvalidCoordinates) {
  EXPECT_THROW(make_gridworld(3, 3, {3, 0}, {}, 0.0, 0.9), ArgumentError);
  EXPECT_THROW(make_gridworld(3, 3, {2, 2}, {{5, 5}}, 0.0, 0.9), ArgumentError);
  EXPECT_THROW(make_gridworld(3, 3, {2, 2}, {{2, 2}}, 0.0, 0.9), ArgumentError);
  EXPECT_THROW(make_gridworld(3, 3, {2, 2}, {}, 1.0, 0.9), ArgumentError);
}

TEST(ValueIteration, MatchesOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto m = oracle::random_mdp(seed, 2 + seed % 5, 1 + seed % 4, 0.3);
    const auto q = value_iteration(m);
    const auto ref = oracle::value_iteration(m, 3000);
    for (std::size_t i = 0; i < q.size(); ++i) EXPECT_NEAR(q[i], ref[i], 1e-8);
  }
}

TEST(Policy, GreedyTiesAndEpsilon) {
  const std::vector<double> q{1.0, 3.0, 3.0, 0.5, 0.5, 0.5};
  const auto pi = greedy_policy(q, 2, 3);
  EXPECT_EQ(pi.prob(0, 1), 1.0);
  EXPECT_EQ(pi.prob(1, 0), 1.0);
  const auto mix = epsilon_greedy(pi, 0.3);
  EXPECT_NEAR(mix.prob(0, 1), 0.7 + 0.1, 1e-15);
  EXPECT_NEAR(mix.prob(0, 0), 0.1, 1e-15);
}

TEST(Codec, GridDecodeClampsAndIndexDecodeRounds) {
  const StateCodec grid{StateCodecKind::kGridPosition, 12, 4, 3, 1.0};
  EXPECT_EQ(grid.decode(std::vector<double>{1.5, 2.9}), 9u);
  EXPECT_EQ(grid.decode(std::vector<double>{-0.1, 3.4}), 8u);
  Rng rng(3);
  for (std::size_t s = 0; s < 12; ++s) EXPECT_EQ(grid.decode(grid.encode(s, rng)), s);
  const StateCodec index{StateCodecKind::kIndex, 5, 0, 0, 1.0};
  EXPECT_EQ(index.decode(std::vector<double>{2.4}), 2u);
  EXPECT_EQ(index.decode(std::vector<double>{5.2}), 4u);
  EXPECT_THROW(index.decode(std::vector<double>{NAN}), ArgumentError);
}

TEST(Rollout, DeterministicUnderSeed) {
  const auto m = make_gridworld(4, 4, {3, 3}, {{1, 2}}, 0.2, 0.9);
  const auto pi = epsilon_greedy(greedy_policy(value_iteration(m), 16, 4), 0.3);
  const auto a = rollout(m, pi, 30, 7);
  const auto b = rollout(m, pi, 30, 7);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, rollout(m, pi, 30, 8));
  EXPECT_EQ(a.trajectories.size(), 30u);
  EXPECT_EQ(a.meta.gamma, 0.9);
  EXPECT_EQ(a.meta.seed, 7u);
  EXPECT_TRUE(validate(a).ok());
}

TEST(Rollout, DeterministicEverythingGivesIdenticalTrajectories) {
  GridworldOptions opts;
  opts.codec = StateCodecKind::kIndex;
  const auto m = make_gridworld(5, 2, {4, 1}, {}, 0.0, 0.9, opts);
  const auto pi = greedy_policy(value_iteration(m), m.n_states, 4);
  const auto d = rollout(m, pi, 10, 1);
  for (const auto& t : d.trajectories) EXPECT_EQ(t.transitions, d.trajectories[0].transitions);
}

TEST(Rollout, TerminalEndsTrajectory) {
  const auto m = make_gridworld(4, 4, {3, 3}, {{1, 1}, {2, 2}}, 0.3, 0.9);
  const auto d = rollout(m, TabularPolicy::uniform(16, 4), 200, 2);
  for (const auto& t : d.trajectories) {
    EXPECT_LE(t.transitions.size(), m.max_steps);
    for (std::size_t i = 0; i + 1 < t.transitions.size(); ++i) {
      EXPECT_FALSE(t.transitions[i].terminal);
      EXPECT_FALSE(m.is_terminal(m.codec.decode(t.transitions[i + 1].state)));
    }
  }
}

TEST(Rollout, VisitationConvergesToOccupancy) {
  // state-independent dynamics: Pr(s_t) is the initial distribution at every t
  TabularMDP m;
  m.n_states = 4;
  m.n_actions = 2;
  const std::vector<double> q{0.1, 0.2, 0.3, 0.4};
  for (std::size_t i = 0; i < 8; ++i) m.transition.insert(m.transition.end(), q.begin(), q.end());
  m.base_reward.assign(8, 0.0);
  m.gamma = 0.9;
  m.initial = q;
  m.max_steps = 50;
  m.codec = {StateCodecKind::kIndex, 4, 0, 0, 1.0};
  const TabularPolicy pi{4, 2, {0.5, 0.5, 0.9, 0.1, 0.2, 0.8, 1.0, 0.0}};
  const auto d = rollout_transitions(m, pi, 100'000, 5);
  const auto mu = empirical_distribution(d, m);
  const auto occ = exact_occupancy(m, pi);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_LT(std::abs(mu.mu[i] - occ.d[i]), 0.02);
}

TEST(Empirical, Examples) {
  TabularMDP m = two_cycle();
  OfflineDataset d;
  d.meta = {1, 1, 4, 0.5, "t", 0};
  Trajectory t;
  for (int i = 0; i < 4; ++i) t.transitions.push_back({{0.0}, {0.0}, 0.0, {0.0}, false});
  d.trajectories.push_back(t);
  EXPECT_EQ(empirical_distribution(d, m).at(0, 0), 1.0);

  d.trajectories[0].transitions[2] = {{1.0}, {1.0}, 0.0, {1.0}, false};
  d.trajectories[0].transitions[3] = {{1.0}, {1.0}, 0.0, {1.0}, false};
  const auto mu = empirical_distribution(d, m);
  EXPECT_EQ(mu.at(0, 0), 0.5);
  EXPECT_EQ(mu.at(1, 1), 0.5);
  EXPECT_EQ(mu.support_size(), 2u);

  d.trajectories[0].transitions[3].action = {4.0};
  EXPECT_THROW(empirical_distribution(d, m), ArgumentError);
  EXPECT_NO_THROW(empirical_distribution(d, m, true));
  EXPECT_THROW(empirical_distribution(OfflineDataset{}, m), ArgumentError);
}

TEST(PointMass, StepAndRollout) {
  PointMassEnv env;
  Rng rng(1);
  const auto s0 = env.reset(rng);
  ASSERT_EQ(s0.size(), 4u);
  const auto step = env.step(s0, std::vector<double>{1.0, 0.0}, rng);
  EXPECT_EQ(step.next_state.size(), 4u);
  EXPECT_NEAR(step.reward, env.step_penalty, 1e-12);
  const auto pi = pointmass_behavior(env, 0.1);
  const auto a = rollout(env, pi, 5, 3);
  EXPECT_EQ(a, rollout(env, pi, 5, 3));
  EXPECT_TRUE(validate(a).ok());
  std::size_t reached = 0;
  for (const auto& t : a.trajectories) reached += t.transitions.back().terminal;
  EXPECT_GT(reached, 0u);

  PointMassEnv bad;
  bad.goal = {20.0, 1.0};
  EXPECT_THROW(bad.check(), ArgumentError);
}
