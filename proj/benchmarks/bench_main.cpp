#include <map>

#include <benchmark/benchmark.h>

#include "seqcov/coverage.hpp"
#include "seqcov/discretize.hpp"
#include "seqcov/envs.hpp"
#include "seqcov/learners.hpp"
#include "seqcov/patterns.hpp"
#include "seqcov/poison.hpp"

using namespace seqcov;

namespace {

TabularMDP grid() {
  return make_gridworld(8, 8, {7, 7}, {{3, 3}, {4, 5}, {6, 2}, {2, 6}, {5, 6}}, 0.2, 0.9);
}

const OfflineDataset& dataset(std::size_t n) {
  static std::map<std::size_t, OfflineDataset> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    const auto m = grid();
    const auto pi = epsilon_greedy(greedy_policy(value_iteration(m), m.n_states, m.n_actions), 0.3);
    it = cache.emplace(n, rollout_transitions(m, pi, n, 1)).first;
  }
  return it->second;
}

void BM_kmeans(benchmark::State& state) {
  const auto& d = dataset(static_cast<std::size_t>(state.range(0)));
  const auto points = fit_standardizer(d).extract_all(d);
  for (auto _ : state) benchmark::DoNotOptimize(fit_kmeans(points, 8, 0).inertia);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(points.rows));
}
BENCHMARK(BM_kmeans)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond);

void BM_extract_patterns(benchmark::State& state) {
  const auto& d = dataset(static_cast<std::size_t>(state.range(0)));
  const auto ex = fit_standardizer(d);
  const auto units = assign_units(d, ex, fit_kmeans(ex.extract_all(d), 8, 0));
  for (auto _ : state) benchmark::DoNotOptimize(extract_patterns(units, 5, true).distinct());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(units.labels.size()));
}
BENCHMARK(BM_extract_patterns)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond);

void BM_csdpc(benchmark::State& state) {
  const auto& d = dataset(100'000);
  auto ex = fit_standardizer(d);
  auto model = fit_kmeans(ex.extract_all(d), 8, 0);
  const auto ctx = make_context(d, std::move(ex), std::move(model), 5, true);
  const auto rare = identify_rare(ctx.index, 0.01, d.transition_count());
  const PerturbationBudget budget{0.05, static_cast<std::size_t>(state.range(0)), 0};
  for (auto _ : state) benchmark::DoNotOptimize(csdpc_attack(d, ctx, rare, budget).report.poisoned_transitions);
}
BENCHMARK(BM_csdpc)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_exact_occupancy(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = make_gridworld(n, n, {n - 1, n - 1}, {}, 0.1, 0.95);
  const auto pi = TabularPolicy::uniform(m.n_states, m.n_actions);
  for (auto _ : state) benchmark::DoNotOptimize(exact_occupancy(m, pi).total());
}
BENCHMARK(BM_exact_occupancy)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_sequence_concentrability(benchmark::State& state) {
  const auto m = grid();
  const auto target = greedy_policy(value_iteration(m), m.n_states, m.n_actions);
  const auto behavior = ConditionalBehavior::from_policy(m, epsilon_greedy(target, 0.3));
  const auto l = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sequence_concentrability(m, target, behavior, l).value);
}
BENCHMARK(BM_sequence_concentrability)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_fqi(benchmark::State& state) {
  const auto m = grid();
  const auto& d = dataset(100'000);
  TrainConfig c;
  c.iterations = 100;
  for (auto _ : state) benchmark::DoNotOptimize(fqi_train(d, space_of(m), c).table.data());
}
BENCHMARK(BM_fqi)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
