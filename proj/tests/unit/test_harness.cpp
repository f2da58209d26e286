#include <filesystem>

#include <gtest/gtest.h>

#include "seqcov/errors.hpp"
#include "seqcov/harness.hpp"

using namespace seqcov;
using nlohmann::json;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.seed = 3;
  c.env.width = 4;
  c.env.height = 4;
  c.env.goal = {3, 3};
  c.env.traps = {{1, 2}};
  c.env.gamma = 0.9;
  c.env.max_steps = 40;
  c.dataset_size = 3000;
  c.discretization.k = 4;
  c.patterns.l = 3;
  c.attack.rho = 0.05;
  c.attack.n_candidates = 8;
  c.learners.kinds = {"fqi", "bc"};
  c.learners.train.iterations = 50;
  c.evaluation.episodes = 10;
  c.coverage.lengths = {1, 2};
  c.persist = false;
  return c;
}

}  // namespace

TEST(Config, JsonRoundTripAndStrictness) {
  const auto c = small_config();
  const auto j = to_json(c);
  EXPECT_EQ(to_json(config_from_json(j)), j);
  EXPECT_EQ(config_from_json(json::object()).attack.rho, 0.01);

  auto bad = j;
  bad["attack"]["rhoo"] = 0.1;
  EXPECT_THROW(config_from_json(bad), ArgumentError);
  bad = j;
  bad["attack"]["eta"] = 1.5;
  EXPECT_THROW(config_from_json(bad), ArgumentError);
}

TEST(Config, HashStableAndSensitive) {
  const auto c = small_config();
  EXPECT_EQ(config_hash(c), config_hash(config_from_json(to_json(c))));
  EXPECT_EQ(config_hash(c).size(), 16u);
  auto d = c;
  d.out_dir = "elsewhere";
  d.persist = true;
  EXPECT_EQ(config_hash(c), config_hash(d));
  d.attack.rho = 0.02;
  EXPECT_NE(config_hash(c), config_hash(d));
}

TEST(Config, ApplyAxis) {
  const auto c = small_config();
  EXPECT_EQ(apply_axis(c, SweepAxis::kRho, 0.03).attack.rho, 0.03);
  EXPECT_FALSE(apply_axis(c, SweepAxis::kDedup, "off").patterns.dedup);
  EXPECT_EQ(apply_axis(c, SweepAxis::kAttackKind, "perturb_only").attack.kinds.front(), AttackKind::kPerturbOnly);
  EXPECT_THROW(apply_axis(c, SweepAxis::kEta, "x"), ArgumentError);
  EXPECT_THROW(apply_axis(c, SweepAxis::kEta, 2.0), ArgumentError);
  EXPECT_EQ(sweep_axis_from_string(to_string(SweepAxis::kAccessFraction)), SweepAxis::kAccessFraction);
}

TEST(Run, NoAttackGivesZeroAer) {
  auto c = small_config();
  c.attack.kinds = {AttackKind::kNone};
  const auto r = run_experiment(c);
  ASSERT_FALSE(r.rows.empty());
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.clean_acr, row.poisoned_acr);
    if (row.aer) EXPECT_EQ(*row.aer, 0.0);
  }
}

TEST(Run, AerRecomputableAndDeterministic) {
  auto c = small_config();
  c.attack.kinds = {AttackKind::kCsdpc, AttackKind::kPerturbOnly};
  const auto a = run_experiment(c);
  EXPECT_EQ(a.rows.size(), 4u);
  for (const auto& row : a.rows)
    if (row.aer) EXPECT_DOUBLE_EQ(*row.aer, compute_aer(row.clean_acr, row.poisoned_acr));
  EXPECT_EQ(to_json(a).dump(), to_json(run_experiment(c)).dump());
  EXPECT_EQ(a.k, 4u);
  ASSERT_TRUE(a.clean_coverage.has_value());
  EXPECT_EQ(a.clean_coverage->sequence.size(), 2u);
}

TEST(Run, PersistWritesUnderHash) {
  auto c = small_config();
  c.persist = true;
  c.out_dir = (std::filesystem::temp_directory_path() / "seqcov_harness_test").string();
  std::filesystem::remove_all(c.out_dir);
  const auto r = run_experiment(c);
  EXPECT_EQ(r.run_dir, std::filesystem::path(c.out_dir) / config_hash(c));
  EXPECT_TRUE(std::filesystem::exists(r.run_dir / "result.json"));
  std::filesystem::remove_all(c.out_dir);
}

TEST(Sweep, RowsAndFailures) {
  auto c = small_config();
  c.learners.kinds = {"bc"};
  const auto s = sweep(c, SweepAxis::kL, {json(2), json(100)});
  EXPECT_EQ(s.rows.size() + s.failures.size(), 2u);
  ASSERT_EQ(s.rows.size(), 1u);
  EXPECT_EQ(s.rows[0].value, 2);
  const auto csv = to_csv(s);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_THROW(sweep(c, SweepAxis::kL, {}), ArgumentError);
}
