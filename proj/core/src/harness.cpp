#include "seqcov/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "seqcov/errors.hpp"
#include "seqcov/rng.hpp"

namespace seqcov {

using nlohmann::json;
namespace fs = std::filesystem;

// --- config ------------------------------------------------------------------------------------

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ArgumentError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; });
    if (!known) throw ArgumentError("unknown field '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

json cell_json(GridCell c) { return json::array({c.x, c.y}); }

GridCell cell_from(const json& j) {
  const auto v = j.get<std::vector<std::size_t>>();
  if (v.size() != 2) throw ArgumentError("grid cells are written as [x, y]");
  return {v[0], v[1]};
}

json optional_curve(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return a;
}

json elbow_json(const ElbowResult& e) {
  return {{"k", e.k}, {"ks", e.ks}, {"inertias", e.inertias}, {"curvature", optional_curve(e.curvature)}};
}

}  // namespace

void ExperimentConfig::check() const {
  if (env.kind != "gridworld" && env.kind != "pointmass") throw ArgumentError("env.kind must be gridworld or pointmass");
  if (env.kind == "gridworld") {
    if (env.width < 2 || env.height < 1) throw ArgumentError("gridworld needs width >= 2 and height >= 1");
    if (!(env.slip >= 0.0 && env.slip < 1.0)) throw ArgumentError("env.slip must lie in [0, 1)");
    if (!(env.gamma > 0.0 && env.gamma < 1.0)) throw ArgumentError("env.gamma must lie in (0, 1)");
    if (env.codec != "grid_position" && env.codec != "index") throw ArgumentError("env.codec must be grid_position or index");
    if (env.max_steps < 1) throw ArgumentError("env.max_steps must be >= 1");
  } else {
    env.pointmass.check();
  }
  if (!(behavior.epsilon >= 0.0 && behavior.epsilon <= 1.0)) throw ArgumentError("behavior.epsilon must lie in [0, 1]");
  if (dataset_size < 1) throw ArgumentError("dataset_size must be >= 1");
  if (discretization.extractor != "concat_standardized" && discretization.extractor != "learned_linear")
    throw ArgumentError("discretization.extractor must be concat_standardized or learned_linear");
  if (discretization.k == 1) throw ArgumentError("discretization.k must be 0 (elbow) or >= 2");
  if (discretization.k == 0 && (discretization.k_min < 2 || discretization.k_max < discretization.k_min + 2))
    throw ArgumentError("elbow range needs k_min >= 2 and k_max >= k_min + 2");
  if (patterns.l < 1) throw ArgumentError("patterns.l must be >= 1");
  if (!(attack.rho > 0.0 && attack.rho < 1.0)) throw ArgumentError("attack.rho must lie in (0, 1)");
  PerturbationBudget{attack.eta, attack.n_candidates, 0}.check();
  if (!(attack.access_fraction > 0.0 && attack.access_fraction <= 1.0))
    throw ArgumentError("attack.access_fraction must lie in (0, 1]");
  for (const auto& k : learners.kinds)
    if (k != "fqi" && k != "cql_lite" && k != "bc") throw ArgumentError("unknown learner '" + k + "'");
  if (learners.train.iterations < 1) throw ArgumentError("learners.train.iterations must be >= 1");
  if (learners.train.alpha < 0.0) throw ArgumentError("learners.train.alpha must be >= 0");
  if (evaluation.episodes < 1) throw ArgumentError("evaluation.episodes must be >= 1");
  if (evaluation.seeds.empty()) throw ArgumentError("evaluation.seeds must not be empty");
  if (coverage.epsilon < 0.0) throw ArgumentError("coverage.epsilon must be >= 0");
  if (!(detection.threshold_sigma >= 0.0)) throw ArgumentError("detection.threshold_sigma must be >= 0");
}

json to_json(const ExperimentConfig& c) {
  json traps = json::array();
  for (const auto& t : c.env.traps) traps.push_back(cell_json(t));
  json kinds = json::array();
  for (auto k : c.attack.kinds) kinds.push_back(to_string(k));
  return {
      {"seed", c.seed},
      {"env",
       {{"kind", c.env.kind},
        {"width", c.env.width},
        {"height", c.env.height},
        {"start", cell_json(c.env.start)},
        {"goal", cell_json(c.env.goal)},
        {"traps", traps},
        {"slip", c.env.slip},
        {"gamma", c.env.gamma},
        {"max_steps", c.env.max_steps},
        {"codec", c.env.codec},
        {"jitter", c.env.jitter},
        {"pointmass", to_json(c.env.pointmass)}}},
      {"behavior", {{"epsilon", c.behavior.epsilon}, {"gain", c.behavior.gain}, {"damping", c.behavior.damping}}},
      {"dataset_size", c.dataset_size},
      {"discretization",
       {{"extractor", c.discretization.extractor},
        {"k", c.discretization.k},
        {"k_min", c.discretization.k_min},
        {"k_max", c.discretization.k_max},
        {"rank", c.discretization.rank},
        {"sample_limit", c.discretization.sample_limit},
        {"max_iters", c.discretization.kmeans.max_iters},
        {"tol", c.discretization.kmeans.tol}}},
      {"patterns", {{"l", c.patterns.l}, {"dedup", c.patterns.dedup}, {"budget_unit", to_string(c.patterns.budget_unit)}}},
      {"attack",
       {{"kinds", kinds},
        {"rho", c.attack.rho},
        {"eta", c.attack.eta},
        {"n_candidates", c.attack.n_candidates},
        {"access_fraction", c.attack.access_fraction}}},
      {"learners", {{"kinds", c.learners.kinds}, {"train", to_json(c.learners.train)}, {"action_bins", c.learners.action_bins}}},
      {"evaluation", {{"episodes", c.evaluation.episodes}, {"seeds", c.evaluation.seeds}}},
      {"coverage",
       {{"enabled", c.coverage.enabled},
        {"lengths", c.coverage.lengths},
        {"epsilon", c.coverage.epsilon},
        {"cap", c.coverage.cap}}},
      {"detection", {{"enabled", c.detection.enabled}, {"threshold_sigma", c.detection.threshold_sigma}}},
      {"out_dir", c.out_dir},
      {"persist", c.persist},
  };
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    reject_unknown(j,
                   {"seed", "env", "behavior", "dataset_size", "discretization", "patterns", "attack", "learners",
                    "evaluation", "coverage", "detection", "out_dir", "persist"},
                   "config");
    read(j, "seed", c.seed);
    read(j, "dataset_size", c.dataset_size);
    read(j, "out_dir", c.out_dir);
    read(j, "persist", c.persist);
    if (j.contains("env")) {
      const auto& e = j.at("env");
      reject_unknown(e, {"kind", "width", "height", "start", "goal", "traps", "slip", "gamma", "max_steps", "codec",
                         "jitter", "pointmass"},
                     "env");
      read(e, "kind", c.env.kind);
      read(e, "width", c.env.width);
      read(e, "height", c.env.height);
      if (e.contains("start")) c.env.start = cell_from(e.at("start"));
      if (e.contains("goal")) c.env.goal = cell_from(e.at("goal"));
      if (e.contains("traps")) {
        c.env.traps.clear();
        for (const auto& t : e.at("traps")) c.env.traps.push_back(cell_from(t));
      }
      read(e, "slip", c.env.slip);
      read(e, "gamma", c.env.gamma);
      read(e, "max_steps", c.env.max_steps);
      read(e, "codec", c.env.codec);
      read(e, "jitter", c.env.jitter);
      if (e.contains("pointmass")) {
        json merged = to_json(c.env.pointmass);
        merged.update(e.at("pointmass"));
        c.env.pointmass = pointmass_from_json(merged);
      }
    }
    if (j.contains("behavior")) {
      const auto& b = j.at("behavior");
      reject_unknown(b, {"epsilon", "gain", "damping"}, "behavior");
      read(b, "epsilon", c.behavior.epsilon);
      read(b, "gain", c.behavior.gain);
      read(b, "damping", c.behavior.damping);
    }
    if (j.contains("discretization")) {
      const auto& d = j.at("discretization");
      reject_unknown(d, {"extractor", "k", "k_min", "k_max", "rank", "sample_limit", "max_iters", "tol"},
                     "discretization");
      read(d, "extractor", c.discretization.extractor);
      read(d, "k", c.discretization.k);
      read(d, "k_min", c.discretization.k_min);
      read(d, "k_max", c.discretization.k_max);
      read(d, "rank", c.discretization.rank);
      read(d, "sample_limit", c.discretization.sample_limit);
      read(d, "max_iters", c.discretization.kmeans.max_iters);
      read(d, "tol", c.discretization.kmeans.tol);
    }
    if (j.contains("patterns")) {
      const auto& p = j.at("patterns");
      reject_unknown(p, {"l", "dedup", "budget_unit"}, "patterns");
      read(p, "l", c.patterns.l);
      read(p, "dedup", c.patterns.dedup);
      if (p.contains("budget_unit")) c.patterns.budget_unit = budget_unit_from_string(p.at("budget_unit").get<std::string>());
    }
    if (j.contains("attack")) {
      const auto& a = j.at("attack");
      reject_unknown(a, {"kinds", "rho", "eta", "n_candidates", "access_fraction"}, "attack");
      if (a.contains("kinds")) {
        c.attack.kinds.clear();
        for (const auto& k : a.at("kinds")) c.attack.kinds.push_back(attack_kind_from_string(k.get<std::string>()));
      }
      read(a, "rho", c.attack.rho);
      read(a, "eta", c.attack.eta);
      read(a, "n_candidates", c.attack.n_candidates);
      read(a, "access_fraction", c.attack.access_fraction);
    }
    if (j.contains("learners")) {
      const auto& l = j.at("learners");
      reject_unknown(l, {"kinds", "train", "action_bins"}, "learners");
      read(l, "kinds", c.learners.kinds);
      read(l, "action_bins", c.learners.action_bins);
      if (l.contains("train")) {
        reject_unknown(l.at("train"), {"iterations", "learning_rate", "gamma", "alpha", "seed", "tol", "ridge"},
                       "learners.train");
        c.learners.train = train_config_from_json(l.at("train"));
      }
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      reject_unknown(e, {"episodes", "seeds"}, "evaluation");
      read(e, "episodes", c.evaluation.episodes);
      read(e, "seeds", c.evaluation.seeds);
    }
    if (j.contains("coverage")) {
      const auto& v = j.at("coverage");
      reject_unknown(v, {"enabled", "lengths", "epsilon", "cap"}, "coverage");
      read(v, "enabled", c.coverage.enabled);
      read(v, "lengths", c.coverage.lengths);
      read(v, "epsilon", c.coverage.epsilon);
      read(v, "cap", c.coverage.cap);
    }
    if (j.contains("detection")) {
      const auto& d = j.at("detection");
      reject_unknown(d, {"enabled", "threshold_sigma"}, "detection");
      read(d, "enabled", c.detection.enabled);
      read(d, "threshold_sigma", c.detection.threshold_sigma);
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("config: ") + e.what());
  }
  c.check();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), 0);
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("out_dir");
  j.erase("persist");
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- building blocks --------------------------------------------------------------------------

Environment make_environment(const ExperimentConfig& config) {
  if (config.env.kind == "pointmass") {
    config.env.pointmass.check();
    return config.env.pointmass;
  }
  GridworldOptions opts;
  opts.start = config.env.start;
  opts.max_steps = config.env.max_steps;
  opts.codec = config.env.codec == "index" ? StateCodecKind::kIndex : StateCodecKind::kGridPosition;
  opts.jitter = config.env.jitter;
  return make_gridworld(config.env.width, config.env.height, config.env.goal, config.env.traps, config.env.slip,
                        config.env.gamma, opts);
}

LearnerSpace make_space(const Environment& env, const ExperimentConfig& config) {
  if (const auto* mdp = std::get_if<TabularMDP>(&env)) return space_of(*mdp);
  return space_of(std::get<PointMassEnv>(env), config.learners.action_bins);
}

TabularPolicy optimal_policy(const TabularMDP& mdp) {
  return greedy_policy(value_iteration(mdp), mdp.n_states, mdp.n_actions);
}

OfflineDataset generate_dataset(const Environment& env, const ExperimentConfig& config) {
  const std::uint64_t seed = derive_seed(config.seed, stage::kDataset);
  if (const auto* mdp = std::get_if<TabularMDP>(&env)) {
    const auto behavior = epsilon_greedy(optimal_policy(*mdp), config.behavior.epsilon);
    return rollout_transitions(*mdp, behavior, config.dataset_size, seed);
  }
  const auto& pm = std::get<PointMassEnv>(env);
  return rollout_transitions(pm, pointmass_behavior(pm, config.behavior.epsilon, config.behavior.gain,
                                                    config.behavior.damping),
                             config.dataset_size, seed);
}

Agent train_learner(const std::string& kind, const OfflineDataset& dataset, const LearnerSpace& space,
                    const ExperimentConfig& config) {
  TrainConfig tc = config.learners.train;
  tc.seed = derive_seed(config.seed, stage::kTrain);
  if (kind == "fqi") return fqi_train(dataset, space, tc);
  if (kind == "cql_lite") return cql_lite_train(dataset, space, tc);
  if (kind == "bc") return bc_train(dataset, space, tc);
  throw ArgumentError("unknown learner '" + kind + "'");
}

Discretization fit_discretization(const OfflineDataset& dataset, const Environment& env, const ExperimentConfig& config) {
  const auto& spec = config.discretization;
  Discretization out;
  if (spec.extractor == "learned_linear") {
    const auto q = std::get<QFunction>(train_learner("fqi", dataset, make_space(env, config), config));
    out.extractor = fit_learned_linear(dataset, q, spec.rank);
  } else {
    out.extractor = fit_standardizer(dataset);
  }
  const PointSet points = out.extractor.extract_all(dataset);
  const std::uint64_t seed = derive_seed(config.seed, stage::kCluster);
  std::size_t k = spec.k;
  if (k == 0) {
    out.elbow = elbow_select_k(points, spec.k_min, spec.k_max, seed, spec.kmeans, spec.sample_limit);
    k = out.elbow->k;
  }
  out.model = fit_kmeans(points, k, seed, spec.kmeans);
  return out;
}

double evaluate_acr(const Agent& agent, const Environment& env, const ExperimentConfig& config) {
  double total = 0.0;
  for (std::uint64_t s : config.evaluation.seeds)
    total += evaluate_policy(agent, env, config.evaluation.episodes, derive_seed(s, stage::kEval));
  return total / static_cast<double>(config.evaluation.seeds.size());
}

// --- run_experiment ---------------------------------------------------------------------------------

namespace {

template <class F>
auto in_stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

class Sink {
 public:
  Sink(bool enabled, fs::path dir) : enabled_(enabled), dir_(std::move(dir)) {
    if (enabled_) fs::create_directories(dir_);
  }
  void text(const std::string& name, const std::string& content) const {
    if (!enabled_) return;
    std::ofstream out(dir_ / name, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
  }
  void json_file(const std::string& name, const json& j) const { text(name, j.dump(2) + "\n"); }
  void dataset(const std::string& name, const OfflineDataset& d) const {
    if (enabled_) save(d, dir_ / name);
  }
  const fs::path& dir() const { return dir_; }

 private:
  bool enabled_;
  fs::path dir_;
};

json report_summary(const AttackReport& r) {
  json j = to_json(r);
  j.erase("windows");
  j.erase("poisoned_mask");
  return j;
}

json agent_json(const Agent& agent) {
  if (const auto* q = std::get_if<QFunction>(&agent)) return to_json(*q);
  return to_json(std::get<BcPolicy>(agent));
}

bool persist_agent(const Agent& agent) {
  if (std::holds_alternative<QFunction>(agent)) return true;
  return std::holds_alternative<TabularAgent>(std::get<BcPolicy>(agent));
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  config.check();
  RunResult result;
  result.config_hash = config_hash(config);
  result.run_dir = fs::path(config.out_dir) / result.config_hash;
  const Sink sink(config.persist, result.run_dir);
  sink.json_file("config.json", to_json(config));

  const Environment env = in_stage("env", [&] { return make_environment(config); });
  const LearnerSpace space = make_space(env, config);
  const auto* mdp = std::get_if<TabularMDP>(&env);

  const OfflineDataset clean = in_stage("generate", [&] { return generate_dataset(env, config); });
  result.n_transitions = clean.transition_count();
  sink.dataset("clean.ord", clean);

  // The attacker's view: the whole dataset, or one contiguous access window.
  const bool limited = config.attack.access_fraction < 1.0;
  AccessSlice view;
  if (limited) {
    view = in_stage("access", [&] {
      const auto w = restrict_access(clean, config.attack.access_fraction, derive_seed(config.seed, stage::kAccess));
      sink.json_file("access.json", {{"start", w.start}, {"length", w.length}});
      return slice(clean, w);
    });
  }
  const OfflineDataset& visible = limited ? view.data : clean;

  const Discretization disc = in_stage("discretize", [&] { return fit_discretization(visible, env, config); });
  result.k = disc.model.k;
  result.elbow = disc.elbow;
  sink.json_file("extractor.json", to_json(disc.extractor));
  sink.json_file("kmeans.json", to_json(disc.model));
  if (disc.elbow) sink.json_file("elbow.json", elbow_json(*disc.elbow));

  const AttackContext ctx = in_stage("patterns", [&] {
    return make_context(visible, disc.extractor, disc.model, config.patterns.l, config.patterns.dedup);
  });
  const RareSet rare = in_stage("patterns", [&] {
    return identify_rare(ctx.index, config.attack.rho, clean.transition_count(), config.patterns.budget_unit);
  });
  result.distinct_patterns = ctx.index.distinct();
  result.rare_patterns = rare.patterns.size();
  result.rare_footprint = rare.footprint;
  result.rare_warning = rare.warning;
  sink.json_file("units.json", to_json(ctx.units));
  sink.text("patterns.csv", to_csv(ctx.index));
  sink.json_file("patterns.json", to_json(ctx.index, false));
  sink.json_file("rare.json", to_json(rare));

  std::optional<TabularPolicy> target;
  auto coverage_of = [&](const OfflineDataset& d) -> std::optional<CoverageReport> {
    if (!config.coverage.enabled) return std::nullopt;
    if (mdp) {
      SequenceOptions opts;
      opts.cap = config.coverage.cap;
      opts.seed = derive_seed(config.seed, stage::kCoverage);
      return coverage_report(*mdp, *target, d, config.coverage.lengths, config.coverage.epsilon, opts);
    }
    if (d.longest_trajectory() < config.patterns.l) return coverage_proxy(PatternIndex{config.patterns.l, config.patterns.dedup, 0, {}});
    return coverage_proxy(extract_patterns(assign_units(d, ctx.extractor, ctx.model), config.patterns.l,
                                           config.patterns.dedup));
  };
  in_stage("coverage", [&] {
    if (mdp) target = optimal_policy(*mdp);
    result.clean_coverage = coverage_of(clean);
    if (result.clean_coverage) {
      sink.json_file("coverage_clean.json", to_json(*result.clean_coverage));
      if (mdp) sink.text("coverage_clean.csv", to_csv(*result.clean_coverage));
    }
    return 0;
  });

  std::optional<QFunction> attacker_q;
  if (std::find(config.attack.kinds.begin(), config.attack.kinds.end(), AttackKind::kValueTarget) !=
      config.attack.kinds.end()) {
    attacker_q = in_stage("attack", [&] { return std::get<QFunction>(train_learner("fqi", visible, space, config)); });
  }

  const CleanStats stats = clean_stats(clean);
  std::optional<DetectionResult> clean_detection;
  if (config.detection.enabled) {
    clean_detection = in_stage("detect", [&] {
      return detect_anomalies(stats, clean, config.detection.threshold_sigma, std::vector<std::size_t>{});
    });
    sink.json_file("detect_clean.json", to_json(*clean_detection));
  }

  std::vector<OfflineDataset> poisoned_sets;
  for (AttackKind kind : config.attack.kinds) {
    const std::string name = to_string(kind);
    AttackOutcome outcome;
    outcome.kind = kind;
    OfflineDataset poisoned = in_stage("attack", [&] {
      if (limited && kind == AttackKind::kDeleteRare)
        throw ArgumentError("delete_rare is not available with limited access");
      const PerturbationBudget budget{config.attack.eta, config.attack.n_candidates,
                                      derive_seed(config.seed, stage::kAttack)};
      AttackResult r = run_attack(visible, kind, ctx, rare, budget, attacker_q ? &*attacker_q : nullptr);
      outcome.report = std::move(r.report);
      if (!limited) return std::move(r.dataset);
      for (auto& i : outcome.report.poisoned_mask) i = view.global_index[i];
      return merge_slice(clean, AccessSlice{std::move(r.dataset), view.global_index});
    });
    sink.dataset("poisoned_" + name + ".ord", poisoned);
    sink.json_file("attack_" + name + ".json", to_json(outcome.report));
    sink.text("attack_" + name + "_windows.csv", windows_csv(outcome.report));

    in_stage("coverage", [&] {
      outcome.coverage = coverage_of(poisoned);
      if (outcome.coverage) sink.json_file("coverage_" + name + ".json", to_json(*outcome.coverage));
      return 0;
    });
    if (config.detection.enabled && kind != AttackKind::kDeleteRare) {
      outcome.detection = in_stage("detect", [&] {
        return detect_anomalies(stats, poisoned, config.detection.threshold_sigma, outcome.report.poisoned_mask);
      });
      outcome.detection_clean = clean_detection;
      sink.json_file("detect_" + name + ".json", to_json(*outcome.detection));
    }
    result.attacks.push_back(std::move(outcome));
    poisoned_sets.push_back(std::move(poisoned));
  }

  for (const auto& learner : config.learners.kinds) {
    const double clean_acr = in_stage("train", [&] {
      const Agent agent = train_learner(learner, clean, space, config);
      if (persist_agent(agent)) sink.json_file("model_" + learner + "_clean.json", agent_json(agent));
      return in_stage("evaluate", [&] { return evaluate_acr(agent, env, config); });
    });
    result.clean_acr[learner] = clean_acr;
    for (std::size_t i = 0; i < config.attack.kinds.size(); ++i) {
      const std::string name = to_string(config.attack.kinds[i]);
      LearnerResult row;
      row.learner = learner;
      row.attack = name;
      row.clean_acr = clean_acr;
      row.poisoned_acr = in_stage("train", [&] {
        const Agent agent = train_learner(learner, poisoned_sets[i], space, config);
        if (persist_agent(agent)) sink.json_file("model_" + learner + "_" + name + ".json", agent_json(agent));
        return in_stage("evaluate", [&] { return evaluate_acr(agent, env, config); });
      });
      if (clean_acr != 0.0) row.aer = compute_aer(clean_acr, row.poisoned_acr);
      result.rows.push_back(std::move(row));
    }
  }

  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  sink.json_file("result.json", to_json(result));
  sink.json_file("timing.json", {{"wall_seconds", result.wall_seconds}});
  return result;
}

json to_json(const RunResult& r) {
  json attacks = json::array();
  for (const auto& a : r.attacks) {
    json j = {{"kind", to_string(a.kind)}, {"report", report_summary(a.report)}};
    j["coverage"] = a.coverage ? to_json(*a.coverage) : json(nullptr);
    j["detection"] = a.detection ? to_json(*a.detection) : json(nullptr);
    j["detection_clean"] = a.detection_clean ? to_json(*a.detection_clean) : json(nullptr);
    attacks.push_back(std::move(j));
  }
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"learner", row.learner},
                    {"attack", row.attack},
                    {"clean_acr", row.clean_acr},
                    {"poisoned_acr", row.poisoned_acr},
                    {"aer", row.aer ? json(*row.aer) : json(nullptr)}});
  }
  return {{"config_hash", r.config_hash},
          {"n_transitions", r.n_transitions},
          {"k", r.k},
          {"elbow", r.elbow ? elbow_json(*r.elbow) : json(nullptr)},
          {"distinct_patterns", r.distinct_patterns},
          {"rare_patterns", r.rare_patterns},
          {"rare_footprint", r.rare_footprint},
          {"rare_warning", r.rare_warning},
          {"clean_coverage", r.clean_coverage ? to_json(*r.clean_coverage) : json(nullptr)},
          {"clean_acr", r.clean_acr},
          {"attacks", std::move(attacks)},
          {"rows", std::move(rows)}};
}

// --- sweeps --------------------------------------------------------------------------------------

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kRho: return "rho";
    case SweepAxis::kEta: return "eta";
    case SweepAxis::kL: return "l";
    case SweepAxis::kK: return "k";
    case SweepAxis::kAccessFraction: return "access_fraction";
    case SweepAxis::kDedup: return "dedup";
    case SweepAxis::kAttackKind: return "attack_kind";
  }
  return "unknown";
}

SweepAxis sweep_axis_from_string(const std::string& text) {
  for (auto a : {SweepAxis::kRho, SweepAxis::kEta, SweepAxis::kL, SweepAxis::kK, SweepAxis::kAccessFraction,
                 SweepAxis::kDedup, SweepAxis::kAttackKind})
    if (to_string(a) == text) return a;
  throw ArgumentError("unknown sweep axis '" + text + "'");
}

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, const json& value) {
  ExperimentConfig c = base;
  try {
    switch (axis) {
      case SweepAxis::kRho: c.attack.rho = value.get<double>(); break;
      case SweepAxis::kEta: c.attack.eta = value.get<double>(); break;
      case SweepAxis::kL: c.patterns.l = value.get<std::size_t>(); break;
      case SweepAxis::kK: c.discretization.k = value.get<std::size_t>(); break;
      case SweepAxis::kAccessFraction: c.attack.access_fraction = value.get<double>(); break;
      case SweepAxis::kDedup:
        if (value.is_string()) {
          const auto s = value.get<std::string>();
          if (s != "on" && s != "off" && s != "true" && s != "false") throw ArgumentError("dedup values are on/off");
          c.patterns.dedup = s == "on" || s == "true";
        } else {
          c.patterns.dedup = value.get<bool>();
        }
        break;
      case SweepAxis::kAttackKind: c.attack.kinds = {attack_kind_from_string(value.get<std::string>())}; break;
    }
  } catch (const json::exception& e) {
    throw ArgumentError("bad value " + value.dump() + " for axis " + to_string(axis) + ": " + e.what());
  }
  c.check();
  return c;
}

SweepResult sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<json>& values) {
  if (values.empty()) throw ArgumentError("sweep needs at least one value");
  SweepResult out;
  out.axis = axis;
  for (const auto& v : values) {
    try {
      out.rows.push_back({v, run_experiment(apply_axis(base, axis, v))});
    } catch (const std::exception& e) {
      out.failures.push_back({v, e.what()});
    }
  }
  return out;
}

namespace {

std::string csv_number(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string csv_value(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

std::string to_csv(const SweepResult& sw) {
  std::vector<std::string> columns{to_string(sw.axis), "config_hash", "k", "distinct_patterns", "rare_patterns",
                                   "rare_footprint"};
  std::vector<std::map<std::string, std::string>> cells;
  auto add = [&](std::map<std::string, std::string>& row, const std::string& key, std::string val) {
    if (std::find(columns.begin(), columns.end(), key) == columns.end()) columns.push_back(key);
    row[key] = std::move(val);
  };
  for (const auto& r : sw.rows) {
    std::map<std::string, std::string> row;
    const auto& res = r.result;
    row[to_string(sw.axis)] = csv_value(r.value);
    row["config_hash"] = res.config_hash;
    row["k"] = std::to_string(res.k);
    row["distinct_patterns"] = std::to_string(res.distinct_patterns);
    row["rare_patterns"] = std::to_string(res.rare_patterns);
    row["rare_footprint"] = std::to_string(res.rare_footprint);
    for (const auto& a : res.attacks) {
      const std::string n = to_string(a.kind);
      add(row, n + "_poisoned_fraction", csv_number(a.report.poisoned_fraction));
      add(row, n + "_distinct_after", std::to_string(a.report.distinct_after));
      add(row, n + "_rare_after", std::to_string(a.report.rare_after));
      if (a.detection) add(row, n + "_detect_f1", csv_number(a.detection->f1));
    }
    for (const auto& [learner, acr] : res.clean_acr) add(row, learner + "_clean_acr", csv_number(acr));
    for (const auto& x : res.rows) {
      add(row, x.learner + "_" + x.attack + "_poisoned_acr", csv_number(x.poisoned_acr));
      add(row, x.learner + "_" + x.attack + "_aer", x.aer ? csv_number(*x.aer) : std::string());
    }
    cells.push_back(std::move(row));
  }
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
  out += "\n";
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out += ",";
      const auto it = row.find(columns[i]);
      if (it != row.end()) out += it->second;
    }
    out += "\n";
  }
  return out;
}

json to_json(const SweepResult& sw) {
  json rows = json::array();
  for (const auto& r : sw.rows) rows.push_back({{"value", r.value}, {"result", to_json(r.result)}});
  json failures = json::array();
  for (const auto& f : sw.failures) failures.push_back({{"value", f.value}, {"error", f.error}});
  return {{"axis", to_string(sw.axis)}, {"rows", std::move(rows)}, {"failures", std::move(failures)}};
}

}  // namespace seqcov
