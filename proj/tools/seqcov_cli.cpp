#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "seqcov/errors.hpp"
#include "seqcov/harness.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace seqcov;

namespace {

constexpr int kUsage = 1;
constexpr int kStageFailure = 2;

/// Bad flags or unreadable inputs.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "json";
};

struct Inputs {
  std::string data;
  std::string clean;
  std::string units;
  std::string extractor;
  std::string kmeans;
  std::string model;
  std::string report;
  std::string learner;
  std::string attack;
  std::string axis;
  std::string values;
};

template <class F>
auto usage(F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

json read_json(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string(flag) + " is required");
  return usage([&] {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return json::parse(in);
  });
}

OfflineDataset read_dataset(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string(flag) + " is required");
  return usage([&] { return load(path); });
}

ExperimentConfig make_config(const Common& c) {
  ExperimentConfig config = c.config.empty() ? ExperimentConfig{} : usage([&] { return load_config(c.config); });
  if (c.seed) config.seed = *c.seed;
  if (!c.out.empty()) config.out_dir = c.out;
  usage([&] {
    config.check();
    return 0;
  });
  return config;
}

fs::path out_dir(const ExperimentConfig& config) {
  fs::path dir(config.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string kv_csv(const json& flat) {
  std::ostringstream out;
  out << "key,value\n";
  for (const auto& [k, v] : flat.items()) out << k << ',' << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
  return out.str();
}

void emit(const Common& c, const json& j, const std::string& csv) {
  if (c.format == "csv")
    std::cout << csv;
  else
    std::cout << j.dump(2) << '\n';
}

std::string pick_learner(const Inputs& in, const ExperimentConfig& config) {
  if (!in.learner.empty()) return in.learner;
  if (config.learners.kinds.empty()) throw UsageError("no learner given");
  return config.learners.kinds.front();
}

Agent read_agent(const std::string& path) {
  const json j = read_json(path, "--model");
  return usage([&]() -> Agent {
    if (j.at("learner").get<std::string>() == "bc") return bc_policy_from_json(j.at("model"));
    return qfunction_from_json(j.at("model"));
  });
}

json agent_json(const std::string& learner, const Agent& agent) {
  json model = std::holds_alternative<QFunction>(agent) ? to_json(std::get<QFunction>(agent))
                                                        : to_json(std::get<BcPolicy>(agent));
  return {{"learner", learner}, {"model", std::move(model)}};
}

struct Clustering {
  FeatureExtractor extractor;
  KMeansModel model;
};

Clustering read_clustering(const Inputs& in) {
  const json e = read_json(in.extractor, "--extractor");
  const json k = read_json(in.kmeans, "--kmeans");
  return usage([&] { return Clustering{extractor_from_json(e), kmeans_from_json(k)}; });
}

// --- subcommands ---------------------------------------------------------------------------------

int cmd_gen(const Common& c) {
  const auto config = make_config(c);
  const auto env = make_environment(config);
  const auto data = generate_dataset(env, config);
  const auto dir = out_dir(config);
  save(data, dir / "dataset.ord");
  json j = {{"dataset", (dir / "dataset.ord").string()},
            {"trajectories", data.trajectories.size()},
            {"transitions", data.transition_count()},
            {"valid", validate(data).ok()}};
  emit(c, j, kv_csv(j));
  return 0;
}

int cmd_discretize(const Common& c, const Inputs& in) {
  const auto config = make_config(c);
  const auto data = read_dataset(in.data, "--data");
  const auto env = make_environment(config);
  const auto disc = fit_discretization(data, env, config);
  const auto units = assign_units(data, disc.extractor, disc.model);
  const auto dir = out_dir(config);
  write_json(dir / "extractor.json", to_json(disc.extractor));
  write_json(dir / "kmeans.json", to_json(disc.model));
  write_json(dir / "units.json", to_json(units));
  json j = {{"k", disc.model.k}, {"inertia", disc.model.inertia}, {"iterations", disc.model.iterations}};
  std::ostringstream csv;
  csv << "k,inertia\n";
  if (disc.elbow) {
    j["elbow"] = {{"ks", disc.elbow->ks}, {"inertias", disc.elbow->inertias}};
    write_json(dir / "elbow.json", j["elbow"]);
    csv.precision(17);
    for (std::size_t i = 0; i < disc.elbow->ks.size(); ++i) csv << disc.elbow->ks[i] << ',' << disc.elbow->inertias[i] << '\n';
  } else {
    csv << disc.model.k << ',' << disc.model.inertia << '\n';
  }
  emit(c, j, csv.str());
  return 0;
}

int cmd_patterns(const Common& c, const Inputs& in) {
  const auto config = make_config(c);
  const json uj = read_json(in.units, "--units");
  const auto units = usage([&] { return units_from_json(uj); });
  const auto index = extract_patterns(units, config.patterns.l, config.patterns.dedup);
  const auto rare = identify_rare(index, config.attack.rho, units.labels.size(), config.patterns.budget_unit);
  const auto dir = out_dir(config);
  write_text(dir / "patterns.csv", to_csv(index));
  write_json(dir / "patterns.json", to_json(index, false));
  write_json(dir / "rare.json", to_json(rare));
  json j = {{"l", index.l},
            {"dedup", index.dedup},
            {"windows", index.total_windows},
            {"distinct", index.distinct()},
            {"rare_patterns", rare.patterns.size()},
            {"rare_footprint", rare.footprint},
            {"budget", rare.budget},
            {"warning", rare.warning}};
  emit(c, j, to_csv(index));
  return 0;
}

int cmd_coverage(const Common& c, const Inputs& in) {
  const auto config = make_config(c);
  const auto data = read_dataset(in.data, "--data");
  const auto env = make_environment(config);
  CoverageReport report;
  if (const auto* mdp = std::get_if<TabularMDP>(&env)) {
    SequenceOptions opts;
    opts.cap = config.coverage.cap;
    opts.seed = derive_seed(config.seed, stage::kCoverage);
    report = coverage_report(*mdp, optimal_policy(*mdp), data, config.coverage.lengths, config.coverage.epsilon, opts);
  } else {
    const auto cl = read_clustering(in);
    report = coverage_proxy(
        extract_patterns(assign_units(data, cl.extractor, cl.model), config.patterns.l, config.patterns.dedup));
  }
  write_json(out_dir(config) / "coverage.json", to_json(report));
  emit(c, to_json(report), report.kind == "exact" ? to_csv(report) : kv_csv({{"distinct", report.distinct_patterns},
                                                                             {"min_frequency", report.min_frequency}}));
  return 0;
}

int cmd_poison(const Common& c, const Inputs& in) {
  const auto config = make_config(c);
  const auto data = read_dataset(in.data, "--data");
  const auto cl = read_clustering(in);
  const AttackKind kind = in.attack.empty() ? config.attack.kinds.front()
                                            : usage([&] { return attack_kind_from_string(in.attack); });
  const auto ctx = make_context(data, cl.extractor, cl.model, config.patterns.l, config.patterns.dedup);
  const auto rare = identify_rare(ctx.index, config.attack.rho, data.transition_count(), config.patterns.budget_unit);
  std::optional<QFunction> q;
  if (kind == AttackKind::kValueTarget) {
    if (!in.model.empty()) {
      const Agent agent = read_agent(in.model);
      if (!std::holds_alternative<QFunction>(agent)) throw UsageError("value_target needs a Q model");
      q = std::get<QFunction>(agent);
    } else {
      const auto env = make_environment(config);
      q = std::get<QFunction>(train_learner("fqi", data, make_space(env, config), config));
    }
  }
  const PerturbationBudget budget{config.attack.eta, config.attack.n_candidates,
                                  derive_seed(config.seed, stage::kAttack)};
  const auto result = run_attack(data, kind, ctx, rare, budget, q ? &*q : nullptr);
  const auto dir = out_dir(config);
  save(result.dataset, dir / "poisoned.ord");
  write_json(dir / "attack.json", to_json(result.report));
  write_text(dir / "attack_windows.csv", windows_csv(result.report));
  json j = to_json(result.report);
  j.erase("windows");
  j.erase("poisoned_mask");
  emit(c, j, windows_csv(result.report));
  return 0;
}

int cmd_train(const Common& c, const Inputs& in) {
  const auto config = make_config(c);
  const auto data = read_dataset(in.data, "--data");
  const std::string learner = pick_learner(in, config);
  const auto env = make_environment(config);
  const Agent agent = train_learner(learner, data, make_space(env, config), config);
  const auto path = out_dir(config) / ("model_" + learner + ".json");
  write_json(path, agent_json(learner, agent));
  json j = {{"learner", learner}, {"model", path.string()}, {"transitions", data.transition_count()}};
  emit(c, j, kv_csv(j));
  return 0;
}

int cmd_eval(const Common& c, const Inputs& in) {
  const auto config = make_config(c);
  const Agent agent = read_agent(in.model);
  const auto env = make_environment(config);
  json j = {{"acr", evaluate_acr(agent, env, config)},
            {"episodes", config.evaluation.episodes},
            {"seeds", config.evaluation.seeds}};
  emit(c, j, kv_csv(j));
  return 0;
}

int cmd_detect(const Common& c, const Inputs& in) {
  const auto config = make_config(c);
  const auto clean = read_dataset(in.clean, "--clean");
  const auto data = read_dataset(in.data, "--data");
  std::vector<std::size_t> mask;
  if (!in.report.empty()) {
    const json r = read_json(in.report, "--report");
    mask = usage([&] { return r.at("poisoned_mask").get<std::vector<std::size_t>>(); });
  }
  const auto result = detect_anomalies(clean_stats(clean), data, config.detection.threshold_sigma, mask);
  write_json(out_dir(config) / "detect.json", to_json(result, true));
  const json j = to_json(result);
  emit(c, j,
       kv_csv({{"precision", result.precision},
               {"recall", result.recall},
               {"f1", result.f1},
               {"flagged", result.flagged.size()},
               {"positives", result.positives}}));
  return 0;
}

std::string rows_csv(const RunResult& r) {
  std::ostringstream out;
  out.precision(17);
  out << "learner,attack,clean_acr,poisoned_acr,aer\n";
  for (const auto& row : r.rows) {
    out << row.learner << ',' << row.attack << ',' << row.clean_acr << ',' << row.poisoned_acr << ',';
    if (row.aer) out << *row.aer;
    out << '\n';
  }
  return out.str();
}

int cmd_run(const Common& c) {
  const auto config = make_config(c);
  const auto result = run_experiment(config);
  json j = to_json(result);
  j["run_dir"] = result.run_dir.string();
  j["wall_seconds"] = result.wall_seconds;
  emit(c, j, rows_csv(result));
  return 0;
}

int cmd_sweep(const Common& c, const Inputs& in) {
  const auto config = make_config(c);
  if (in.axis.empty()) throw UsageError("--axis is required");
  const SweepAxis axis = usage([&] { return sweep_axis_from_string(in.axis); });
  const auto values = usage([&] {
    const json v = json::parse(in.values);
    if (!v.is_array() || v.empty()) throw std::runtime_error("--values must be a non-empty JSON array");
    std::vector<json> out(v.begin(), v.end());
    for (const auto& x : out) apply_axis(config, axis, x).check();
    return out;
  });
  const auto result = sweep(config, axis, values);
  const auto dir = out_dir(config);
  write_text(dir / ("sweep_" + to_string(axis) + ".csv"), to_csv(result));
  write_json(dir / ("sweep_" + to_string(axis) + ".json"), to_json(result));
  emit(c, to_json(result), to_csv(result));
  for (const auto& f : result.failures) std::cerr << "failed " << f.value.dump() << ": " << f.error << '\n';
  return result.rows.empty() ? kStageFailure : 0;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Master seed, overrides the config");
  app->add_option("--out", c.out, "Output directory, overrides the config");
  app->add_option("--format", c.format, "Summary format on stdout")->check(CLI::IsMember({"json", "csv"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqcov: sequence-level coverage analysis and CSDPC poisoning for offline RL datasets"};
  app.require_subcommand(1);
  Common common;
  Inputs in;

  auto* gen = app.add_subcommand("gen", "Generate a behavior dataset");
  auto* disc = app.add_subcommand("discretize", "Fit the feature extractor and k-means; write decision units");
  auto* pat = app.add_subcommand("patterns", "Extract decision patterns and the rare set from units");
  auto* cov = app.add_subcommand("coverage", "Coverage report of a dataset");
  auto* poi = app.add_subcommand("poison", "Run one attack on a dataset");
  auto* trn = app.add_subcommand("train", "Train an offline learner");
  auto* evl = app.add_subcommand("eval", "Average cumulative reward of a trained model");
  auto* det = app.add_subcommand("detect", "z-score anomaly detection against a poison mask");
  auto* run = app.add_subcommand("run", "Full pipeline for one config");
  auto* swp = app.add_subcommand("sweep", "One run per value of an axis");
  for (auto* s : {gen, disc, pat, cov, poi, trn, evl, det, run, swp}) add_common(s, common);

  for (auto* s : {disc, cov, poi, trn, det}) s->add_option("--data", in.data, "Dataset (.ord)");
  pat->add_option("--units", in.units, "units.json from discretize");
  for (auto* s : {cov, poi}) {
    s->add_option("--extractor", in.extractor, "extractor.json");
    s->add_option("--kmeans", in.kmeans, "kmeans.json");
  }
  poi->add_option("--attack", in.attack, "Attack kind (default: first in config)");
  poi->add_option("--model", in.model, "Q model for value_target");
  trn->add_option("--learner", in.learner, "fqi, cql_lite or bc")->check(CLI::IsMember({"fqi", "cql_lite", "bc"}));
  evl->add_option("--model", in.model, "Model file from train");
  det->add_option("--clean", in.clean, "Clean reference dataset (.ord)");
  det->add_option("--report", in.report, "attack.json with the poison mask");
  swp->add_option("--axis", in.axis, "rho, eta, l, k, access_fraction, dedup or attack_kind");
  swp->add_option("--values", in.values, "JSON array of values")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*gen) return cmd_gen(common);
    if (*disc) return cmd_discretize(common, in);
    if (*pat) return cmd_patterns(common, in);
    if (*cov) return cmd_coverage(common, in);
    if (*poi) return cmd_poison(common, in);
    if (*trn) return cmd_train(common, in);
    if (*evl) return cmd_eval(common, in);
    if (*det) return cmd_detect(common, in);
    if (*run) return cmd_run(common);
    if (*swp) return cmd_sweep(common, in);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const StageError& e) {
    std::cerr << "stage " << e.stage() << " failed: " << e.what() << '\n';
    return kStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return kStageFailure;
  }
  return kUsage;
}
