#include "seqcov/poison.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "seqcov/errors.hpp"
#include "seqcov/rng.hpp"

namespace seqcov {

using nlohmann::json;

namespace {

constexpr std::uint64_t kRandomTargetStream = 0x5241'4e44;  // independent of the per-window streams

double inf_norm(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

double change_ratio(std::span<const double> before, std::span<const double> after) {
  double diff = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) diff = std::max(diff, std::abs(after[i] - before[i]));
  if (diff == 0.0) return 0.0;
  const double n = inf_norm(before);
  return n == 0.0 ? std::numeric_limits<double>::infinity() : diff / n;
}

}  // namespace

void PerturbationBudget::check() const {
  if (!(eta >= 0.0 && eta < 1.0)) throw ArgumentError("eta must lie in [0, 1)");
  if (n_candidates < 1) throw ArgumentError("n_candidates must be >= 1");
}

std::vector<double> perturb_vector(std::span<const double> x, double eta, Rng& rng) {
  std::vector<double> out(x.begin(), x.end());
  const double bound = eta * inf_norm(x);
  if (bound == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double zeta = bound * (1.0 - 1e-9) * (2.0 * rng.open01() - 1.0);
    const double moved = x[i] + zeta;
    // Rounding in x + zeta may land on the bound; such coordinates stay put.
    out[i] = std::abs(moved - x[i]) < bound ? moved : x[i];
  }
  return out;
}

namespace {

/// Candidates over a subset of steps; candidate 0 is the unperturbed input.
std::vector<CandidateWindow> make_candidates(const std::vector<const Transition*>& steps, double eta,
                                             std::size_t n_candidates, std::uint64_t seed) {
  std::vector<CandidateWindow> out(n_candidates);
  Rng rng(seed);
  for (std::size_t c = 0; c < n_candidates; ++c) {
    auto& cand = out[c];
    for (const Transition* x : steps) {
      if (c == 0) {
        cand.states.push_back(x->state);
        cand.actions.push_back(x->action);
      } else {
        cand.states.push_back(perturb_vector(x->state, eta, rng));
        cand.actions.push_back(perturb_vector(x->action, eta, rng));
      }
    }
  }
  return out;
}

}  // namespace

std::vector<CandidateWindow> gen_candidates(std::span<const Transition> window, const PerturbationBudget& budget) {
  budget.check();
  std::vector<const Transition*> steps;
  for (const auto& x : window) steps.push_back(&x);
  return make_candidates(steps, budget.eta, budget.n_candidates, budget.seed);
}

AttackContext make_context(const OfflineDataset& dataset, FeatureExtractor extractor, KMeansModel model, std::size_t l,
                           bool dedup) {
  AttackContext ctx{std::move(extractor), std::move(model), {}, {}};
  ctx.units = assign_units(dataset, ctx.extractor, ctx.model);
  ctx.index = extract_patterns(ctx.units, l, dedup);
  return ctx;
}

CandidateScore evaluate_candidate(const CandidateWindow& candidate, const FeatureExtractor& extractor,
                                  const KMeansModel& model, const PatternIndex& index) {
  if (candidate.states.size() != candidate.actions.size()) throw ArgumentError("candidate is malformed");
  std::vector<Label> labels;
  for (std::size_t i = 0; i < candidate.states.size(); ++i)
    labels.push_back(static_cast<Label>(model.nearest(extractor.extract(candidate.states[i], candidate.actions[i]))));
  CandidateScore s;
  s.pattern = pattern_of(labels, index.dedup);
  s.count = index.count(s.pattern);
  return s;
}

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kNone: return "none";
    case AttackKind::kCsdpc: return "csdpc";
    case AttackKind::kPerturbOnly: return "perturb_only";
    case AttackKind::kDeleteRare: return "delete_rare";
    case AttackKind::kRandomTarget: return "random_target";
    case AttackKind::kValueTarget: return "value_target";
    case AttackKind::kDiscreteSteps: return "discrete_steps";
  }
  return "unknown";
}

AttackKind attack_kind_from_string(const std::string& text) {
  for (auto k : {AttackKind::kNone, AttackKind::kCsdpc, AttackKind::kPerturbOnly, AttackKind::kDeleteRare,
                 AttackKind::kRandomTarget, AttackKind::kValueTarget, AttackKind::kDiscreteSteps})
    if (to_string(k) == text) return k;
  throw ArgumentError("unknown attack kind '" + text + "'");
}

namespace {

struct Target {
  Window window;
  std::vector<std::size_t> positions;  ///< flat indices to perturb
  std::size_t region_begin = 0;        ///< flat range whose windows are scored
  std::size_t region_end = 0;
};

enum class Selection { kMostFrequent, kFirstPerturbed };

class Rewriter {
 public:
  Rewriter(const OfflineDataset& clean, const AttackContext& ctx, const PerturbationBudget& budget, std::size_t limit)
      : clean_(clean),
        ctx_(ctx),
        budget_(budget),
        limit_(limit),
        locator_(clean),
        poisoned_(clean),
        labels_(ctx.units.labels),
        written_(clean.transition_count(), 0) {}

  void run(std::vector<Target> targets, Selection selection, std::vector<WindowOutcome>& outcomes) {
    std::stable_sort(targets.begin(), targets.end(),
                     [](const Target& a, const Target& b) { return a.window.flat_start < b.window.flat_start; });
    for (const auto& t : targets) outcomes.push_back(process(t, selection));
  }

  OfflineDataset take() { return std::move(poisoned_); }

 private:
  Transition& mutable_at(std::size_t flat) {
    const auto r = locator_.locate(flat);
    return poisoned_.trajectories[r.trajectory].transitions[r.step];
  }
  const Transition& clean_at(std::size_t flat) const {
    const auto r = locator_.locate(flat);
    return clean_.trajectories[r.trajectory].transitions[r.step];
  }

  DecisionPattern window_pattern(const Window& w, const std::vector<Label>& labels, std::size_t base) const {
    return pattern_of(std::span<const Label>(labels).subspan(w.flat_start - base, w.length), ctx_.index.dedup);
  }

  WindowOutcome process(const Target& t, Selection selection) {
    WindowOutcome out;
    out.window = t.window;
    const std::size_t base = t.region_begin;
    std::vector<Label> region(labels_.begin() + static_cast<std::ptrdiff_t>(t.region_begin),
                              labels_.begin() + static_cast<std::ptrdiff_t>(t.region_end));
    out.before = window_pattern(t.window, region, base);
    out.after = out.before;

    std::vector<std::size_t> free;
    for (std::size_t p : t.positions)
      if (!written_[p]) free.push_back(p);
    if (free.empty() || written_count_ + free.size() > limit_) return out;

    std::vector<const Transition*> steps;
    for (std::size_t p : free) steps.push_back(&clean_at(p));
    const std::size_t n = selection == Selection::kFirstPerturbed ? std::max<std::size_t>(budget_.n_candidates, 2)
                                                                  : budget_.n_candidates;
    const auto cands = make_candidates(steps, budget_.eta, n, derive_seed(budget_.seed, t.window.flat_start));

    const std::size_t l = ctx_.index.l;
    std::size_t best = 0, best_score = 0;
    bool best_differs = false;
    DecisionPattern best_pattern = out.before;
    for (std::size_t c = 0; c < cands.size(); ++c) {
      if (selection == Selection::kFirstPerturbed && c != 1) continue;
      std::vector<Label> trial = region;
      for (std::size_t i = 0; i < free.size(); ++i)
        trial[free[i] - base] = static_cast<Label>(
            ctx_.model.nearest(ctx_.extractor.extract(cands[c].states[i], cands[c].actions[i])));
      std::size_t score = 0;
      for (std::size_t s = 0; s + l <= trial.size(); ++s)
        score += ctx_.index.count(pattern_of(std::span<const Label>(trial).subspan(s, l), ctx_.index.dedup));
      const DecisionPattern pat = window_pattern(t.window, trial, base);
      const bool differs = pat != out.before;
      const bool better = selection == Selection::kFirstPerturbed || score > best_score ||
                          (score == best_score && differs && !best_differs) ||
                          (score == best_score && differs == best_differs && best == 0);
      if (better) {
        best = c;
        best_score = score;
        best_differs = differs;
        best_pattern = pat;
      }
    }
    out.candidate = best;
    if (best == 0) return out;

    for (std::size_t i = 0; i < free.size(); ++i) {
      const std::size_t p = free[i];
      Transition& x = mutable_at(p);
      x.state = cands[best].states[i];
      x.action = cands[best].actions[i];
      written_[p] = 1;
      ++written_count_;
      labels_[p] = static_cast<Label>(ctx_.model.nearest(ctx_.extractor.extract(x.state, x.action)));
      const Transition& c = clean_at(p);
      out.max_ratio = std::max({out.max_ratio, change_ratio(c.state, x.state), change_ratio(c.action, x.action)});
    }
    out.after = best_pattern;
    return out;
  }

  const OfflineDataset& clean_;
  const AttackContext& ctx_;
  const PerturbationBudget& budget_;
  std::size_t limit_;
  TransitionLocator locator_;
  OfflineDataset poisoned_;
  std::vector<Label> labels_;
  std::vector<char> written_;
  std::size_t written_count_ = 0;
};

void check_context(const OfflineDataset& dataset, const AttackContext& ctx) {
  if (ctx.units.labels.size() != dataset.transition_count())
    throw ArgumentError("attack context was built from a different dataset");
}

/// Flat [begin, end) of the trajectory holding `flat`.
std::pair<std::size_t, std::size_t> trajectory_bounds(const TransitionLocator& loc, std::size_t flat) {
  const auto r = loc.locate(flat);
  return {loc.offsets()[r.trajectory], loc.offsets()[r.trajectory + 1]};
}

Target window_target(const Window& w) {
  Target t;
  t.window = w;
  for (std::size_t i = 0; i < w.length; ++i) t.positions.push_back(w.flat_start + i);
  t.region_begin = w.flat_start;
  t.region_end = w.flat_start + w.length;
  return t;
}

std::vector<Window> all_windows(const PatternIndex& index) {
  std::vector<Window> ws;
  for (const auto& [p, e] : index.patterns) ws.insert(ws.end(), e.windows.begin(), e.windows.end());
  std::sort(ws.begin(), ws.end(), [](const Window& a, const Window& b) { return a.flat_start < b.flat_start; });
  return ws;
}

/// Greedily keeps windows, in the given order, while their joint footprint stays within `limit`.
std::vector<Window> fill_footprint(const std::vector<Window>& ordered, std::size_t limit, std::size_t n) {
  std::vector<char> covered(n, 0);
  std::size_t used = 0;
  std::vector<Window> out;
  for (const auto& w : ordered) {
    if (used == limit) break;
    std::size_t fresh = 0;
    for (std::size_t i = 0; i < w.length; ++i) fresh += covered[w.flat_start + i] ? 0 : 1;
    if (used + fresh > limit) continue;
    for (std::size_t i = 0; i < w.length; ++i) covered[w.flat_start + i] = 1;
    used += fresh;
    out.push_back(w);
  }
  return out;
}

void finish_report(AttackReport& r, const OfflineDataset& clean, const OfflineDataset& result,
                   const AttackContext& ctx, const RareSet& rare, const PerturbationBudget& budget) {
  r.clean_transitions = clean.transition_count();
  r.result_transitions = result.transition_count();
  r.distinct_before = ctx.index.distinct();
  if (r.kind != AttackKind::kDeleteRare) {
    r.poisoned_mask.clear();
    std::size_t flat = 0;
    for (std::size_t t = 0; t < clean.trajectories.size(); ++t) {
      const auto& a = clean.trajectories[t].transitions;
      const auto& b = result.trajectories[t].transitions;
      for (std::size_t i = 0; i < a.size(); ++i, ++flat) {
        const double ratio = std::max(change_ratio(a[i].state, b[i].state), change_ratio(a[i].action, b[i].action));
        if (ratio > 0.0) {
          r.poisoned_mask.push_back(flat);
          r.max_perturbation_ratio = std::max(r.max_perturbation_ratio, ratio);
        }
      }
    }
  }
  r.poisoned_transitions = r.poisoned_mask.size();
  r.poisoned_fraction =
      r.clean_transitions ? static_cast<double>(r.poisoned_transitions) / static_cast<double>(r.clean_transitions) : 0.0;

  PatternIndex after;
  if (result.transition_count() > 0 && result.longest_trajectory() >= ctx.index.l) {
    after = extract_patterns(assign_units(result, ctx.extractor, ctx.model), ctx.index.l, ctx.index.dedup);
  }
  r.distinct_after = after.distinct();
  r.rare.clear();
  r.rare_before = r.rare_after = 0;
  for (const auto& p : rare.patterns) {
    PatternCount pc{p, ctx.index.count(p), after.count(p)};
    r.rare_before += pc.before;
    r.rare_after += pc.after;
    r.rare.push_back(std::move(pc));
  }
  if (rare.empty()) {
    r.warning = true;
    r.message = "rare set is empty; dataset left unchanged";
  }
  r.config = {{"kind", to_string(r.kind)},
              {"budget", to_json(budget)},
              {"l", ctx.index.l},
              {"dedup", ctx.index.dedup},
              {"k", ctx.model.k},
              {"rare_budget", rare.budget},
              {"rare_footprint", rare.footprint},
              {"rare_unit", to_string(rare.unit)}};
}

AttackResult rewrite(const OfflineDataset& dataset, AttackKind kind, const AttackContext& ctx, const RareSet& rare,
                     const PerturbationBudget& budget, std::vector<Target> targets, Selection selection) {
  Rewriter w(dataset, ctx, budget, rare.footprint);
  AttackReport report;
  report.kind = kind;
  w.run(std::move(targets), selection, report.windows);
  AttackResult out{w.take(), {}};
  out.dataset.poisoned = dataset.poisoned || kind != AttackKind::kNone;
  finish_report(report, dataset, out.dataset, ctx, rare, budget);
  out.report = std::move(report);
  return out;
}

AttackResult delete_rare(const OfflineDataset& dataset, const AttackContext& ctx, const RareSet& rare,
                         const PerturbationBudget& budget) {
  const auto removed = rare.transitions();
  std::vector<char> cut(dataset.transition_count(), 0);
  for (std::size_t i : removed) cut[i] = 1;
  OfflineDataset out;
  out.meta = dataset.meta;
  out.poisoned = true;
  std::size_t flat = 0;
  for (const auto& traj : dataset.trajectories) {
    Trajectory piece;
    for (const auto& x : traj.transitions) {
      if (cut[flat++]) {
        if (!piece.transitions.empty()) {
          piece.id = static_cast<std::int64_t>(out.trajectories.size());
          out.trajectories.push_back(std::move(piece));
          piece = {};
        }
        continue;
      }
      piece.transitions.push_back(x);
    }
    if (!piece.transitions.empty()) {
      piece.id = static_cast<std::int64_t>(out.trajectories.size());
      out.trajectories.push_back(std::move(piece));
    }
  }
  AttackReport report;
  report.kind = AttackKind::kDeleteRare;
  report.poisoned_mask = removed;
  for (const auto& w : rare.windows) {
    WindowOutcome o;
    o.window = w;
    o.before = pattern_of(std::span<const Label>(ctx.units.labels).subspan(w.flat_start, w.length), ctx.index.dedup);
    report.windows.push_back(std::move(o));
  }
  finish_report(report, dataset, out, ctx, rare, budget);
  return {std::move(out), std::move(report)};
}

}  // namespace

AttackResult csdpc_attack(const OfflineDataset& dataset, const AttackContext& context, const RareSet& rare,
                          const PerturbationBudget& budget) {
  budget.check();
  check_context(dataset, context);
  std::vector<Target> targets;
  for (const auto& w : rare.windows) targets.push_back(window_target(w));
  return rewrite(dataset, AttackKind::kCsdpc, context, rare, budget, std::move(targets), Selection::kMostFrequent);
}

AttackResult baseline_attack(const OfflineDataset& dataset, AttackKind kind, const AttackContext& context,
                             const RareSet& rare, const PerturbationBudget& budget, const QFunction* q) {
  budget.check();
  check_context(dataset, context);
  const std::size_t n = dataset.transition_count();
  std::vector<Target> targets;
  switch (kind) {
    case AttackKind::kPerturbOnly:
      for (const auto& w : rare.windows) targets.push_back(window_target(w));
      return rewrite(dataset, kind, context, rare, budget, std::move(targets), Selection::kFirstPerturbed);

    case AttackKind::kDeleteRare:
      return delete_rare(dataset, context, rare, budget);

    case AttackKind::kRandomTarget: {
      auto ws = all_windows(context.index);
      Rng rng(derive_seed(budget.seed, kRandomTargetStream));
      for (std::size_t i = ws.size(); i > 1; --i) std::swap(ws[i - 1], ws[rng.index(i)]);
      for (const auto& w : fill_footprint(ws, rare.footprint, n)) targets.push_back(window_target(w));
      return rewrite(dataset, kind, context, rare, budget, std::move(targets), Selection::kMostFrequent);
    }

    case AttackKind::kValueTarget: {
      if (q == nullptr) throw ArgumentError("value_target needs a trained value model");
      q->require_trained();
      TransitionLocator loc(dataset);
      auto ws = all_windows(context.index);
      std::vector<double> score(ws.size(), 0.0);
      for (std::size_t i = 0; i < ws.size(); ++i) {
        for (std::size_t j = 0; j < ws[i].length; ++j) {
          const auto r = loc.locate(ws[i].flat_start + j);
          const auto& x = dataset.trajectories[r.trajectory].transitions[r.step];
          score[i] += q->q(x.state, x.action);
        }
      }
      std::vector<std::size_t> order(ws.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
      std::vector<Window> ranked;
      for (std::size_t i : order) ranked.push_back(ws[i]);
      for (const auto& w : fill_footprint(ranked, rare.footprint, n)) targets.push_back(window_target(w));
      return rewrite(dataset, kind, context, rare, budget, std::move(targets), Selection::kMostFrequent);
    }

    case AttackKind::kDiscreteSteps: {
      const std::size_t l = context.index.l;
      TransitionLocator loc(dataset);
      for (const auto& w : rare.windows) {
        const auto [traj_begin, traj_end] = trajectory_bounds(loc, w.flat_start);
        const std::size_t span = std::min(2 * l - 1, traj_end - traj_begin);
        std::size_t begin = w.flat_start;
        if (begin + span > traj_end) begin = traj_end - span;
        Target t;
        t.window = w;
        t.region_begin = begin;
        t.region_end = begin + span;
        const std::size_t stride = span >= 2 * l - 1 ? 2 : 1;
        for (std::size_t i = 0; i < l && begin + i * stride < t.region_end; ++i) t.positions.push_back(begin + i * stride);
        targets.push_back(std::move(t));
      }
      return rewrite(dataset, kind, context, rare, budget, std::move(targets), Selection::kMostFrequent);
    }

    case AttackKind::kNone:
    case AttackKind::kCsdpc:
      break;
  }
  throw ArgumentError("'" + to_string(kind) + "' is not a baseline attack");
}

AttackResult run_attack(const OfflineDataset& dataset, AttackKind kind, const AttackContext& context,
                        const RareSet& rare, const PerturbationBudget& budget, const QFunction* q) {
  if (kind == AttackKind::kCsdpc) return csdpc_attack(dataset, context, rare, budget);
  if (kind != AttackKind::kNone) return baseline_attack(dataset, kind, context, rare, budget, q);
  budget.check();
  check_context(dataset, context);
  AttackResult out{dataset, {}};
  out.report.kind = AttackKind::kNone;
  finish_report(out.report, dataset, out.dataset, context, rare, budget);
  out.report.warning = false;
  out.report.message.clear();
  return out;
}

StealthCheck check_stealth(const OfflineDataset& clean, const OfflineDataset& poisoned, double eta) {
  if (clean.trajectories.size() != poisoned.trajectories.size())
    throw ArgumentError("datasets differ in trajectory count");
  StealthCheck out;
  for (std::size_t t = 0; t < clean.trajectories.size(); ++t) {
    const auto& a = clean.trajectories[t].transitions;
    const auto& b = poisoned.trajectories[t].transitions;
    if (a.size() != b.size()) throw ArgumentError("datasets differ in trajectory length");
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].state.size() != b[i].state.size() || a[i].action.size() != b[i].action.size())
        throw ArgumentError("datasets differ in field dimensions");
      ++out.checked;
      const double rs = change_ratio(a[i].state, b[i].state);
      const double ra = change_ratio(a[i].action, b[i].action);
      if (rs == 0.0 && ra == 0.0) continue;
      ++out.changed;
      out.max_ratio = std::max({out.max_ratio, rs, ra});
      // Strict form of the bound, checked on the raw differences.
      auto within = [eta](std::span<const double> x, std::span<const double> y) {
        double diff = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) diff = std::max(diff, std::abs(y[j] - x[j]));
        return diff == 0.0 || diff < eta * inf_norm(x);
      };
      if (!within(a[i].state, b[i].state) || !within(a[i].action, b[i].action)) ++out.violations;
    }
  }
  return out;
}

json to_json(const PerturbationBudget& b) {
  return {{"eta", b.eta}, {"n_candidates", b.n_candidates}, {"seed", b.seed}};
}

json to_json(const AttackReport& r) {
  json windows = json::array();
  for (const auto& w : r.windows) {
    windows.push_back({{"window", to_json(w.window)},
                       {"before", to_string(w.before)},
                       {"after", to_string(w.after)},
                       {"candidate", w.candidate},
                       {"max_ratio", w.max_ratio}});
  }
  json rare = json::array();
  for (const auto& p : r.rare) rare.push_back({{"pattern", to_string(p.pattern)}, {"before", p.before}, {"after", p.after}});
  return {{"kind", to_string(r.kind)},
          {"clean_transitions", r.clean_transitions},
          {"result_transitions", r.result_transitions},
          {"poisoned_transitions", r.poisoned_transitions},
          {"poisoned_fraction", r.poisoned_fraction},
          {"max_perturbation_ratio", r.max_perturbation_ratio},
          {"distinct_before", r.distinct_before},
          {"distinct_after", r.distinct_after},
          {"rare_before", r.rare_before},
          {"rare_after", r.rare_after},
          {"rare", std::move(rare)},
          {"windows", std::move(windows)},
          {"poisoned_mask", r.poisoned_mask},
          {"warning", r.warning},
          {"message", r.message},
          {"config", r.config}};
}

std::string windows_csv(const AttackReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "window,before,after,candidate,max_ratio\n";
  for (const auto& w : r.windows)
    out << w.window.trajectory << ':' << w.window.start << ',' << to_string(w.before) << ',' << to_string(w.after)
        << ',' << w.candidate << ',' << w.max_ratio << '\n';
  return out.str();
}

}  // namespace seqcov
