#include "seqcov/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "seqcov/errors.hpp"
#include "seqcov/rng.hpp"

namespace seqcov {

using nlohmann::json;

SingleStepCoverage single_step_concentrability(const OccupancyDist& d, const EmpiricalDist& mu) {
  if (d.n_states != mu.n_states || d.n_actions != mu.n_actions) throw ArgumentError("distribution shapes differ");
  SingleStepCoverage out;
  bool any = false;
  for (std::size_t s = 0; s < d.n_states; ++s) {
    for (std::size_t a = 0; a < d.n_actions; ++a) {
      if (mu.at(s, a) > 0.0) {
        const double r = d.at(s, a) / mu.at(s, a);
        if (!any || r > out.c) {
          out.c = r;
          out.argmax_state = s;
          out.argmax_action = a;
        }
        any = true;
      } else {
        out.uncovered_mass += d.at(s, a);
      }
    }
  }
  if (!any) throw ArgumentError("empirical distribution has empty support");
  return out;
}

ConditionalBehavior ConditionalBehavior::from_policy(const TabularMDP& mdp, const TabularPolicy& behavior) {
  mdp.check();
  behavior.check();
  if (behavior.n_states != mdp.n_states || behavior.n_actions != mdp.n_actions)
    throw ArgumentError("behavior policy shape does not match the MDP");
  ConditionalBehavior b;
  b.n_states = mdp.n_states;
  b.n_actions = mdp.n_actions;
  b.probs.assign(mdp.n_states * mdp.n_actions, 0.0);
  b.support.assign(mdp.n_states, 0);
  b.start_weights.assign(mdp.n_states, 0.0);

  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (mdp.initial[s] > 0.0 && !mdp.is_terminal(s)) {
      b.support[s] = 1;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const std::size_t s = queue.front();
    queue.pop_front();
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      if (behavior.prob(s, a) <= 0.0) continue;
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
        if (mdp.p(s, a, s2) > 0.0 && !mdp.is_terminal(s2) && !b.support[s2]) {
          b.support[s2] = 1;
          queue.push_back(s2);
        }
      }
    }
  }
  const OccupancyDist occ = exact_occupancy(mdp, behavior);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (!b.support[s]) continue;
    double w = 0.0;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      b.probs[s * mdp.n_actions + a] = behavior.prob(s, a);
      w += occ.at(s, a);
    }
    // Reachable states can carry occupancy that underflows to 0; keep them startable.
    b.start_weights[s] = std::max(w, std::numeric_limits<double>::min());
  }
  return b;
}

ConditionalBehavior ConditionalBehavior::from_dataset(const OfflineDataset& dataset, const TabularMDP& mdp) {
  const EmpiricalDist mu = empirical_distribution(dataset, mdp, dataset.poisoned);
  ConditionalBehavior b;
  b.n_states = mdp.n_states;
  b.n_actions = mdp.n_actions;
  b.probs.assign(mdp.n_states * mdp.n_actions, 0.0);
  b.support.assign(mdp.n_states, 0);
  b.start_weights.assign(mdp.n_states, 0.0);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const std::size_t n = mu.state_count(s);
    if (n == 0) continue;
    b.support[s] = 1;
    b.start_weights[s] = static_cast<double>(n);
    for (std::size_t a = 0; a < mdp.n_actions; ++a)
      b.probs[s * mdp.n_actions + a] =
          static_cast<double>(mu.counts[s * mdp.n_actions + a]) / static_cast<double>(n);
  }
  return b;
}

RatioBound per_step_ratio_bound(const TabularPolicy& target, const ConditionalBehavior& behavior) {
  if (target.n_states != behavior.n_states || target.n_actions != behavior.n_actions)
    throw ArgumentError("policy shapes differ");
  RatioBound out;
  for (std::size_t s = 0; s < behavior.n_states; ++s) {
    if (!behavior.support[s]) continue;
    for (std::size_t a = 0; a < behavior.n_actions; ++a) {
      const double m = behavior.prob(s, a);
      if (m > 0.0) {
        out.value = std::max(out.value, target.prob(s, a) / m);
      } else if (target.prob(s, a) > 0.0) {
        out.infinite = true;
      }
    }
  }
  if (out.infinite) out.value = std::numeric_limits<double>::infinity();
  return out;
}

namespace {

bool admissible_state(const TabularMDP& mdp, const ConditionalBehavior& b, std::size_t s) {
  return b.support[s] && !mdp.is_terminal(s);
}

void check_inputs(const TabularMDP& mdp, const TabularPolicy& target, const ConditionalBehavior& b, std::size_t l) {
  if (l < 1) throw ArgumentError("sequence length must be >= 1");
  if (target.n_states != mdp.n_states || target.n_actions != mdp.n_actions || b.n_states != mdp.n_states ||
      b.n_actions != mdp.n_actions)
    throw ArgumentError("policy shapes do not match the MDP");
}

struct Enumerator {
  const TabularMDP& mdp;
  const TabularPolicy& target;
  const ConditionalBehavior& b;
  std::size_t l;
  std::vector<std::size_t> states, actions;
  SequenceCoverage best;
  bool found = false;

  void visit(std::size_t s, std::size_t depth, double ratio) {
    states.push_back(s);
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const double m = b.prob(s, a);
      if (m <= 0.0) continue;
      const double r = ratio * (target.prob(s, a) / m);
      actions.push_back(a);
      if (depth + 1 == l) {
        ++best.sequences;
        if (!found || r > best.value) {
          found = true;
          best.value = r;
          best.argmax_states = states;
          best.argmax_actions = actions;
        }
      } else {
        for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2)
          if (mdp.p(s, a, s2) > 0.0 && admissible_state(mdp, b, s2)) visit(s2, depth + 1, r);
      }
      actions.pop_back();
    }
    states.pop_back();
  }
};

}  // namespace

std::size_t count_sequences(const TabularMDP& mdp, const ConditionalBehavior& b, std::size_t l) {
  if (l < 1) throw ArgumentError("sequence length must be >= 1");
  constexpr double kMax = static_cast<double>(std::numeric_limits<std::size_t>::max());
  std::vector<double> f(mdp.n_states, 0.0), g(mdp.n_states, 0.0);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (!admissible_state(mdp, b, s)) continue;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) f[s] += b.prob(s, a) > 0.0 ? 1.0 : 0.0;
  }
  for (std::size_t t = 1; t < l; ++t) {
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      g[s] = 0.0;
      if (!admissible_state(mdp, b, s)) continue;
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        if (b.prob(s, a) <= 0.0) continue;
        for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2)
          if (mdp.p(s, a, s2) > 0.0 && admissible_state(mdp, b, s2)) g[s] += f[s2];
      }
      g[s] = std::min(g[s], kMax);
    }
    std::swap(f, g);
  }
  double total = 0.0;
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    if (b.start_weights[s] > 0.0 && admissible_state(mdp, b, s)) total += f[s];
  return total >= kMax ? std::numeric_limits<std::size_t>::max() : static_cast<std::size_t>(total);
}

SequenceCoverage sequence_concentrability(const TabularMDP& mdp, const TabularPolicy& target,
                                          const ConditionalBehavior& b, std::size_t l,
                                          const SequenceOptions& options) {
  check_inputs(mdp, target, b, l);

  if (options.method == SequenceMethod::kMonteCarlo) {
    if (options.samples == 0) throw ArgumentError("Monte Carlo mode needs samples >= 1");
    SequenceCoverage out;
    out.method = SequenceMethod::kMonteCarlo;
    std::vector<double> starts(mdp.n_states, 0.0);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
      if (admissible_state(mdp, b, s)) starts[s] = b.start_weights[s];
    if (std::all_of(starts.begin(), starts.end(), [](double w) { return w <= 0.0; })) return out;
    Rng rng(options.seed);
    bool found = false;
    for (std::size_t i = 0; i < options.samples; ++i) {
      ++out.sequences;
      std::vector<std::size_t> ss, as;
      std::size_t s = rng.categorical(starts);
      double r = 1.0;
      bool ok = true;
      for (std::size_t t = 0; t < l && ok; ++t) {
        const std::size_t a = rng.categorical(b.row_span(s));
        ss.push_back(s);
        as.push_back(a);
        r *= target.prob(s, a) / b.prob(s, a);
        if (t + 1 < l) {
          s = rng.categorical(mdp.row(s, a));
          ok = admissible_state(mdp, b, s);
        }
      }
      if (ok && (!found || r > out.value)) {
        found = true;
        out.value = r;
        out.argmax_states = std::move(ss);
        out.argmax_actions = std::move(as);
      }
    }
    return out;
  }

  const std::size_t n = count_sequences(mdp, b, l);
  if (n > options.cap)
    throw ResourceError("sequence enumeration would visit " + std::to_string(n) + " sequences (cap " +
                        std::to_string(options.cap) + "); use Monte Carlo mode");
  Enumerator e{mdp, target, b, l, {}, {}, {}, false};
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    if (b.start_weights[s] > 0.0 && admissible_state(mdp, b, s)) e.visit(s, 0, 1.0);
  return e.best;
}

QErrorBounds q_error_bounds(double r_max, double c, double c_tau, double c_a, std::size_t l, double gamma,
                            double epsilon) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ArgumentError("gamma must lie in (0, 1)");
  if (r_max < 0.0 || c < 0.0 || c_tau < 0.0 || c_a < 0.0 || epsilon < 0.0)
    throw ArgumentError("bound inputs must be non-negative");
  const double scale = 2.0 * r_max * epsilon / (1.0 - gamma);
  const double pow_l = std::pow(c_a, static_cast<double>(l));
  // 0 * inf stays 0 for a zero error term.
  auto times = [&](double x) { return scale == 0.0 ? 0.0 : scale * x; };
  return {times(c), times(c_tau), times(pow_l)};
}

CoverageReport coverage_report(const TabularMDP& mdp, const TabularPolicy& target, const OfflineDataset& dataset,
                               const std::vector<std::size_t>& lengths, double epsilon,
                               const SequenceOptions& options) {
  CoverageReport r;
  r.kind = "exact";
  r.epsilon = epsilon;
  r.gamma = mdp.gamma;
  r.r_max = mdp.max_abs_reward();
  const auto single = single_step_concentrability(exact_occupancy(mdp, target), empirical_distribution(dataset, mdp, dataset.poisoned));
  r.c = single.c;
  r.uncovered_mass = single.uncovered_mass;
  const auto behavior = ConditionalBehavior::from_dataset(dataset, mdp);
  r.c_a = per_step_ratio_bound(target, behavior);
  for (std::size_t l : lengths) {
    SequenceOptions opts = options;
    if (opts.method == SequenceMethod::kExact && count_sequences(mdp, behavior, l) > opts.cap)
      opts.method = SequenceMethod::kMonteCarlo;
    const auto seq = sequence_concentrability(mdp, target, behavior, l, opts);
    SequenceEntry e;
    e.l = l;
    e.c_tau = seq.value;
    e.c_a_pow_l = std::pow(r.c_a.value, static_cast<double>(l));
    e.method = seq.method;
    e.sequences = seq.sequences;
    e.bounds = q_error_bounds(r.r_max, r.c, e.c_tau, r.c_a.value, l, r.gamma, epsilon);
    r.sequence.push_back(e);
  }
  return r;
}

CoverageReport coverage_proxy(const PatternIndex& index) {
  CoverageReport r;
  r.kind = "proxy";
  r.l = index.l;
  r.distinct_patterns = index.distinct();
  bool first = true;
  for (const auto& [p, e] : index.patterns) {
    ++r.histogram[e.count];
    if (first || e.count < r.min_frequency) r.min_frequency = e.count;
    first = false;
  }
  return r;
}

std::string to_string(SequenceMethod m) { return m == SequenceMethod::kExact ? "exact" : "monte_carlo"; }

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const CoverageReport& r) {
  if (r.kind == "proxy") {
    json hist = json::array();
    for (const auto& [count, n] : r.histogram) hist.push_back({{"count", count}, {"patterns", n}});
    return {{"kind", "proxy"},
            {"l", r.l},
            {"distinct_patterns", r.distinct_patterns},
            {"min_frequency", r.min_frequency},
            {"histogram", std::move(hist)}};
  }
  json seq = json::array();
  for (const auto& e : r.sequence) {
    seq.push_back({{"l", e.l},
                   {"c_tau", finite_or_null(e.c_tau)},
                   {"c_a_pow_l", finite_or_null(e.c_a_pow_l)},
                   {"method", to_string(e.method)},
                   {"sequences", e.sequences},
                   {"q_error", {{"single", finite_or_null(e.bounds.single)},
                                {"sequence", finite_or_null(e.bounds.sequence)},
                                {"cap", finite_or_null(e.bounds.cap)}}}});
  }
  return {{"kind", r.kind},
          {"c", r.c},
          {"uncovered_mass", r.uncovered_mass},
          {"c_a", finite_or_null(r.c_a.value)},
          {"c_a_infinite", r.c_a.infinite},
          {"r_max", r.r_max},
          {"epsilon", r.epsilon},
          {"gamma", r.gamma},
          {"sequence", std::move(seq)}};
}

std::string to_csv(const CoverageReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "l,c_tau,c_a_pow_l,method\n";
  for (const auto& e : r.sequence) out << e.l << ',' << e.c_tau << ',' << e.c_a_pow_l << ',' << to_string(e.method) << '\n';
  return out.str();
}

}  // namespace seqcov
