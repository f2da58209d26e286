#include "seqcov/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "seqcov/errors.hpp"

namespace seqcov {

using nlohmann::json;

std::string to_string(const DecisionPattern& p) {
  std::string out;
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(p.labels[i]);
  }
  return out;
}

DecisionPattern parse_pattern(const std::string& text) {
  DecisionPattern p;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, '-')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      throw ArgumentError("malformed pattern '" + text + "'");
    p.labels.push_back(static_cast<Label>(std::stoul(item)));
  }
  if (p.labels.empty()) throw ArgumentError("empty pattern");
  return p;
}

DecisionPattern pattern_of(std::span<const Label> labels, bool dedup) {
  DecisionPattern p;
  p.labels.reserve(labels.size());
  for (Label u : labels) {
    if (dedup && !p.labels.empty() && p.labels.back() == u) continue;
    p.labels.push_back(u);
  }
  return p;
}

std::size_t PatternIndex::count(const DecisionPattern& p) const {
  const auto it = patterns.find(p);
  return it == patterns.end() ? 0 : it->second.count;
}

PatternIndex extract_patterns(const UnitSequence& units, std::size_t l, bool dedup) {
  std::size_t longest = 0;
  for (std::size_t t = 0; t < units.trajectories(); ++t) longest = std::max(longest, units.trajectory(t).size());
  if (l < 1 || l > longest) throw ArgumentError("window length l must lie in [1, longest trajectory]");

  PatternIndex index;
  index.l = l;
  index.dedup = dedup;
  for (std::size_t t = 0; t < units.trajectories(); ++t) {
    const auto seq = units.trajectory(t);
    if (seq.size() < l) continue;
    for (std::size_t start = 0; start + l <= seq.size(); ++start) {
      auto& entry = index.patterns[pattern_of(seq.subspan(start, l), dedup)];
      ++entry.count;
      entry.windows.push_back({t, start, l, units.offsets[t] + start});
      ++index.total_windows;
    }
  }
  return index;
}

std::size_t window_footprint(std::span<const Window> windows) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  spans.reserve(windows.size());
  for (const auto& w : windows) spans.emplace_back(w.flat_start, w.flat_start + w.length);
  std::sort(spans.begin(), spans.end());
  std::size_t covered = 0, reach = 0;
  for (const auto& [lo, hi] : spans) {
    const std::size_t from = std::max(lo, reach);
    if (hi > from) covered += hi - from;
    reach = std::max(reach, hi);
  }
  return covered;
}

std::vector<std::size_t> RareSet::transitions() const {
  std::vector<std::size_t> out;
  for (const auto& w : windows)
    for (std::size_t i = 0; i < w.length; ++i) out.push_back(w.flat_start + i);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

RareSet identify_rare(const PatternIndex& index, double rho, std::size_t n_transitions, BudgetUnit unit) {
  if (!(rho > 0.0 && rho < 1.0)) throw ArgumentError("rho must lie in (0, 1)");
  RareSet rare;
  rare.unit = unit;
  const double base = unit == BudgetUnit::kTransitions ? static_cast<double>(n_transitions)
                                                       : static_cast<double>(index.total_windows);
  rare.budget = static_cast<std::size_t>(std::floor(rho * base * (1.0 + 1e-12)));

  std::vector<std::pair<std::size_t, const DecisionPattern*>> order;
  order.reserve(index.patterns.size());
  for (const auto& [p, e] : index.patterns) order.emplace_back(e.count, &p);
  // std::map iteration is already lexicographic, so a stable sort on count gives the tie rule.
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::size_t extent = n_transitions;
  for (const auto& [p, e] : index.patterns)
    for (const auto& w : e.windows) extent = std::max(extent, w.flat_start + w.length);
  std::vector<char> covered(extent, 0);
  std::size_t used_transitions = 0;

  std::vector<Window> chosen;
  for (const auto& [count, p] : order) {
    const auto& ws = index.patterns.at(*p).windows;
    std::vector<std::size_t> fresh;
    if (unit == BudgetUnit::kTransitions) {
      for (const auto& w : ws)
        for (std::size_t i = w.flat_start; i < w.flat_start + w.length; ++i)
          if (!covered[i]) {
            covered[i] = 2;  // provisional
            fresh.push_back(i);
          }
    }
    const std::size_t used =
        unit == BudgetUnit::kTransitions ? used_transitions + fresh.size() : chosen.size() + ws.size();
    if (used > rare.budget) {
      for (std::size_t i : fresh) covered[i] = 0;
      break;
    }
    for (std::size_t i : fresh) covered[i] = 1;
    used_transitions += fresh.size();
    chosen.insert(chosen.end(), ws.begin(), ws.end());
    rare.patterns.push_back(*p);
    rare.counts.push_back(count);
  }
  std::sort(chosen.begin(), chosen.end());
  rare.footprint = window_footprint(chosen);
  rare.windows = std::move(chosen);
  rare.warning = rare.patterns.empty();
  return rare;
}

std::string to_csv(const PatternIndex& index) {
  std::string out = "pattern,count\n";
  for (const auto& [p, e] : index.patterns) out += to_string(p) + "," + std::to_string(e.count) + "\n";
  return out;
}

json to_json(const Window& w) {
  return {{"trajectory", w.trajectory}, {"start", w.start}, {"length", w.length}, {"flat_start", w.flat_start}};
}

json to_json(const PatternIndex& index, bool with_windows) {
  json pats = json::array();
  for (const auto& [p, e] : index.patterns) {
    json row = {{"pattern", to_string(p)}, {"count", e.count}};
    if (with_windows) {
      json ws = json::array();
      for (const auto& w : e.windows) ws.push_back(to_json(w));
      row["windows"] = std::move(ws);
    }
    pats.push_back(std::move(row));
  }
  return {{"l", index.l},
          {"dedup", index.dedup},
          {"total_windows", index.total_windows},
          {"distinct", index.distinct()},
          {"patterns", std::move(pats)}};
}

json to_json(const RareSet& rare) {
  json pats = json::array();
  for (std::size_t i = 0; i < rare.patterns.size(); ++i)
    pats.push_back({{"pattern", to_string(rare.patterns[i])}, {"count", rare.counts[i]}});
  json ws = json::array();
  for (const auto& w : rare.windows) ws.push_back(to_json(w));
  return {{"patterns", std::move(pats)}, {"windows", std::move(ws)}, {"footprint", rare.footprint},
          {"budget", rare.budget},       {"unit", to_string(rare.unit)}, {"warning", rare.warning}};
}

std::string to_string(BudgetUnit unit) { return unit == BudgetUnit::kTransitions ? "transitions" : "windows"; }

BudgetUnit budget_unit_from_string(const std::string& text) {
  if (text == "transitions") return BudgetUnit::kTransitions;
  if (text == "windows") return BudgetUnit::kWindows;
  throw ArgumentError("unknown budget unit '" + text + "'");
}

}  // namespace seqcov
