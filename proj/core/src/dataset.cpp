#include "seqcov/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "seqcov/errors.hpp"
#include "seqcov/rng.hpp"

namespace seqcov {

using nlohmann::json;

std::size_t OfflineDataset::transition_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.transitions.size();
  return n;
}

std::vector<std::size_t> OfflineDataset::offsets() const {
  std::vector<std::size_t> out;
  out.reserve(trajectories.size() + 1);
  out.push_back(0);
  for (const auto& t : trajectories) out.push_back(out.back() + t.transitions.size());
  return out;
}

std::size_t OfflineDataset::longest_trajectory() const {
  std::size_t m = 0;
  for (const auto& t : trajectories) m = std::max(m, t.transitions.size());
  return m;
}

TransitionLocator::TransitionLocator(const OfflineDataset& dataset) : offsets_(dataset.offsets()) {}

TransitionRef TransitionLocator::locate(std::size_t flat) const {
  if (flat >= size()) throw ArgumentError("transition index out of range");
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat);
  const auto traj = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  return {traj, flat - offsets_[traj]};
}

// --- validation ---------------------------------------------------------------

std::string to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::kEmptyDataset: return "empty_dataset";
    case IssueKind::kEmptyTrajectory: return "empty_trajectory";
    case IssueKind::kTooLong: return "too_long";
    case IssueKind::kDimensionMismatch: return "dimension_mismatch";
    case IssueKind::kNonFinite: return "non_finite";
    case IssueKind::kDiscontinuity: return "discontinuity";
    case IssueKind::kTerminalNotLast: return "terminal_not_last";
    case IssueKind::kIdNotDense: return "id_not_dense";
  }
  return "unknown";
}

bool ValidationReport::ok() const {
  return std::none_of(issues.begin(), issues.end(), [](const auto& i) { return !i.informational; });
}

std::size_t ValidationReport::count(IssueKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(issues.begin(), issues.end(), [kind](const auto& i) { return i.kind == kind; }));
}

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

ValidationReport validate(const OfflineDataset& dataset) {
  ValidationReport report;
  auto add = [&](IssueKind kind, std::size_t traj, std::size_t step, std::string msg, bool info = false) {
    report.issues.push_back({kind, traj, step, std::move(msg), info});
  };

  if (dataset.transition_count() == 0) add(IssueKind::kEmptyDataset, 0, 0, "dataset has no transitions");

  const auto& meta = dataset.meta;
  std::vector<std::int64_t> ids;
  ids.reserve(dataset.trajectories.size());
  for (std::size_t ti = 0; ti < dataset.trajectories.size(); ++ti) {
    const auto& traj = dataset.trajectories[ti];
    ids.push_back(traj.id);
    const auto& tr = traj.transitions;
    if (tr.empty()) add(IssueKind::kEmptyTrajectory, ti, 0, "trajectory has no transitions");
    if (meta.max_length > 0 && tr.size() > meta.max_length) {
      add(IssueKind::kTooLong, ti, meta.max_length,
          "length " + std::to_string(tr.size()) + " exceeds max_length " + std::to_string(meta.max_length));
    }
    for (std::size_t t = 0; t < tr.size(); ++t) {
      const auto& x = tr[t];
      if (x.state.size() != meta.state_dim)
        add(IssueKind::kDimensionMismatch, ti, t, "state dim " + std::to_string(x.state.size()));
      if (x.next_state.size() != meta.state_dim)
        add(IssueKind::kDimensionMismatch, ti, t, "next_state dim " + std::to_string(x.next_state.size()));
      if (x.action.size() != meta.action_dim)
        add(IssueKind::kDimensionMismatch, ti, t, "action dim " + std::to_string(x.action.size()));
      if (!all_finite(x.state) || !all_finite(x.action) || !all_finite(x.next_state) || !std::isfinite(x.reward))
        add(IssueKind::kNonFinite, ti, t, "non-finite value");
      if (x.terminal && t + 1 != tr.size())
        add(IssueKind::kTerminalNotLast, ti, t, "terminal transition is not the last of its trajectory");
      if (t + 1 < tr.size() && !x.terminal && x.next_state != tr[t + 1].state) {
        add(IssueKind::kDiscontinuity, ti, t, "next_state differs from the following state", dataset.poisoned);
      }
    }
  }

  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != static_cast<std::int64_t>(i)) {
      add(IssueKind::kIdNotDense, 0, 0, "trajectory ids are not unique and dense in [0, n)");
      break;
    }
  }
  return report;
}

json to_json(const ValidationReport& report) {
  json issues = json::array();
  for (const auto& i : report.issues) {
    issues.push_back({{"kind", to_string(i.kind)},
                      {"trajectory", i.trajectory},
                      {"step", i.step},
                      {"message", i.message},
                      {"informational", i.informational}});
  }
  return {{"ok", report.ok()}, {"issues", std::move(issues)}};
}

// --- serialization ------------------------------------------------------------

namespace {

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vec_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

double as_double(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw std::runtime_error("expected a number");
  return j.get<double>();
}

std::vector<double> as_vec(const json& j) {
  if (!j.is_array()) throw std::runtime_error("expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(as_double(x));
  return out;
}

json trajectory_json(const Trajectory& traj) {
  json s = json::array(), a = json::array(), r = json::array(), s2 = json::array(), done = json::array();
  for (const auto& x : traj.transitions) {
    s.push_back(vec_json(x.state));
    a.push_back(vec_json(x.action));
    r.push_back(number(x.reward));
    s2.push_back(vec_json(x.next_state));
    done.push_back(x.terminal);
  }
  return {{"id", traj.id}, {"s", std::move(s)}, {"a", std::move(a)}, {"r", std::move(r)},
          {"s2", std::move(s2)}, {"done", std::move(done)}};
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory traj;
  traj.id = j.at("id").get<std::int64_t>();
  const auto& s = j.at("s");
  const auto& a = j.at("a");
  const auto& r = j.at("r");
  const auto& s2 = j.at("s2");
  const auto& done = j.at("done");
  const std::size_t n = s.size();
  if (a.size() != n || r.size() != n || s2.size() != n || done.size() != n)
    throw std::runtime_error("field arrays have different lengths");
  traj.transitions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& x = traj.transitions[i];
    x.state = as_vec(s[i]);
    x.action = as_vec(a[i]);
    x.reward = as_double(r[i]);
    x.next_state = as_vec(s2[i]);
    x.terminal = done[i].get<bool>();
  }
  return traj;
}

}  // namespace

json meta_to_json(const DatasetMeta& meta) {
  return {{"state_dim", meta.state_dim}, {"action_dim", meta.action_dim}, {"max_length", meta.max_length},
          {"gamma", meta.gamma},         {"env", meta.env},               {"seed", meta.seed}};
}

void write_ord(const OfflineDataset& dataset, std::ostream& out) {
  json header = meta_to_json(dataset.meta);
  header["poisoned"] = dataset.poisoned;
  header["n_trajectories"] = dataset.trajectories.size();
  header["n_transitions"] = dataset.transition_count();
  out << kOrdTag << ' ' << kOrdVersion << ' ' << header.dump() << '\n';
  for (const auto& traj : dataset.trajectories) out << trajectory_json(traj).dump() << '\n';
}

OfflineDataset read_ord(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);

  std::istringstream head(line);
  std::string tag, version;
  head >> tag >> version;
  if (tag != kOrdTag) throw ParseError("expected format tag '" + std::string(kOrdTag) + "'", 1);
  if (version != std::to_string(kOrdVersion))
    throw VersionError("unsupported .ord version '" + version + "' (expected " + std::to_string(kOrdVersion) + ")");

  OfflineDataset dataset;
  std::size_t n_traj = 0, n_trans = 0;
  try {
    std::string rest;
    std::getline(head, rest);
    const json h = json::parse(rest);
    auto& m = dataset.meta;
    m.state_dim = h.at("state_dim").get<std::size_t>();
    m.action_dim = h.at("action_dim").get<std::size_t>();
    m.max_length = h.at("max_length").get<std::size_t>();
    m.gamma = h.at("gamma").get<double>();
    m.env = h.at("env").get<std::string>();
    m.seed = h.at("seed").get<std::uint64_t>();
    dataset.poisoned = h.value("poisoned", false);
    n_traj = h.at("n_trajectories").get<std::size_t>();
    n_trans = h.at("n_transitions").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad header: ") + e.what(), 1);
  }

  std::size_t line_no = 1;
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Trajectory traj;
    try {
      traj = trajectory_from_json(json::parse(line));
    } catch (const std::exception& e) {
      throw ParseError(std::string("bad trajectory: ") + e.what(), line_no);
    }
    if (dataset.meta.max_length > 0 && traj.transitions.size() > dataset.meta.max_length) {
      throw ParseError("trajectory length " + std::to_string(traj.transitions.size()) + " exceeds max_length " +
                           std::to_string(dataset.meta.max_length),
                       line_no);
    }
    seen += traj.transitions.size();
    dataset.trajectories.push_back(std::move(traj));
  }
  if (dataset.trajectories.size() != n_traj || seen != n_trans) {
    throw ParseError("truncated file: header declares " + std::to_string(n_traj) + " trajectories / " +
                         std::to_string(n_trans) + " transitions, found " +
                         std::to_string(dataset.trajectories.size()) + " / " + std::to_string(seen),
                     line_no);
  }
  return dataset;
}

void save(const OfflineDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_ord(dataset, out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

OfflineDataset load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_ord(in);
}

// --- access restriction -------------------------------------------------------

AccessWindow restrict_access(const OfflineDataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("access fraction must lie in (0, 1]");
  const std::size_t n = dataset.transition_count();
  // The relative nudge keeps products such as 0.29 * 100 from flooring to 28.
  const auto length = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) * (1.0 + 1e-12)));
  if (length < 1) throw ArgumentError("access fraction selects fewer than one transition");
  const std::size_t slots = n - std::min(length, n) + 1;
  Rng rng(seed);
  return {rng.index(slots), std::min(length, n)};
}

AccessSlice slice(const OfflineDataset& dataset, const AccessWindow& window) {
  const std::size_t n = dataset.transition_count();
  if (window.start + window.length > n) throw ArgumentError("access window exceeds dataset");
  AccessSlice out;
  out.data.meta = dataset.meta;
  out.data.poisoned = dataset.poisoned;
  const auto offsets = dataset.offsets();
  const std::size_t lo = window.start, hi = window.start + window.length;
  for (std::size_t ti = 0; ti < dataset.trajectories.size(); ++ti) {
    const std::size_t a = std::max(lo, offsets[ti]), b = std::min(hi, offsets[ti + 1]);
    if (a >= b) continue;
    Trajectory part;
    part.id = static_cast<std::int64_t>(out.data.trajectories.size());
    const auto& src = dataset.trajectories[ti].transitions;
    part.transitions.assign(src.begin() + static_cast<std::ptrdiff_t>(a - offsets[ti]),
                            src.begin() + static_cast<std::ptrdiff_t>(b - offsets[ti]));
    for (std::size_t g = a; g < b; ++g) out.global_index.push_back(g);
    out.data.trajectories.push_back(std::move(part));
  }
  return out;
}

OfflineDataset merge_slice(const OfflineDataset& base, const AccessSlice& poisoned_slice) {
  OfflineDataset out = base;
  const TransitionLocator loc(out);
  std::size_t i = 0;
  for (const auto& traj : poisoned_slice.data.trajectories) {
    for (const auto& x : traj.transitions) {
      const auto ref = loc.locate(poisoned_slice.global_index.at(i++));
      auto& dst = out.trajectories[ref.trajectory].transitions[ref.step];
      dst.state = x.state;
      dst.action = x.action;
    }
  }
  out.poisoned = base.poisoned || poisoned_slice.data.poisoned;
  return out;
}

std::vector<std::vector<double>> state_action_rows(const OfflineDataset& dataset) {
  std::vector<std::vector<double>> rows;
  rows.reserve(dataset.transition_count());
  for (const auto& traj : dataset.trajectories) {
    for (const auto& x : traj.transitions) {
      std::vector<double> row = x.state;
      row.insert(row.end(), x.action.begin(), x.action.end());
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace seqcov
