#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "seqcov/dataset.hpp"
#include "seqcov/errors.hpp"

using namespace seqcov;
using testing_util::random_dataset;
using testing_util::scalar_dataset;

TEST(Validate, WellFormedTwoTrajectories) {
  const auto d = scalar_dataset({{1, 2, 3}, {4, 5}});
  const auto r = validate(d);
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.issues.empty());
}

TEST(Validate, ActionDimensionMismatch) {
  auto d = random_dataset(1, 2, 4, 3, 2);
  d.trajectories[1].transitions[0].action = {1.0, 2.0, 3.0};
  const auto r = validate(d);
  EXPECT_EQ(r.count(IssueKind::kDimensionMismatch), 1u);
  EXPECT_EQ(r.issues.size(), 1u);
  EXPECT_EQ(r.issues[0].trajectory, 1u);
  EXPECT_FALSE(r.ok());
}

TEST(Validate, NanReward) {
  auto d = scalar_dataset({{1, 2, 3}});
  d.trajectories[0].transitions[1].reward = std::numeric_limits<double>::quiet_NaN();
  const auto r = validate(d);
  ASSERT_EQ(r.issues.size(), 1u);
  EXPECT_EQ(r.issues[0].kind, IssueKind::kNonFinite);
  EXPECT_EQ(r.issues[0].step, 1u);
}

TEST(Validate, StructuralIssues) {
  OfflineDataset empty;
  EXPECT_EQ(validate(empty).count(IssueKind::kEmptyDataset), 1u);

  auto d = scalar_dataset({{1, 2, 3}, {4, 5}});
  d.trajectories[0].transitions[0].terminal = true;
  d.trajectories[1].id = 7;
  d.trajectories[1].transitions[0].next_state = {9.0};
  const auto r = validate(d);
  EXPECT_EQ(r.count(IssueKind::kTerminalNotLast), 1u);
  EXPECT_EQ(r.count(IssueKind::kIdNotDense), 1u);
  EXPECT_EQ(r.count(IssueKind::kDiscontinuity), 1u);

  d.meta.max_length = 2;
  EXPECT_EQ(validate(d).count(IssueKind::kTooLong), 1u);
}

TEST(Validate, DiscontinuityIsInformationalOnPoisonedData) {
  auto d = scalar_dataset({{1, 2, 3}});
  d.trajectories[0].transitions[1].state = {2.05};
  EXPECT_FALSE(validate(d).ok());
  d.poisoned = true;
  const auto r = validate(d);
  EXPECT_TRUE(r.ok());
  ASSERT_EQ(r.issues.size(), 1u);
  EXPECT_TRUE(r.issues[0].informational);
}

TEST(Validate, DoesNotMutate) {
  const auto d = random_dataset(3, 5, 6);
  const auto copy = d;
  (void)validate(d);
  EXPECT_EQ(d, copy);
}

TEST(OrdFormat, RoundTripIsIdentity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto d = random_dataset(seed, 1 + seed % 7, 1 + seed % 13, 1 + seed % 4, 1 + seed % 3);
    d.poisoned = seed % 2 == 1;
    d.trajectories[0].transitions[0].state[0] = 1e-310;  // subnormal survives
    d.trajectories[0].transitions[0].reward = -0.1 + 0.2;
    std::stringstream io;
    write_ord(d, io);
    EXPECT_EQ(read_ord(io), d) << "seed " << seed;
  }
}

TEST(OrdFormat, HundredTransitionFile) {
  auto d = scalar_dataset({std::vector<double>(50, 0.5), std::vector<double>(50, 1.5)});
  const auto path = std::filesystem::temp_directory_path() / "seqcov_roundtrip.ord";
  save(d, path);
  EXPECT_EQ(load(path), d);
  EXPECT_EQ(load(path).transition_count(), 100u);
  std::filesystem::remove(path);
}

TEST(OrdFormat, TruncatedFileIsParseError) {
  const auto d = random_dataset(5, 4, 5);
  std::stringstream io;
  write_ord(d, io);
  std::string text = io.str();
  text.resize(text.size() * 2 / 3);
  std::stringstream cut(text);
  EXPECT_THROW(read_ord(cut), ParseError);

  std::stringstream no_lines(text.substr(0, text.find('\n') + 1));
  EXPECT_THROW(read_ord(no_lines), ParseError);
}

TEST(OrdFormat, ParseErrorNamesLine) {
  const auto d = random_dataset(5, 3, 5);
  std::stringstream io;
  write_ord(d, io);
  std::string text = io.str();
  const auto second = text.find('\n', text.find('\n') + 1);
  text.insert(second + 1, "{not json\n");
  std::stringstream bad(text);
  try {
    read_ord(bad);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(OrdFormat, UnknownVersion) {
  std::stringstream io("ORD 99 {}\n");
  EXPECT_THROW(read_ord(io), VersionError);
  std::stringstream tag("XYZ 1 {}\n");
  EXPECT_THROW(read_ord(tag), ParseError);
}

TEST(OrdFormat, OverlongTrajectoryRejectedAtLoad) {
  auto d = scalar_dataset({{1, 2, 3, 4}});
  std::stringstream io;
  write_ord(d, io);
  std::string text = io.str();
  const auto pos = text.find("\"max_length\":4");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 14, "\"max_length\":3");
  std::stringstream in(text);
  EXPECT_THROW(read_ord(in), ParseError);
}

TEST(Access, FractionArithmetic) {
  auto d = scalar_dataset({std::vector<double>(1000, 1.0)});
  const auto w = restrict_access(d, 0.01, 3);
  EXPECT_EQ(w.length, 10u);
  EXPECT_LE(w.start + w.length, 1000u);
  const auto all = restrict_access(d, 1.0, 3);
  EXPECT_EQ(all.start, 0u);
  EXPECT_EQ(all.length, 1000u);
  EXPECT_EQ(restrict_access(d, 0.37, 9), restrict_access(d, 0.37, 9));
}

TEST(Access, WindowLengthIsFloorProperty) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto d = random_dataset(seed, 10, 30);
    const std::size_t n = d.transition_count();
    const double f = 0.05 + 0.9 * static_cast<double>(seed) / 50.0;
    const auto w = restrict_access(d, f, seed);
    EXPECT_EQ(w.length, static_cast<std::size_t>(std::floor(f * static_cast<double>(n))));
    EXPECT_LE(w.start + w.length, n);
  }
}

TEST(Access, BadFraction) {
  const auto d = scalar_dataset({{1, 2, 3}});
  EXPECT_THROW(restrict_access(d, 0.0, 1), ArgumentError);
  EXPECT_THROW(restrict_access(d, 1.5, 1), ArgumentError);
  EXPECT_THROW(restrict_access(d, 0.1, 1), ArgumentError);  // floor(0.3) = 0
}

TEST(Access, SliceAndMerge) {
  const auto d = random_dataset(11, 6, 8);
  const auto w = restrict_access(d, 0.5, 4);
  auto s = slice(d, w);
  ASSERT_EQ(s.data.transition_count(), w.length);
  ASSERT_EQ(s.global_index.size(), w.length);
  for (std::size_t i = 0; i < w.length; ++i) EXPECT_EQ(s.global_index[i], w.start + i);
  EXPECT_TRUE(validate(s.data).ok());

  EXPECT_EQ(merge_slice(d, s), d);
  s.data.trajectories[0].transitions[0].state[0] += 1.0;
  s.data.poisoned = true;
  const auto merged = merge_slice(d, s);
  const TransitionLocator loc(merged);
  const auto ref = loc.locate(w.start);
  EXPECT_EQ(merged.trajectories[ref.trajectory].transitions[ref.step].state[0],
            d.trajectories[ref.trajectory].transitions[ref.step].state[0] + 1.0);
  EXPECT_TRUE(merged.poisoned);
  EXPECT_EQ(merged.transition_count(), d.transition_count());
}

TEST(Locator, FlatAddressing) {
  const auto d = scalar_dataset({{1, 2}, {3}, {4, 5, 6}});
  const TransitionLocator loc(d);
  EXPECT_EQ(loc.size(), 6u);
  EXPECT_EQ(loc.locate(3).trajectory, 2u);
  EXPECT_EQ(loc.locate(3).step, 0u);
  EXPECT_EQ(loc.flat(2, 2), 5u);
  EXPECT_THROW(loc.locate(6), ArgumentError);
  EXPECT_EQ(d.offsets(), (std::vector<std::size_t>{0, 2, 3, 6}));
  EXPECT_EQ(state_action_rows(d)[4], (std::vector<double>{5.0, 1.0}));
}
