#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "safnet/chunks.hpp"

using namespace safnet;

namespace {

PointCloud random_cloud(std::size_t n, double sx, double sy, double sz, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i)
    c.points.push_back({std::uniform_real_distribution<double>(0, sx)(rng), std::uniform_real_distribution<double>(0, sy)(rng),
                        std::uniform_real_distribution<double>(0, sz)(rng)});
  return c;
}

}  // namespace

TEST(Chunks, SingleFootprintGivesOneChunk) {
  const auto c = random_cloud(300, 1.2, 1.4, 2.0, 1);
  const auto w = make_chunks(c);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].point_indices.size(), 300u);
  EXPECT_EQ(w[0].size[2], 3.0);
}

TEST(Chunks, EmptyCloudAndBadArguments) {
  EXPECT_TRUE(make_chunks(PointCloud{}).empty());
  const auto c = random_cloud(10, 1, 1, 1, 2);
  EXPECT_THROW(make_chunks(c, {0.0, 1.5, 3.0}), ArgumentError);
  EXPECT_THROW(make_chunks(c, kDefaultChunkSize, 0.0), ArgumentError);
  EXPECT_THROW(make_chunks(c, kDefaultChunkSize, 2.0), ArgumentError);
}

TEST(Chunks, MaxCornerIncludedInLastWindow) {
  PointCloud c;
  c.points = {{0, 0, 0}, {2, 2, 1}, {1, 1, 0.5}};
  const auto w = make_chunks(c);
  ASSERT_FALSE(w.empty());
  const auto& last = w.back().point_indices;
  EXPECT_NE(std::find(last.begin(), last.end(), 1u), last.end());
}

TEST(Chunks, TwoMetreFootprintMatchesBoxOracle) {
  auto c = random_cloud(2000, 2.0, 2.0, 2.5, 3);
  c.points.push_back({0, 0, 0});
  c.points.push_back({2, 2, 2.5});
  const auto w = make_chunks(c, kDefaultChunkSize, 0.5);
  ASSERT_EQ(w.size(), 4u);
  const double starts[2] = {0.0, 0.5};
  for (int iy = 0; iy < 2; ++iy)
    for (int ix = 0; ix < 2; ++ix) {
      const auto& win = w[iy * 2 + ix];
      EXPECT_DOUBLE_EQ(win.min_corner.x, starts[ix]);
      EXPECT_DOUBLE_EQ(win.min_corner.y, starts[iy]);
      std::vector<std::size_t> want;
      for (std::size_t i = 0; i < c.size(); ++i) {
        const auto& p = c.points[i];
        const double xh = starts[ix] + 1.5, yh = starts[iy] + 1.5;
        const bool in_x = p.x >= starts[ix] && (p.x < xh || (xh >= 2.0 && p.x <= 2.0));
        const bool in_y = p.y >= starts[iy] && (p.y < yh || (yh >= 2.0 && p.y <= 2.0));
        if (in_x && in_y) want.push_back(i);
      }
      EXPECT_EQ(win.point_indices, want);
    }
}

TEST(Chunks, EveryPointCoveredAndInsideItsWindows) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const double sx = 0.5 + 5.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    const double sy = 0.5 + 5.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    const auto c = random_cloud(3000, sx, sy, 2.0, seed + 50);
    const auto w = make_chunks(c, {1.5, 1.5, 3.0}, 0.5);
    std::vector<int> hits(c.size(), 0);
    for (const auto& win : w) {
      ASSERT_FALSE(win.point_indices.empty());
      for (auto i : win.point_indices) {
        ++hits[i];
        const auto& p = c.points[i];
        EXPECT_GE(p.x, win.min_corner.x);
        EXPECT_LE(p.x, win.min_corner.x + win.size[0]);
        EXPECT_GE(p.y, win.min_corner.y);
        EXPECT_LE(p.y, win.min_corner.y + win.size[1]);
      }
    }
    for (int h : hits) EXPECT_GE(h, 1);
    for (std::size_t k = 1; k < w.size(); ++k) {
      const auto& a = w[k - 1].min_corner;
      const auto& b = w[k].min_corner;
      EXPECT_TRUE(a.y < b.y || (a.y == b.y && a.x < b.x));
    }
  }
}

TEST(Chunks, SampleWithoutReplacement) {
  ChunkWindow w;
  for (std::size_t i = 0; i < 100; ++i) w.point_indices.push_back(i * 3);
  const auto s = sample_chunk(w, 40, 9);
  EXPECT_EQ(s.size(), 40u);
  EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 40u);
  for (auto i : s) EXPECT_EQ(i % 3, 0u);
  EXPECT_EQ(s, sample_chunk(w, 40, 9));
  EXPECT_NE(s, sample_chunk(w, 40, 10));
  auto all = sample_chunk(w, 100, 4);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, w.point_indices);
}

TEST(Chunks, SampleUpsamplesSmallChunks) {
  ChunkWindow one;
  one.point_indices = {7};
  EXPECT_EQ(sample_chunk(one, 4, 0), (std::vector<std::size_t>{7, 7, 7, 7}));
  ChunkWindow few;
  few.point_indices = {1, 2, 3};
  const auto s = sample_chunk(few, 10, 5);
  ASSERT_EQ(s.size(), 10u);
  EXPECT_EQ(std::set<std::size_t>(s.begin(), s.begin() + 3), (std::set<std::size_t>{1, 2, 3}));
  EXPECT_THROW(sample_chunk(ChunkWindow{}, 4, 0), ArgumentError);
  EXPECT_THROW(sample_chunk(few, 0, 0), ArgumentError);
}

TEST(Chunks, SampleIsRoughlyUniform) {
  ChunkWindow w;
  for (std::size_t i = 0; i < 20; ++i) w.point_indices.push_back(i);
  std::vector<int> counts(20, 0);
  for (std::uint64_t seed = 0; seed < 4000; ++seed)
    for (auto i : sample_chunk(w, 5, seed)) ++counts[i];
  // Expected 1000 per index; 5 sigma is about 150.
  for (int c : counts) EXPECT_NEAR(c, 1000, 150);
}

TEST(Vote, MajorityAndTieBreak) {
  VoteAccumulator acc(2, 8);
  acc.add(0, 3);
  acc.add(0, 3);
  acc.add(0, 5);
  acc.add(1, 2);
  acc.add(1, 1);
  EXPECT_EQ(vote(acc), (std::vector<int>{3, 1}));
  EXPECT_EQ(acc.total(0), 3u);
}

TEST(Vote, UncoveredPointsAreListed) {
  VoteAccumulator acc(4, 3);
  acc.add(0, 1);
  acc.add(2, 1);
  try {
    vote(acc);
    FAIL() << "expected an error";
  } catch (const ArgumentError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("uncovered point"), std::string::npos);
    EXPECT_NE(msg.find("1,3"), std::string::npos);
  }
  EXPECT_THROW(acc.add(4, 0), ArgumentError);
  EXPECT_THROW(acc.add(0, 3), ArgumentError);
  EXPECT_THROW(VoteAccumulator(3, 0), ArgumentError);
}

TEST(Vote, MatchesBruteForceTallyInAnyMergeOrder) {
  std::mt19937_64 rng(31);
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = 100;
    const int classes = 20, chunks = 5;
    std::vector<std::vector<int>> table(chunks, std::vector<int>(n, -1));
    for (auto& row : table)
      for (auto& v : row)
        if (rng() % 3 != 0) v = static_cast<int>(rng() % classes);
    for (std::size_t i = 0; i < n; ++i) table[0][i] = static_cast<int>(rng() % 4);
    std::vector<VoteAccumulator> parts;
    for (const auto& row : table) {
      VoteAccumulator a(n, classes);
      for (std::size_t i = 0; i < n; ++i)
        if (row[i] >= 0) a.add(i, row[i]);
      parts.push_back(std::move(a));
    }
    std::vector<int> order{0, 1, 2, 3, 4};
    std::shuffle(order.begin(), order.end(), rng);
    VoteAccumulator merged(n, classes);
    for (int k : order) merged.merge(parts[k]);
    const auto got = vote(merged);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<int> tally(classes, 0);
      int votes = 0;
      for (const auto& row : table)
        if (row[i] >= 0) ++tally[row[i]], ++votes;
      int best = 0;
      for (int c = 0; c < classes; ++c)
        if (tally[c] > tally[best]) best = c;
      EXPECT_EQ(got[i], best);
      EXPECT_EQ(merged.total(i), static_cast<std::uint64_t>(votes));
      if (votes == 1) EXPECT_EQ(got[i], table[0][i]);
    }
  }
}
