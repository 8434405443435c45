#include <gtest/gtest.h>

#include <limits>
#include <random>
#include <thread>

#include "safnet/spatial_index.hpp"
#include "support/oracles.hpp"

using namespace safnet;

namespace {

void expect_same(const std::vector<NeighborHit>& got, const std::vector<oracle::Hit>& want) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].index, want[i].index) << "position " << i;
    EXPECT_NEAR(got[i].distance, want[i].distance, 1e-12);
  }
}

std::vector<Point3> random_points(std::size_t n, std::uint64_t seed, double extent = 10.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({u(rng), u(rng), u(rng)});
  return pts;
}

}  // namespace

TEST(SpatialIndex, ThreePointExamples) {
  SpatialIndex idx({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
  const auto hits = idx.knn({0.9, 0, 0}, 2);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].index, 1u);
  EXPECT_NEAR(hits[0].distance, 0.1, 1e-12);
  EXPECT_EQ(hits[1].index, 0u);
  EXPECT_NEAR(hits[1].distance, 0.9, 1e-12);

  const auto r = idx.radius_knn({0.9, 0, 0}, 2, 0.5);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].index, 1u);
  EXPECT_TRUE(idx.radius_knn({0.9, 0, 0}, 2, 0.05).empty());
}

TEST(SpatialIndex, ExactQueryPointAndTieBreak) {
  SpatialIndex idx({{1, 0, 0}, {-1, 0, 0}, {0, 5, 0}});
  const auto self = idx.knn({0, 5, 0}, 1);
  EXPECT_EQ(self[0].index, 2u);
  EXPECT_EQ(self[0].distance, 0.0);
  const auto tie = idx.knn({0, 0, 0}, 1);
  EXPECT_EQ(tie[0].index, 0u);
  EXPECT_EQ(idx.nearest({0, 0, 0}).index, 0u);
}

TEST(SpatialIndex, DuplicatePointsOrderedByIndex) {
  std::vector<Point3> pts(40, Point3{1, 1, 1});
  SpatialIndex idx(pts, 4);
  const auto hits = idx.knn({0, 0, 0}, 40);
  for (std::size_t i = 0; i < hits.size(); ++i) EXPECT_EQ(hits[i].index, i);
}

TEST(SpatialIndex, EmptyAndInvalidQueries) {
  SpatialIndex empty(std::vector<Point3>{});
  EXPECT_EQ(empty.point_count(), 0u);
  EXPECT_THROW(empty.knn({0, 0, 0}, 1), ArgumentError);
  EXPECT_THROW(empty.radius_knn({0, 0, 0}, 1, 1.0), ArgumentError);
  SpatialIndex one({{1, 2, 3}});
  EXPECT_EQ(one.point_count(), 1u);
  EXPECT_THROW(one.knn({0, 0, 0}, 0), ArgumentError);
  EXPECT_THROW(one.radius_knn({0, 0, 0}, 1, 0.0), ArgumentError);
  EXPECT_THROW(one.radius_knn({0, 0, 0}, 1, -1.0), ArgumentError);
  try {
    empty.knn({0, 0, 0}, 1);
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("empty index"), std::string::npos);
  }
}

TEST(SpatialIndex, KLargerThanSetReturnsPermutation) {
  const auto pts = random_points(57, 3);
  SpatialIndex idx(pts);
  const auto hits = idx.knn({5, 5, 5}, 1000);
  ASSERT_EQ(hits.size(), pts.size());
  std::vector<bool> seen(pts.size(), false);
  for (const auto& h : hits) seen[h.index] = true;
  for (bool s : seen) EXPECT_TRUE(s);
}

TEST(SpatialIndex, InfiniteRadiusEqualsKnn) {
  const auto pts = random_points(500, 4);
  SpatialIndex idx(pts);
  for (int k : {1, 7, 64}) {
    const auto a = idx.knn({3, 4, 5}, k);
    const auto b = idx.radius_knn({3, 4, 5}, k, std::numeric_limits<double>::infinity());
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].index, b[i].index);
  }
}

TEST(SpatialIndex, MatchesBruteForceOnRandomSets) {
  std::mt19937_64 rng(11);
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t n = 1 + rng() % 3000;
    // Grid-snapped coordinates create many exact distance ties.
    auto pts = random_points(n, 100 + inst, 4.0);
    if (inst % 2 == 0)
      for (auto& p : pts) p = {std::round(p.x * 4) / 4, std::round(p.y * 4) / 4, std::round(p.z * 4) / 4};
    SpatialIndex idx(pts, 1 + inst % 16);
    std::uniform_real_distribution<double> u(-1.0, 5.0);
    for (int q = 0; q < 20; ++q) {
      const Point3 query{u(rng), u(rng), u(rng)};
      const std::size_t k = 1 + rng() % 80;
      expect_same(idx.knn(query, k), oracle::brute_knn(pts, query, k));
      const double r = 0.05 + 1.5 * std::uniform_real_distribution<double>(0, 1)(rng);
      expect_same(idx.radius_knn(query, k, r), oracle::brute_knn(pts, query, k, r));
      const auto nearest = idx.nearest(query);
      const auto want = oracle::brute_knn(pts, query, 1)[0];
      EXPECT_EQ(nearest.index, want.index);
    }
  }
}

TEST(SpatialIndex, OutputOrderInvariant) {
  const auto pts = random_points(2000, 9);
  SpatialIndex idx(pts);
  const auto hits = idx.knn({5, 5, 5}, 300);
  for (std::size_t i = 1; i < hits.size(); ++i) {
    EXPECT_LE(hits[i - 1].distance, hits[i].distance);
    if (hits[i - 1].distance == hits[i].distance) EXPECT_LT(hits[i - 1].index, hits[i].index);
  }
}

TEST(SpatialIndex, ConcurrentQueriesAgree) {
  const auto pts = random_points(5000, 21);
  SpatialIndex idx(pts);
  const auto queries = random_points(200, 22);
  std::vector<std::vector<NeighborHit>> serial;
  for (const auto& q : queries) serial.push_back(idx.knn(q, 16));
  std::vector<std::vector<NeighborHit>> par(queries.size());
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < queries.size(); i += 4) par[i] = idx.knn(queries[i], 16);
    });
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    ASSERT_EQ(par[i].size(), serial[i].size());
    for (std::size_t j = 0; j < par[i].size(); ++j) EXPECT_EQ(par[i][j].index, serial[i][j].index);
  }
}

TEST(SpatialIndex, BuildIndexFromCloudPreservesOrder) {
  PointCloud c;
  c.points = {{0, 0, 0}, {3, 0, 0}};
  const auto idx = build_index(c);
  EXPECT_EQ(idx.point_count(), 2u);
  EXPECT_EQ(knn(idx, {2.9, 0, 0}, 1)[0].index, 1u);
  EXPECT_EQ(radius_knn(idx, {0.1, 0, 0}, 2, 0.2).size(), 1u);
}
