#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "safnet/core.hpp"

namespace safnet {

struct NeighborHit {
  std::size_t index = 0;
  double distance = 0.0;

  friend bool operator==(const NeighborHit&, const NeighborHit&) = default;
};

// Strict ordering used everywhere for neighbor lists: distance, then index.
inline bool hit_less(const NeighborHit& a, const NeighborHit& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

/**
 * Exact k-nearest-neighbor search over an immutable point list.
 *
 * A k-d tree with per-node bounding boxes. Results are ordered by Euclidean
 * distance with ties broken by ascending original index, and match a
 * brute-force scan exactly: candidate distances are evaluated with the same
 * expression a scan would use, and box pruning is conservative under
 * floating-point rounding (only boxes strictly farther than the current
 * worst candidate are skipped).
 *
 * All query methods are const and safe to call concurrently.
 */
class SpatialIndex {
 public:
  SpatialIndex() = default;

  explicit SpatialIndex(std::vector<Point3> points, std::size_t leaf_size = 12)
      : points_(std::move(points)), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
      build(0, static_cast<std::uint32_t>(points_.size()));
    }
  }

  std::size_t point_count() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const std::vector<Point3>& points() const { return points_; }
  const Point3& point(std::size_t i) const { return points_[i]; }

  std::vector<NeighborHit> knn(const Point3& query, std::size_t k) const {
    return search(query, k, std::numeric_limits<double>::infinity());
  }

  // Like knn but drops hits farther than `radius`; may return an empty list.
  std::vector<NeighborHit> radius_knn(const Point3& query, std::size_t k, double radius) const {
    if (!(radius > 0.0)) throw ArgumentError("radius_knn: radius must be positive");
    return search(query, k, radius);
  }

  NeighborHit nearest(const Point3& query) const {
    require_queryable(1);
    NeighborHit best{0, std::numeric_limits<double>::infinity()};
    nearest_rec(0, query, best);
    return best;
  }

 private:
  struct Node {
    Point3 lo, hi;
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
    bool leaf() const { return left < 0; }
  };

  void require_queryable(std::size_t k) const {
    if (points_.empty()) throw ArgumentError("empty index");
    if (k == 0) throw ArgumentError("k must be positive");
  }

  std::int32_t build(std::uint32_t begin, std::uint32_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo = node.hi = points_[order_[begin]];
    for (std::uint32_t i = begin + 1; i < end; ++i) {
      const auto& p = points_[order_[i]];
      node.lo = {std::min(node.lo.x, p.x), std::min(node.lo.y, p.y), std::min(node.lo.z, p.z)};
      node.hi = {std::max(node.hi.x, p.x), std::max(node.hi.y, p.y), std::max(node.hi.z, p.z)};
    }
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= leaf_size_) return id;

    const Point3 extent = node.hi - node.lo;
    int axis = 0;
    if (extent.y > extent[axis]) axis = 1;
    if (extent.z > extent[axis]) axis = 2;
    if (extent[axis] <= 0.0) return id;  // all coincident

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  static double box_distance(const Node& n, const Point3& q) {
    const double gx = std::max({0.0, n.lo.x - q.x, q.x - n.hi.x});
    const double gy = std::max({0.0, n.lo.y - q.y, q.y - n.hi.y});
    const double gz = std::max({0.0, n.lo.z - q.z, q.z - n.hi.z});
    return std::sqrt(gx * gx + gy * gy + gz * gz);
  }

  std::vector<NeighborHit> search(const Point3& query, std::size_t k, double radius) const {
    require_queryable(k);
    k = std::min(k, points_.size());
    std::vector<NeighborHit> best;
    best.reserve(k + 1);
    search_rec(0, query, k, radius, best);
    return best;
  }

  // `best` stays sorted by hit_less and holds at most k entries.
  void search_rec(std::int32_t id, const Point3& q, std::size_t k, double radius, std::vector<NeighborHit>& best) const {
    const Node& node = nodes_[id];
    if (node.leaf()) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        const double d = distance(q, points_[idx]);
        if (d > radius) continue;
        NeighborHit hit{idx, d};
        if (best.size() == k && !hit_less(hit, best.back())) continue;
        best.insert(std::upper_bound(best.begin(), best.end(), hit, hit_less), hit);
        if (best.size() > k) best.pop_back();
      }
      return;
    }
    const Node& l = nodes_[node.left];
    const Node& r = nodes_[node.right];
    const double dl = box_distance(l, q);
    const double dr = box_distance(r, q);
    const bool left_first = dl <= dr;
    const std::int32_t first = left_first ? node.left : node.right;
    const std::int32_t second = left_first ? node.right : node.left;
    const double d_first = left_first ? dl : dr;
    const double d_second = left_first ? dr : dl;
    auto worth = [&](double box) {
      if (box > radius) return false;
      return best.size() < k || box <= best.back().distance;
    };
    if (worth(d_first)) search_rec(first, q, k, radius, best);
    if (worth(d_second)) search_rec(second, q, k, radius, best);
  }

  void nearest_rec(std::int32_t id, const Point3& q, NeighborHit& best) const {
    const Node& node = nodes_[id];
    if (node.leaf()) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        NeighborHit hit{idx, distance(q, points_[idx])};
        if (hit_less(hit, best)) best = hit;
      }
      return;
    }
    const double dl = box_distance(nodes_[node.left], q);
    const double dr = box_distance(nodes_[node.right], q);
    const bool left_first = dl <= dr;
    if ((left_first ? dl : dr) <= best.distance) nearest_rec(left_first ? node.left : node.right, q, best);
    if ((left_first ? dr : dl) <= best.distance) nearest_rec(left_first ? node.right : node.left, q, best);
  }

  std::vector<Point3> points_;
  std::size_t leaf_size_ = 12;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

inline SpatialIndex build_index(const PointCloud& cloud) { return SpatialIndex(cloud.points); }

inline std::vector<NeighborHit> knn(const SpatialIndex& index, const Point3& query, std::size_t k) {
  return index.knn(query, k);
}

inline std::vector<NeighborHit> radius_knn(const SpatialIndex& index, const Point3& query, std::size_t k,
                                           double radius) {
  return index.radius_knn(query, k, radius);
}

}  // namespace safnet
