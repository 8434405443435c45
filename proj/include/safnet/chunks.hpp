#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "safnet/core.hpp"
#include "safnet/random.hpp"

namespace safnet {

inline constexpr std::array<double, 3> kDefaultChunkSize{1.5, 1.5, 3.0};
inline constexpr double kDefaultChunkStride = 0.5;
inline constexpr int kDefaultChunkSamples = 8192;

struct ChunkWindow {
  Point3 min_corner;
  std::array<double, 3> size{};
  std::vector<std::size_t> point_indices;
};

/**
 * Sliding-window decomposition over the xy footprint of `cloud`.
 *
 * Windows start at the footprint minimum and advance by `stride` along x and y
 * until the window's far edge reaches the footprint maximum; a single window
 * spans the full z range (its z size is max(chunk_size.z, scene height)).
 * Membership is closed on the low side and open on the high side, except that
 * a window reaching the scene maximum also includes points lying exactly on it.
 * Empty windows are dropped; the rest are ordered row-major by (y, x).
 */
inline std::vector<ChunkWindow> make_chunks(const PointCloud& cloud, std::array<double, 3> chunk_size = kDefaultChunkSize,
                                            double stride = kDefaultChunkStride) {
  if (!(chunk_size[0] > 0.0 && chunk_size[1] > 0.0 && chunk_size[2] > 0.0))
    throw ArgumentError("make_chunks: chunk size must be positive");
  if (!(stride > 0.0)) throw ArgumentError("make_chunks: stride must be positive");
  if (stride > chunk_size[0] || stride > chunk_size[1])
    throw ArgumentError("make_chunks: stride larger than the chunk footprint would leave gaps");
  if (cloud.empty()) return {};

  Point3 lo = cloud.points.front(), hi = lo;
  for (const auto& p : cloud.points) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  auto window_count = [&](double start, double end, double size) {
    std::size_t n = 1;
    while (start + static_cast<double>(n - 1) * stride + size < end) ++n;
    return n;
  };
  const std::size_t nx = window_count(lo.x, hi.x, chunk_size[0]);
  const std::size_t ny = window_count(lo.y, hi.y, chunk_size[1]);
  const double height = std::max(chunk_size[2], hi.z - lo.z);

  auto inside = [](double v, double w_lo, double w_hi, double scene_hi) {
    return v >= w_lo && (v < w_hi || (w_hi >= scene_hi && v <= scene_hi));
  };

  std::vector<ChunkWindow> windows;
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      ChunkWindow w;
      w.min_corner = {lo.x + static_cast<double>(ix) * stride, lo.y + static_cast<double>(iy) * stride, lo.z};
      w.size = {chunk_size[0], chunk_size[1], height};
      const double x_hi = w.min_corner.x + w.size[0], y_hi = w.min_corner.y + w.size[1];
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& p = cloud.points[i];
        if (inside(p.x, w.min_corner.x, x_hi, hi.x) && inside(p.y, w.min_corner.y, y_hi, hi.y))
          w.point_indices.push_back(i);
      }
      if (!w.point_indices.empty()) windows.push_back(std::move(w));
    }
  }
  return windows;
}

/**
 * Exactly `n` point indices from the chunk. With enough points, n distinct
 * indices are drawn without replacement; otherwise every index appears once
 * (shuffled) followed by n - |chunk| draws with replacement.
 */
inline std::vector<std::size_t> sample_chunk(const ChunkWindow& chunk, std::size_t n, std::uint64_t seed) {
  if (chunk.point_indices.empty()) throw ArgumentError("sample_chunk: empty chunk");
  if (n == 0) throw ArgumentError("sample_chunk: sample count must be positive");
  Rng rng(seed);
  std::vector<std::size_t> pool = chunk.point_indices;
  const std::size_t m = pool.size();
  const std::size_t draws = std::min(n, m);
  for (std::size_t i = 0; i < draws; ++i) std::swap(pool[i], pool[i + rng.below(m - i)]);
  pool.resize(draws);
  while (pool.size() < n) pool.push_back(chunk.point_indices[rng.below(m)]);
  return pool;
}

// Per-point class vote tallies. Merging is a plain element-wise sum, so the
// final result does not depend on the order chunks are accumulated in.
class VoteAccumulator {
 public:
  VoteAccumulator(std::size_t point_count, int class_count)
      : point_count_(point_count), class_count_(class_count),
        counts_(point_count * static_cast<std::size_t>(std::max(class_count, 0)), 0) {
    if (class_count <= 0) throw ArgumentError("VoteAccumulator: class_count must be positive");
  }

  void add(std::size_t point, int cls, std::uint32_t weight = 1) {
    if (point >= point_count_) throw ArgumentError("VoteAccumulator: point index out of range");
    if (cls < 0 || cls >= class_count_) throw ArgumentError("VoteAccumulator: class id out of range");
    counts_[point * class_count_ + cls] += weight;
  }

  void merge(const VoteAccumulator& other) {
    if (other.point_count_ != point_count_ || other.class_count_ != class_count_)
      throw ArgumentError("VoteAccumulator: shape mismatch in merge");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  }

  std::uint32_t count(std::size_t point, int cls) const { return counts_[point * class_count_ + cls]; }
  std::uint64_t total(std::size_t point) const {
    std::uint64_t t = 0;
    for (int c = 0; c < class_count_; ++c) t += count(point, c);
    return t;
  }
  std::size_t point_count() const { return point_count_; }
  int class_count() const { return class_count_; }

 private:
  std::size_t point_count_;
  int class_count_;
  std::vector<std::uint32_t> counts_;
};

// Per point, the class with the most votes (ties to the lowest class id).
inline std::vector<int> vote(const VoteAccumulator& acc) {
  std::vector<int> labels(acc.point_count(), 0);
  std::vector<std::size_t> uncovered;
  for (std::size_t i = 0; i < acc.point_count(); ++i) {
    int best = 0;
    for (int c = 1; c < acc.class_count(); ++c)
      if (acc.count(i, c) > acc.count(i, best)) best = c;
    if (acc.count(i, best) == 0) uncovered.push_back(i);
    labels[i] = best;
  }
  if (!uncovered.empty()) {
    std::string msg = "uncovered point(s) with no votes: ";
    for (std::size_t k = 0; k < uncovered.size() && k < 32; ++k) msg += (k ? "," : "") + std::to_string(uncovered[k]);
    if (uncovered.size() > 32) msg += ",... (" + std::to_string(uncovered.size()) + " total)";
    throw ArgumentError(msg);
  }
  return labels;
}

}  // namespace safnet
