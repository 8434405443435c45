#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "safnet/core.hpp"
#include "safnet/parallel.hpp"
#include "safnet/projection.hpp"

namespace safnet {

struct CoverageMask {
  std::vector<std::uint8_t> covered;
  int frame_id = 0;

  std::size_t count() const { return static_cast<std::size_t>(std::count(covered.begin(), covered.end(), 1)); }
};

inline constexpr double kDefaultMatchRadius = 0.05;
inline constexpr int kDefaultViewBudget = 5;

/**
 * A point is covered by a frame when it projects in front of the camera onto a
 * pixel (rounded to the nearest center) inside the image, and the frame's
 * recorded depth there agrees with the projected depth to within
 * `match_radius`. The depth test rejects points hidden behind a nearer surface.
 */
inline CoverageMask compute_coverage(const RgbdFrame& frame, std::span<const Point3> points, double match_radius) {
  if (!(match_radius > 0.0)) throw ArgumentError("compute_coverage: match_radius must be positive");
  CoverageMask mask;
  mask.frame_id = frame.frame_id;
  mask.covered.assign(points.size(), 0);
  const int w = frame.width(), h = frame.height();
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto proj = project_point(points[i], frame);
    if (!proj) continue;
    const double ru = std::round(proj->u), rv = std::round(proj->v);
    if (!(ru >= 0.0 && ru < w && rv >= 0.0 && rv < h)) continue;
    const double d = frame.depth_at(static_cast<int>(ru), static_cast<int>(rv));
    if (d > 0.0 && std::abs(d - proj->z) <= match_radius) mask.covered[i] = 1;
  }
  return mask;
}

inline CoverageMask compute_coverage(const RgbdFrame& frame, const PointCloud& points, double match_radius) {
  return compute_coverage(frame, std::span<const Point3>(points.points), match_radius);
}

/**
 * Greedy maximum coverage over precomputed masks: each round picks the mask
 * adding the most not-yet-covered points (ties to the lower frame_id) and
 * stops at `budget` picks or when nothing new can be covered.
 */
inline std::vector<int> greedy_max_coverage(const std::vector<CoverageMask>& masks, int budget) {
  if (masks.empty()) throw ArgumentError("greedy_select: no frames to choose from");
  if (budget < 1) throw ArgumentError("greedy_select: budget must be at least 1");
  const std::size_t n = masks.front().covered.size();
  for (const auto& m : masks)
    if (m.covered.size() != n) throw ArgumentError("greedy_select: coverage masks of different lengths");

  std::vector<std::uint8_t> covered(n, 0);
  std::vector<bool> used(masks.size(), false);
  std::vector<int> picked;
  while (static_cast<int>(picked.size()) < budget) {
    std::size_t best = masks.size();
    std::size_t best_gain = 0;
    for (std::size_t f = 0; f < masks.size(); ++f) {
      if (used[f]) continue;
      std::size_t gain = 0;
      for (std::size_t i = 0; i < n; ++i) gain += masks[f].covered[i] & (covered[i] ^ 1);
      if (gain > best_gain || (gain == best_gain && gain > 0 && masks[f].frame_id < masks[best].frame_id)) {
        best = f;
        best_gain = gain;
      }
    }
    if (best == masks.size()) break;
    used[best] = true;
    picked.push_back(masks[best].frame_id);
    for (std::size_t i = 0; i < n; ++i) covered[i] |= masks[best].covered[i];
  }
  return picked;
}

inline std::vector<int> greedy_select(const std::vector<RgbdFrame>& frames, std::span<const Point3> points, int budget,
                                      double match_radius = kDefaultMatchRadius, int threads = 1) {
  if (frames.empty()) throw ArgumentError("greedy_select: no frames to choose from");
  if (budget < 1) throw ArgumentError("greedy_select: budget must be at least 1");
  std::vector<CoverageMask> masks(frames.size());
  parallel_for(frames.size(), threads,
               [&](std::size_t f) { masks[f] = compute_coverage(frames[f], points, match_radius); });
  return greedy_max_coverage(masks, budget);
}

inline std::vector<int> greedy_select(const std::vector<RgbdFrame>& frames, const PointCloud& points, int budget,
                                      double match_radius = kDefaultMatchRadius, int threads = 1) {
  return greedy_select(frames, std::span<const Point3>(points.points), budget, match_radius, threads);
}

}  // namespace safnet
