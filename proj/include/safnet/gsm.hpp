#pragma once

// Geometric similarity: bidirectional nearest-neighbor distances between a
// point's neighborhood in the input cloud P and in the back-projected cloud Q,
// mapped through learnable negative exponentials.

#include <array>
#include <cmath>
#include <limits>
#include <span>

#include "safnet/core.hpp"
#include "safnet/spatial_index.hpp"

namespace safnet {

inline constexpr std::size_t kNeighborhoodSize = 64;
inline constexpr double kDefaultQueryRadius = 0.3;

struct GsmParams {
  static constexpr double kMinScale = 1e-3;
  static constexpr std::size_t kCount = 7;

  double a1 = 0.1;  // distance scale of the forward term
  double a2 = 0.1;  // distance scale of the backward term
  double a3 = 0.5;  // mixing weight, forward term
  double a4 = 0.5;  // mixing weight, backward term
  double b1 = 0.0;
  double b2 = 0.0;
  double b3 = 0.0;

  void clamp() {
    a1 = std::max(a1, kMinScale);
    a2 = std::max(a2, kMinScale);
  }

  // Fixed field order: a1 a2 a3 a4 b1 b2 b3.
  std::array<double, kCount> to_array() const { return {a1, a2, a3, a4, b1, b2, b3}; }
  static GsmParams from_array(const std::array<double, kCount>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  }
  friend bool operator==(const GsmParams&, const GsmParams&) = default;
};

struct GsmNeighborhood {
  std::size_t center_index = 0;
  double mean_dF = 0.0;
  double mean_dB = 0.0;
  int np = 1;
  int mq = 0;  // 0 marks the mismatch case (no Q point within the radius)
};

// Which directional terms enter the combined score.
struct GsmTerms {
  bool forward = true;
  bool backward = true;
};

// Mean, over the P-neighborhood, of each point's distance to its globally
// nearest point in Q.
inline double forward_search(std::span<const Point3> p_neighborhood, const SpatialIndex& q_index) {
  if (p_neighborhood.empty()) throw ArgumentError("forward_search: empty P neighborhood");
  if (q_index.empty()) throw ArgumentError("forward_search: empty Q");
  double sum = 0.0;
  for (const auto& p : p_neighborhood) sum += q_index.nearest(p).distance;
  return sum / static_cast<double>(p_neighborhood.size());
}

struct BackwardSearch {
  double mean_dB = 0.0;
  int mq = 0;
};

inline double nearest_distance_in(const Point3& q, std::span<const Point3> set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : set) best = std::min(best, distance(q, p));
  return best;
}

/**
 * Mean distance from each Q-neighborhood point to its nearest point in the
 * P-neighborhood. When the Q-neighborhood is empty, the Q point nearest to
 * `center` stands in as the sole starting point and `mq` is reported as 0.
 */
inline BackwardSearch backward_search(std::span<const Point3> q_neighborhood, std::span<const Point3> p_neighborhood,
                                      const SpatialIndex& q_index, const Point3& center) {
  if (p_neighborhood.empty()) throw ArgumentError("backward_search: empty P neighborhood");
  if (q_index.empty()) throw ArgumentError("backward_search: empty Q");
  if (q_neighborhood.empty()) {
    const Point3& start = q_index.point(q_index.nearest(center).index);
    return {nearest_distance_in(start, p_neighborhood), 0};
  }
  double sum = 0.0;
  for (const auto& q : q_neighborhood) sum += nearest_distance_in(q, p_neighborhood);
  return {sum / static_cast<double>(q_neighborhood.size()), static_cast<int>(q_neighborhood.size())};
}

struct GeoSimilarity {
  double p2q = 0.0;
  double q2p = 0.0;
  double geo = 0.0;
};

inline GeoSimilarity geo_similarity(const GsmNeighborhood& n, const GsmParams& p, GsmTerms terms = {}) {
  GeoSimilarity s;
  s.p2q = std::exp(-n.mean_dF / p.a1) + p.b1;
  s.q2p = std::exp(-n.mean_dB / p.a2) + p.b2;
  s.geo = (terms.forward ? p.a3 * s.p2q : 0.0) + (terms.backward ? p.a4 * s.q2p : 0.0) + p.b3;
  return s;
}

// d(geo)/d(a1 a2 a3 a4 b1 b2 b3).
inline std::array<double, GsmParams::kCount> geo_similarity_grad(const GsmNeighborhood& n, const GsmParams& p,
                                                                 GsmTerms terms = {}) {
  const double e1 = std::exp(-n.mean_dF / p.a1);
  const double e2 = std::exp(-n.mean_dB / p.a2);
  std::array<double, GsmParams::kCount> g{};
  if (terms.forward) {
    g[0] = p.a3 * e1 * n.mean_dF / (p.a1 * p.a1);
    g[2] = e1 + p.b1;
    g[4] = p.a3;
  }
  if (terms.backward) {
    g[1] = p.a4 * e2 * n.mean_dB / (p.a2 * p.a2);
    g[3] = e2 + p.b2;
    g[5] = p.a4;
  }
  g[6] = 1.0;
  return g;
}

}  // namespace safnet
