#pragma once

// Contextual similarity: per-neighbor characters concatenated with the center
// coordinate, an eight-octant orientation encoding, a shared MLP, and a cosine
// comparison between the P- and Q-neighborhood embeddings.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "safnet/core.hpp"
#include "safnet/nn.hpp"

namespace safnet {

inline constexpr int kCharacterDim = 4;
inline constexpr int kEnrichInputDim = 3 + kCharacterDim;
inline constexpr int kContextDim = 64;
inline constexpr int kOctants = 8;

using ContextVec = nn::VecN<kContextDim>;
// Similarity-branch embedding of a neighborhood.
using ContextFeature = ContextVec;

struct CsmParams {
  nn::Linear enrich{kContextDim, kEnrichInputDim};
  std::array<nn::Linear, kOctants> octant;
  std::array<nn::Linear, 3> mlp;
  nn::Linear out{kContextDim, kContextDim};

  CsmParams() {
    for (auto& l : octant) l = nn::Linear(kContextDim, kContextDim);
    for (auto& l : mlp) l = nn::Linear(kContextDim, kContextDim);
  }

  static CsmParams initialized(std::uint64_t seed) {
    CsmParams p;
    Rng rng(seed);
    p.enrich.init(rng);
    for (auto& l : p.octant) l.init(rng);
    for (auto& l : p.mlp) l.init(rng);
    p.out.init(rng);
    return p;
  }

  void set_zero() {
    visit([](const std::string&, double* d, std::size_t n, bool) { std::fill(d, d + n, 0.0); });
  }

  // Fixed order: enrich, octant[0..7], mlp[0..2], out; weight before bias.
  template <class F>
  void visit(F&& f) {
    enrich.visit("csm.enrich", f);
    for (int o = 0; o < kOctants; ++o) octant[o].visit("csm.octant" + std::to_string(o), f);
    for (int m = 0; m < 3; ++m) mlp[m].visit("csm.mlp" + std::to_string(m), f);
    out.visit("csm.out", f);
  }
};

using Character = std::array<double, kCharacterDim>;

// (x_i - x_j, |x_i - x_j|^2) per neighbor.
inline Character neighborhood_character(const Point3& center, const Point3& neighbor) {
  const Point3 d = center - neighbor;
  return {d.x, d.y, d.z, squared_norm(d)};
}

inline std::vector<Character> neighborhood_characters(const Point3& center, std::span<const Point3> neighbors) {
  if (neighbors.empty()) throw ArgumentError("neighborhood_characters: empty neighborhood");
  std::vector<Character> out;
  out.reserve(neighbors.size());
  for (const auto& n : neighbors) out.push_back(neighborhood_character(center, n));
  return out;
}

// Octant of neighbor j around the center: bit 0/1/2 set when the x/y/z
// component of (x_j - x_i) is non-negative.
inline int octant_of(const Point3& center, const Point3& neighbor) {
  const Point3 d = neighbor - center;
  return (d.x >= 0.0 ? 1 : 0) | (d.y >= 0.0 ? 2 : 0) | (d.z >= 0.0 ? 4 : 0);
}

// Per octant, the position in `neighbors` of the nearest neighbor in that
// octant (ties to the lower position), or -1 when the octant is empty.
inline std::array<int, kOctants> octant_partition(const Point3& center, std::span<const Point3> neighbors) {
  std::array<int, kOctants> slot;
  slot.fill(-1);
  std::array<double, kOctants> best;
  best.fill(0.0);
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    const int o = octant_of(center, neighbors[j]);
    const double d = squared_distance(center, neighbors[j]);
    if (slot[o] < 0 || d < best[o]) {
      slot[o] = static_cast<int>(j);
      best[o] = d;
    }
  }
  return slot;
}

// Intermediate values of one neighborhood's forward pass, kept for backward.
struct CsmCache {
  std::array<int, kOctants> slot{};
  std::array<nn::VecN<kEnrichInputDim>, kOctants> input;
  std::array<ContextVec, kOctants> enrich_pre;
  std::array<ContextVec, kOctants> enriched;
  ContextVec pooled;
  std::array<ContextVec, 3> mlp_pre;
  std::array<ContextVec, 3> mlp_act;
  ContextVec embedding;

  // Output of the MLP stack; the point network consumes this.
  const ContextVec& context() const { return mlp_act[2]; }
};

/**
 * Forward pass for one neighborhood. Each octant winner is enriched with
 * relu(W [x_i, characters] + b) and mapped by its octant's linear layer; the
 * filled octants are summed (empty octants contribute zero), then passed
 * through three relu layers (the context feature) and a final linear layer
 * (the similarity embedding).
 */
inline void csm_forward(const Point3& center, std::span<const Point3> neighbors, const CsmParams& params,
                        CsmCache& cache) {
  if (neighbors.empty()) throw ArgumentError("contextual_feature: empty neighborhood");
  cache.slot = octant_partition(center, neighbors);
  cache.pooled.setZero();
  ContextVec mapped;
  for (int o = 0; o < kOctants; ++o) {
    if (cache.slot[o] < 0) continue;
    const auto ch = neighborhood_character(center, neighbors[cache.slot[o]]);
    auto& x = cache.input[o];
    x << center.x, center.y, center.z, ch[0], ch[1], ch[2], ch[3];
    params.enrich.forward(x, cache.enrich_pre[o]);
    cache.enriched[o] = nn::relu(cache.enrich_pre[o]);
    params.octant[o].forward(cache.enriched[o], mapped);
    cache.pooled += mapped;
  }
  const ContextVec* in = &cache.pooled;
  for (int m = 0; m < 3; ++m) {
    params.mlp[m].forward(*in, cache.mlp_pre[m]);
    cache.mlp_act[m] = nn::relu(cache.mlp_pre[m]);
    in = &cache.mlp_act[m];
  }
  params.out.forward(cache.mlp_act[2], cache.embedding);
}

inline ContextFeature contextual_feature(const Point3& center, std::span<const Point3> neighbors,
                                         const CsmParams& params) {
  CsmCache cache;
  csm_forward(center, neighbors, params, cache);
  return cache.embedding;
}

// Reverse pass given gradients on the context feature and on the embedding.
inline void csm_backward(const CsmCache& cache, const CsmParams& params, const ContextVec& g_context,
                         const ContextVec& g_embedding, CsmParams& grads) {
  params.out.accumulate(cache.mlp_act[2], g_embedding, grads.out);
  ContextVec g;
  params.out.input_grad(g_embedding, g);
  g += g_context;
  ContextVec g_pre, g_in;
  for (int m = 2; m >= 0; --m) {
    g_pre = nn::relu_grad(cache.mlp_pre[m], g);
    params.mlp[m].accumulate(m == 0 ? cache.pooled : cache.mlp_act[m - 1], g_pre, grads.mlp[m]);
    params.mlp[m].input_grad(g_pre, g_in);
    g = g_in;
  }
  for (int o = 0; o < kOctants; ++o) {
    if (cache.slot[o] < 0) continue;
    params.octant[o].accumulate(cache.enriched[o], g, grads.octant[o]);
    params.octant[o].input_grad(g, g_in);
    g_pre = nn::relu_grad(cache.enrich_pre[o], g_in);
    params.enrich.accumulate(cache.input[o], g_pre, grads.enrich);
  }
}

struct CosineResult {
  double value = 0.0;
  ContextVec grad_a;  // d value / d a
  ContextVec grad_b;
};

inline constexpr double kCosineNormFloor = 1e-12;

template <class A, class B>
double cosine_similarity(const A& a, const B& b) {
  const double na = a.norm(), nb = b.norm();
  if (na < kCosineNormFloor || nb < kCosineNormFloor) return 0.0;
  return a.dot(b) / (na * nb);
}

inline CosineResult cosine_similarity_with_grad(const ContextVec& a, const ContextVec& b) {
  CosineResult r;
  const double na = a.norm(), nb = b.norm();
  if (na < kCosineNormFloor || nb < kCosineNormFloor) {
    r.grad_a.setZero();
    r.grad_b.setZero();
    return r;
  }
  r.value = a.dot(b) / (na * nb);
  r.grad_a = b / (na * nb) - r.value * a / (na * na);
  r.grad_b = a / (na * nb) - r.value * b / (nb * nb);
  return r;
}

}  // namespace safnet
