#pragma once

// Scene-level plumbing between the geometric modules and the network: per
// scene P-neighborhoods, per chunk view selection and back-projection, the
// per-point inputs of the fusion network, and voted whole-scene inference.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "safnet/chunks.hpp"
#include "safnet/core.hpp"
#include "safnet/fusion.hpp"
#include "safnet/gsm.hpp"
#include "safnet/parallel.hpp"
#include "safnet/projection.hpp"
#include "safnet/spatial_index.hpp"
#include "safnet/view_selection.hpp"

namespace safnet {

// Stand-in distance for GSM when a chunk has no back-projected points at all.
inline constexpr double kNoImageDistance = 1e3;

struct PipelineConfig {
  int view_budget = kDefaultViewBudget;
  double match_radius = kDefaultMatchRadius;
  std::array<double, 3> chunk_size = kDefaultChunkSize;
  double stride = kDefaultChunkStride;
  std::size_t neighborhood_k = kNeighborhoodSize;
  double query_radius = kDefaultQueryRadius;
  double unprojected_radius = kDefaultUnprojectedRadius;
  double q_margin = 0.5;  // Q is cropped to the chunk footprint grown by this much
  int threads = 1;

  void validate() const {
    if (view_budget < 1) throw ArgumentError("pipeline: view_budget must be >= 1");
    if (!(match_radius > 0)) throw ArgumentError("pipeline: match_radius must be positive");
    if (neighborhood_k < 1) throw ArgumentError("pipeline: neighborhood_k must be >= 1");
    if (!(query_radius > 0)) throw ArgumentError("pipeline: query_radius must be positive");
    if (!(unprojected_radius > 0)) throw ArgumentError("pipeline: unprojected_radius must be positive");
    if (!(q_margin >= 0)) throw ArgumentError("pipeline: q_margin must be >= 0");
    if (threads < 1) throw ArgumentError("pipeline: threads must be >= 1");
  }
};

class SceneContext {
 public:
  SceneContext(const SceneBundle& scene, const PipelineConfig& cfg)
      : scene_(&scene), cfg_(cfg), p_index_(scene.cloud.points) {
    cfg.validate();
    if (scene.cloud.empty()) throw ArgumentError("scene has an empty point cloud");
    k_ = std::min(cfg.neighborhood_k, scene.cloud.size());
    const std::size_t n = scene.cloud.size();
    neighbors_.resize(n * k_);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
      const auto hits = p_index_.knn(scene.cloud.points[i], k_);
      for (std::size_t j = 0; j < k_; ++j) neighbors_[i * k_ + j] = static_cast<std::uint32_t>(hits[j].index);
    });
    raw_.resize(scene.frames.size());
    parallel_for(scene.frames.size(), cfg.threads, [&](std::size_t f) { raw_[f] = raw_image_channels(scene.frames[f]); });
    chunks_ = make_chunks(scene.cloud, cfg.chunk_size, cfg.stride);
  }

  const SceneBundle& scene() const { return *scene_; }
  const PipelineConfig& config() const { return cfg_; }
  const SpatialIndex& p_index() const { return p_index_; }
  const std::vector<ChunkWindow>& chunks() const { return chunks_; }
  std::span<const std::uint32_t> p_neighbors(std::size_t i) const { return {neighbors_.data() + i * k_, k_}; }
  const std::vector<double>& raw_channels(std::size_t frame_pos) const { return raw_[frame_pos]; }

 private:
  const SceneBundle* scene_;
  PipelineConfig cfg_;
  SpatialIndex p_index_;
  std::size_t k_ = 0;
  std::vector<std::uint32_t> neighbors_;
  std::vector<std::vector<double>> raw_;
  std::vector<ChunkWindow> chunks_;
};

/**
 * One chunk's image side: the greedily selected views, their back-projection Q
 * (raw channels as features, pixel labels as labels) cropped around the
 * window, and lazily cached nearest-Q distances of scene points. Not safe for
 * concurrent use.
 */
class ChunkContext {
 public:
  // A negative view_budget uses the pipeline's configured budget.
  ChunkContext(const SceneContext& ctx, const ChunkWindow& window, int view_budget = -1) : ctx_(&ctx), window_(&window) {
    const auto& scene = ctx.scene();
    const auto& cfg = ctx.config();
    if (!scene.frames.empty()) {
      std::vector<Point3> pts;
      pts.reserve(window.point_indices.size());
      for (auto i : window.point_indices) pts.push_back(scene.cloud.points[i]);
      const int budget = view_budget < 0 ? cfg.view_budget : view_budget;
      selected_ = greedy_select(scene.frames, std::span<const Point3>(pts), budget, cfg.match_radius, 1);
    }
    const double x0 = window.min_corner.x - cfg.q_margin, x1 = window.min_corner.x + window.size[0] + cfg.q_margin;
    const double y0 = window.min_corner.y - cfg.q_margin, y1 = window.min_corner.y + window.size[1] + cfg.q_margin;
    q_.cloud.feature_dim = kRawImageChannels;
    for (int id : selected_) {
      std::size_t pos = 0;
      while (scene.frames[pos].frame_id != id) ++pos;
      const auto full = backproject_frame(scene.frames[pos], ctx.raw_channels(pos), kRawImageChannels);
      for (std::size_t i = 0; i < full.size(); ++i) {
        const auto& p = full.cloud.points[i];
        if (p.x < x0 || p.x > x1 || p.y < y0 || p.y > y1) continue;
        q_.cloud.points.push_back(p);
        const double* f = full.cloud.feature(i);
        q_.cloud.features.insert(q_.cloud.features.end(), f, f + kRawImageChannels);
        q_.cloud.labels.push_back(full.cloud.labels.empty() ? -1 : full.cloud.labels[i]);
        q_.source.push_back(full.source[i]);
      }
    }
    if (!q_.empty()) q_index_ = std::make_unique<SpatialIndex>(q_.cloud.points);
    nearest_.assign(scene.cloud.size(), -1.0);
  }

  const ChunkWindow& window() const { return *window_; }
  const std::vector<int>& selected_frames() const { return selected_; }
  const BackprojectedCloud& q() const { return q_; }
  bool has_q() const { return static_cast<bool>(q_index_); }

  double nearest_q_distance(std::size_t scene_point) {
    double& d = nearest_[scene_point];
    if (d < 0.0) d = q_index_->nearest(ctx_->scene().cloud.points[scene_point]).distance;
    return d;
  }

  void inputs(std::size_t point, PointInputs& in) {
    const auto& cloud = ctx_->scene().cloud;
    const auto& cfg = ctx_->config();
    in = PointInputs{};
    in.center = cloud.points[point];
    in.label = cloud.has_labels() ? cloud.labels[point] : -1;
    const auto nb = ctx_->p_neighbors(point);
    in.p_neighbors.reserve(nb.size());
    for (auto j : nb) in.p_neighbors.push_back(cloud.points[j]);
    in.gsm.center_index = point;
    in.gsm.np = static_cast<int>(nb.size());
    if (!has_q()) {
      in.gsm.mean_dF = in.gsm.mean_dB = kNoImageDistance;
      in.gsm.mq = 0;
      return;
    }
    double sum = 0.0;
    for (auto j : nb) sum += nearest_q_distance(j);
    in.gsm.mean_dF = sum / static_cast<double>(nb.size());

    const auto hits = q_index_->radius_knn(in.center, cfg.neighborhood_k, cfg.query_radius);
    for (const auto& h : hits) in.q_context.push_back(q_.cloud.points[h.index]);
    const auto back = backward_search(in.q_context, in.p_neighbors, *q_index_, in.center);
    in.gsm.mean_dB = back.mean_dB;
    in.gsm.mq = back.mq;
    if (in.q_context.empty()) in.q_context.push_back(q_index_->point(q_index_->nearest(in.center).index));

    const auto agg = aggregate_image_features(in.center, q_.cloud, *q_index_, kImageNeighbors);
    for (int c = 0; c < kRawImageChannels; ++c) in.image_raw[c] = agg[c];
    const auto nearest = q_index_->nearest(in.center);
    if (nearest.distance <= cfg.unprojected_radius) {
      in.has_unprojected = true;
      const double* f = q_.cloud.feature(nearest.index);
      for (int c = 0; c < kRawImageChannels; ++c) in.unprojected_raw[c] = f[c];
      in.unprojected_label = q_.cloud.labels[nearest.index];
    }
  }

  PointInputs inputs(std::size_t point) {
    PointInputs in;
    inputs(point, in);
    return in;
  }

  // Up to n labeled back-projected pixels of this chunk's window, drawn with
  // replacement.
  std::vector<PixelSample> sample_pixels(std::size_t n, std::uint64_t seed) const {
    std::vector<std::size_t> labeled;
    const auto& w = *window_;
    for (std::size_t i = 0; i < q_.size(); ++i) {
      const auto& p = q_.cloud.points[i];
      if (q_.cloud.labels[i] < 0) continue;
      if (p.x < w.min_corner.x || p.x >= w.min_corner.x + w.size[0]) continue;
      if (p.y < w.min_corner.y || p.y >= w.min_corner.y + w.size[1]) continue;
      labeled.push_back(i);
    }
    std::vector<PixelSample> out;
    if (labeled.empty() || n == 0) return out;
    Rng rng(seed);
    out.resize(n);
    for (auto& s : out) {
      const std::size_t i = labeled[rng.below(labeled.size())];
      const double* f = q_.cloud.feature(i);
      for (int c = 0; c < kRawImageChannels; ++c) s.raw[c] = f[c];
      s.label = q_.cloud.labels[i];
    }
    return out;
  }

 private:
  const SceneContext* ctx_;
  const ChunkWindow* window_;
  std::vector<int> selected_;
  BackprojectedCloud q_;
  std::unique_ptr<SpatialIndex> q_index_;
  std::vector<double> nearest_;
};

struct SegmentResult {
  std::vector<int> labels;
  std::size_t chunk_count = 0;
  std::uint64_t evaluations = 0;  // point-in-chunk predictions
  double mean_similarity = 0.0;   // mean s_combined over those predictions
};

/**
 * Labels every point of the scene: the 3D branch is evaluated once per point,
 * each chunk predicts all of its points against its own views, and the chunk
 * predictions are combined by majority vote. The result does not depend on
 * cfg.threads.
 */
inline SegmentResult segment_scene(const Model& model, const ModelOptions& opt, const SceneBundle& scene,
                                   const PipelineConfig& cfg) {
  scene.validate();
  if (scene.class_count > model.class_count)
    throw ArgumentError("scene has more classes than the model was trained for");
  SceneContext ctx(scene, cfg);
  const std::size_t n = scene.cloud.size();

  std::vector<ContextVec> embed(opt.use_csm ? n : 0);
  std::vector<PointVec> f3d(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    PointInputs in;
    in.center = scene.cloud.points[i];
    for (auto j : ctx.p_neighbors(i)) in.p_neighbors.push_back(scene.cloud.points[j]);
    PointForward fw;
    forward_point_3d(model, opt, in, fw);
    f3d[i] = fw.f3d;
    if (opt.use_csm) embed[i] = fw.csm_p.embedding;
  });

  const auto& chunks = ctx.chunks();
  std::vector<std::vector<std::uint8_t>> predictions(chunks.size());
  std::vector<double> sim_sums(chunks.size(), 0.0);
  parallel_for(chunks.size(), cfg.threads, [&](std::size_t c) {
    ChunkContext chunk(ctx, chunks[c]);
    PointInputs in;
    PointForward fw;
    auto& out = predictions[c];
    out.reserve(chunks[c].point_indices.size());
    for (auto i : chunks[c].point_indices) {
      chunk.inputs(i, in);
      fw.csm_on = opt.use_csm;
      fw.f3d = f3d[i];
      if (opt.use_csm) fw.csm_p.embedding = embed[i];
      forward_point_fusion(model, opt, in, false, nullptr, fw);
      out.push_back(static_cast<std::uint8_t>(fw.predicted(model.class_count)));
      sim_sums[c] += fw.sim.s_combined;
    }
  });

  VoteAccumulator acc(n, model.class_count);
  SegmentResult result;
  double sim_total = 0.0;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    for (std::size_t k = 0; k < chunks[c].point_indices.size(); ++k) acc.add(chunks[c].point_indices[k], predictions[c][k]);
    result.evaluations += chunks[c].point_indices.size();
    sim_total += sim_sums[c];
  }
  result.labels = vote(acc);
  result.chunk_count = chunks.size();
  result.mean_similarity = result.evaluations ? sim_total / static_cast<double>(result.evaluations) : 0.0;
  return result;
}

}  // namespace safnet
