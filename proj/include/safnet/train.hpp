#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "safnet/chunks.hpp"
#include "safnet/fusion.hpp"
#include "safnet/pipeline.hpp"

namespace safnet {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 1e-3;
  int lr_step_epochs = 40;  // learning rate is multiplied by lr_decay every this many epochs
  double lr_decay = 0.1;
  std::size_t points_per_chunk = kDefaultChunkSamples;
  int chunks_per_scene = 0;  // chunks visited per scene and epoch; 0 = all
  std::size_t batch_size = 64;
  std::size_t pixels_per_batch = 64;
  // When positive, each training chunk draws its view budget uniformly from
  // [min_view_budget, pipeline.view_budget].
  int min_view_budget = 0;
  std::uint64_t seed = 0;
  ModelOptions model;
  LossWeights lambdas;
  PipelineConfig pipeline;

  void validate() const {
    if (epochs < 0) throw ArgumentError("train: epochs must be >= 0");
    if (!(learning_rate > 0)) throw ArgumentError("train: learning_rate must be positive");
    if (lr_step_epochs < 1) throw ArgumentError("train: lr_step_epochs must be >= 1");
    if (!(lr_decay > 0)) throw ArgumentError("train: lr_decay must be positive");
    if (points_per_chunk < 1) throw ArgumentError("train: points_per_chunk must be >= 1");
    if (chunks_per_scene < 0) throw ArgumentError("train: chunks_per_scene must be >= 0");
    if (batch_size < 1) throw ArgumentError("train: batch_size must be >= 1");
    if (min_view_budget < 0 || min_view_budget > pipeline.view_budget)
      throw ArgumentError("train: min_view_budget must be in [0, view_budget]");
    if (!(model.dropout >= 0.0 && model.dropout < 1.0)) throw ArgumentError("train: dropout must be in [0, 1)");
    pipeline.validate();
  }
};

inline double learning_rate_at(const TrainConfig& cfg, int epoch) {
  return cfg.learning_rate * std::pow(cfg.lr_decay, epoch / cfg.lr_step_epochs);
}

// One plain gradient-descent step over every trainable tensor, followed by
// the GSM scale clamps.
inline void sgd_step(Model& model, Model& grad, double lr) {
  std::vector<double*> g;
  grad.visit([&](const std::string&, double* d, std::size_t n, bool) {
    for (std::size_t i = 0; i < n; ++i) g.push_back(d + i);
  });
  std::size_t k = 0;
  model.visit([&](const std::string&, double* d, std::size_t n, bool trainable) {
    for (std::size_t i = 0; i < n; ++i, ++k)
      if (trainable) d[i] -= lr * *g[k];
  });
  model.gsm.clamp();
}

inline void set_zero(Model& m) {
  m.visit([](const std::string&, double* d, std::size_t n, bool) { std::fill(d, d + n, 0.0); });
}

inline void check_finite(const LossBreakdown& b, int epoch, std::size_t batch) {
  const std::pair<const char*, double> terms[] = {
      {"l_fusion", b.l_fusion}, {"l_2d", b.l_2d}, {"l_3d", b.l_3d}, {"l_2d_unp", b.l_2d_unp}, {"total", b.total}};
  for (const auto& [name, v] : terms)
    if (!std::isfinite(v))
      throw TrainingError(std::string("non-finite loss in term ") + name + " at epoch " + std::to_string(epoch) +
                          ", batch " + std::to_string(batch));
}

struct TrainResult {
  Model model;
  std::vector<double> loss_history;     // mean total loss per epoch
  std::vector<LossBreakdown> epoch_losses;
};

using EpochCallback = std::function<void(int epoch, const LossBreakdown& mean, double lr)>;

/**
 * Seeded mini-batch gradient descent. Each epoch visits the scenes in a
 * shuffled order and, per scene, a shuffled subset of its chunks; every
 * visited chunk contributes points_per_chunk sampled points split into
 * batches, each batch paired with labeled pixels from the chunk's views.
 * Identical inputs and seed give a bit-identical loss history.
 */
inline TrainResult train(const std::vector<SceneBundle>& scenes, const TrainConfig& cfg, const Model* init = nullptr,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (scenes.empty()) throw ArgumentError("train: at least one training scene is required");
  int classes = 1;
  for (const auto& s : scenes) {
    s.validate();
    if (!s.cloud.has_labels()) throw ArgumentError("train: training scenes must carry point labels");
    classes = std::max(classes, s.class_count);
  }
  TrainResult result;
  result.model = init ? *init : Model::initialized(classes, cfg.seed);
  if (result.model.class_count < classes) throw ArgumentError("train: model has fewer classes than the scenes");
  Model grad = Model::zeros_like(result.model);

  std::vector<std::unique_ptr<SceneContext>> contexts;
  for (const auto& s : scenes) contexts.push_back(std::make_unique<SceneContext>(s, cfg.pipeline));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    Rng order(Rng::mix(cfg.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> scene_order(scenes.size());
    for (std::size_t i = 0; i < scene_order.size(); ++i) scene_order[i] = i;
    for (std::size_t i = scene_order.size(); i > 1; --i) std::swap(scene_order[i - 1], scene_order[order.below(i)]);

    LossBreakdown sum;
    std::size_t batches = 0;
    for (std::size_t si : scene_order) {
      const auto& ctx = *contexts[si];
      const auto& chunks = ctx.chunks();
      std::vector<std::size_t> chunk_order(chunks.size());
      for (std::size_t i = 0; i < chunk_order.size(); ++i) chunk_order[i] = i;
      for (std::size_t i = chunk_order.size(); i > 1; --i) std::swap(chunk_order[i - 1], chunk_order[order.below(i)]);
      if (cfg.chunks_per_scene > 0 && chunk_order.size() > static_cast<std::size_t>(cfg.chunks_per_scene))
        chunk_order.resize(cfg.chunks_per_scene);

      for (std::size_t ci : chunk_order) {
        int budget = cfg.pipeline.view_budget;
        if (cfg.min_view_budget > 0)
          budget = cfg.min_view_budget + static_cast<int>(order.below(cfg.pipeline.view_budget - cfg.min_view_budget + 1));
        ChunkContext chunk(ctx, chunks[ci], budget);
        const auto sample = sample_chunk(chunks[ci], cfg.points_per_chunk, order.next());
        std::vector<PointInputs> batch;
        for (std::size_t start = 0; start < sample.size(); start += cfg.batch_size) {
          batch.clear();
          const std::size_t end = std::min(sample.size(), start + cfg.batch_size);
          for (std::size_t k = start; k < end; ++k) {
            if (scenes[si].cloud.labels[sample[k]] < 0) continue;
            batch.push_back(chunk.inputs(sample[k]));
          }
          const auto pixels = chunk.sample_pixels(cfg.pixels_per_batch, order.next());
          if (batch.empty() && pixels.empty()) continue;
          set_zero(grad);
          const auto loss = evaluate_batch(result.model, cfg.model, cfg.lambdas, batch, pixels, true, order.next(), &grad);
          check_finite(loss, epoch, batches);
          sgd_step(result.model, grad, lr);
          sum.l_fusion += loss.l_fusion;
          sum.l_2d += loss.l_2d;
          sum.l_3d += loss.l_3d;
          sum.l_2d_unp += loss.l_2d_unp;
          sum.total += loss.total;
          sum.point_count += loss.point_count;
          sum.pixel_count += loss.pixel_count;
          sum.unprojected_count += loss.unprojected_count;
          ++batches;
        }
      }
    }
    LossBreakdown mean = sum;
    mean.lambdas = cfg.lambdas;
    if (batches) {
      const double inv = 1.0 / static_cast<double>(batches);
      mean.l_fusion *= inv;
      mean.l_2d *= inv;
      mean.l_3d *= inv;
      mean.l_2d_unp *= inv;
      mean.total *= inv;
    }
    result.loss_history.push_back(mean.total);
    result.epoch_losses.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean, lr);
  }
  return result;
}

}  // namespace safnet
