#pragma once

// Multi-run drivers: scene loading from a config, validation scoring, the
// component ablation, and the view-count robustness sweep.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "safnet/config.hpp"
#include "safnet/metrics.hpp"
#include "safnet/pipeline.hpp"
#include "safnet/scene_io.hpp"
#include "safnet/synth.hpp"
#include "safnet/train.hpp"

namespace safnet {

using ProgressLog = std::function<void(const std::string&)>;

inline SceneBundle synthetic_scene(const SceneSpec& spec, std::uint64_t seed) {
  SceneSpec s = spec;
  s.seed = seed;
  return generate_scene(s);
}

inline std::vector<SceneBundle> load_scenes(const ExperimentConfig& cfg, bool validation) {
  std::vector<SceneBundle> out;
  for (const auto& dir : validation ? cfg.val_scenes : cfg.train_scenes) out.push_back(read_scene(dir));
  if (!cfg.synthetic) return out;
  const auto& syn = *cfg.synthetic;
  const auto& seeds = validation ? syn.val_seeds : syn.train_seeds;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    SceneSpec spec = syn.spec;
    if (!validation && !syn.train_view_drops.empty())
      spec.degradation.view_drop = syn.train_view_drops[i % syn.train_view_drops.size()];
    out.push_back(synthetic_scene(spec, seeds[i]));
  }
  return out;
}

struct EvalSummary {
  ConfusionMatrix confusion;
  IouReport iou;                  // over the pooled confusion matrix of all scenes
  std::vector<double> scene_miou;
  double mean_similarity = 0.0;   // averaged over scenes
};

inline EvalSummary evaluate_scenes(const Model& model, const ModelOptions& opt, const std::vector<SceneBundle>& scenes,
                                   const PipelineConfig& pipeline) {
  EvalSummary s;
  s.confusion = ConfusionMatrix(model.class_count);
  for (const auto& scene : scenes) {
    if (!scene.cloud.has_labels()) throw ArgumentError("evaluation scenes must carry point labels");
    const auto seg = segment_scene(model, opt, scene, pipeline);
    const auto cm = confusion(seg.labels, scene.cloud.labels, model.class_count);
    for (std::size_t i = 0; i < cm.counts.size(); ++i) s.confusion.counts[i] += cm.counts[i];
    s.scene_miou.push_back(iou_scores(cm).miou);
    s.mean_similarity += seg.mean_similarity / static_cast<double>(scenes.size());
  }
  s.iou = iou_scores(s.confusion);
  return s;
}

struct AblationResult {
  std::string name;
  ModelOptions options;
  std::vector<double> seed_miou;
  double mean_miou = 0.0;
};

inline std::vector<AblationResult> run_ablation(const ExperimentConfig& cfg, const std::vector<SceneBundle>& train_scenes,
                                                const std::vector<SceneBundle>& val_scenes, const ProgressLog& log = {}) {
  if (val_scenes.empty()) throw ArgumentError("ablate: no validation scenes configured");
  std::vector<AblationResult> rows;
  for (const auto& row : cfg.ablation_rows) {
    AblationResult r{row.name, row.options, {}, 0.0};
    for (auto seed : cfg.ablation_seeds) {
      TrainConfig t = cfg.train;
      t.model = row.options;
      t.lambdas = row.lambdas;
      t.seed = seed;
      const auto trained = train(train_scenes, t);
      const auto eval = evaluate_scenes(trained.model, row.options, val_scenes, t.pipeline);
      r.seed_miou.push_back(eval.iou.miou);
      if (log) log("ablate " + row.name + " seed " + std::to_string(seed) + ": mIoU " + detail::format_g(eval.iou.miou, 6));
    }
    for (double m : r.seed_miou) r.mean_miou += m / static_cast<double>(r.seed_miou.size());
    rows.push_back(r);
  }
  return rows;
}

struct RobustnessPoint {
  std::uint64_t seed = 0;
  int views = 0;
  FusionMode mode = FusionMode::safnet;
  double miou = 0.0;
  double mean_similarity = 0.0;
};

// Validation scene rendered for a view condition: only `views` of every
// `base_views` frames survive and each chunk may select at most `views`.
inline SceneSpec view_condition_spec(const SceneSpec& base, int views, int base_views, double mismatch_offset) {
  SceneSpec s = base;
  s.degradation.mismatch_offset = mismatch_offset;
  s.degradation.view_drop = 1.0 - static_cast<double>(views) / static_cast<double>(base_views);
  return s;
}

/**
 * For each seed, trains a safnet-mode and a fixed-mode model with otherwise
 * identical settings, then scores both at every view count on the synthetic
 * validation scenes regenerated with the configured mismatch.
 */
inline std::vector<RobustnessPoint> run_robustness(const ExperimentConfig& cfg, const std::vector<SceneBundle>& train_scenes,
                                                   const ProgressLog& log = {}) {
  if (!cfg.synthetic || cfg.synthetic->val_seeds.empty())
    throw ArgumentError("robustness: requires synthetic validation seeds");
  const auto& rc = cfg.robustness;
  std::vector<std::vector<SceneBundle>> conditions;
  for (int v : rc.view_counts) {
    std::vector<SceneBundle> scenes;
    const SceneSpec spec = view_condition_spec(cfg.synthetic->spec, v, rc.base_views, rc.mismatch_offset);
    for (auto seed : cfg.synthetic->val_seeds) scenes.push_back(synthetic_scene(spec, seed));
    conditions.push_back(std::move(scenes));
  }
  std::vector<RobustnessPoint> out;
  for (auto seed : rc.seeds) {
    for (FusionMode mode : {FusionMode::safnet, FusionMode::fixed}) {
      TrainConfig t = cfg.train;
      t.model.mode = mode;
      t.seed = seed;
      const auto trained = train(train_scenes, t);
      for (std::size_t c = 0; c < rc.view_counts.size(); ++c) {
        PipelineConfig p = t.pipeline;
        p.view_budget = rc.view_counts[c];
        const auto eval = evaluate_scenes(trained.model, t.model, conditions[c], p);
        out.push_back({seed, rc.view_counts[c], mode, eval.iou.miou, eval.mean_similarity});
        if (log)
          log(std::string("robustness seed ") + std::to_string(seed) + " " + to_string(mode) + " views " +
              std::to_string(rc.view_counts[c]) + ": mIoU " + detail::format_g(eval.iou.miou, 6));
      }
    }
  }
  return out;
}

}  // namespace safnet
