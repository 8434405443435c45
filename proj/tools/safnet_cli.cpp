#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "safnet/safnet.hpp"

namespace {

using namespace safnet;
namespace fs = std::filesystem;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Input problems (bad arguments, unreadable or malformed files).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << msg << std::endl; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

nlohmann::ordered_json loss_json(const LossBreakdown& b) {
  return {{"total", b.total}, {"l_fusion", b.l_fusion}, {"l_2d", b.l_2d}, {"l_3d", b.l_3d}, {"l_2d_unp", b.l_2d_unp}};
}

int gen_scene(const std::string& spec_path, std::uint64_t seed, const std::string& out) {
  SceneSpec spec = scene_spec_from_json(Json::parse(safnet::detail::slurp(spec_path)), "spec");
  spec.seed = seed;
  const auto scene = generate_scene(spec);
  write_scene(scene, out);
  log("wrote " + out + ": " + std::to_string(scene.cloud.size()) + " points, " + std::to_string(scene.frames.size()) +
      " frames");
  return 0;
}

int view_select(const std::string& scene_dir, int budget, double radius) {
  if (budget < 1) throw UsageError("--budget must be >= 1");
  if (!(radius > 0)) throw UsageError("--radius must be positive");
  const auto scene = read_scene(scene_dir);
  if (scene.frames.empty()) throw UsageError(scene_dir + ": scene has no frames");
  std::vector<CoverageMask> masks;
  for (const auto& f : scene.frames) masks.push_back(compute_coverage(f, scene.cloud, radius));
  const auto picked = greedy_max_coverage(masks, budget);
  std::vector<std::uint8_t> covered(scene.cloud.size(), 0);
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (int id : picked) {
    std::size_t gain = 0;
    for (const auto& m : masks)
      if (m.frame_id == id)
        for (std::size_t i = 0; i < covered.size(); ++i)
          if (m.covered[i] && !covered[i]) {
            covered[i] = 1;
            ++gain;
          }
    steps.push_back({{"frame_id", id}, {"gain", gain}});
  }
  std::size_t total = 0;
  for (auto c : covered) total += c;
  nlohmann::ordered_json out = {{"budget", budget},        {"radius", radius},     {"selected", picked},
                                {"steps", steps},          {"covered", total},     {"point_count", scene.cloud.size()}};
  std::cout << out.dump(2) << std::endl;
  return 0;
}

void apply_threads(ExperimentConfig& cfg, int threads) {
  if (threads > 0) cfg.train.pipeline.threads = threads;
}

int train_cmd(const std::string& config_path, const std::string& out, int threads) {
  auto cfg = read_experiment_config(config_path);
  apply_threads(cfg, threads);
  const auto scenes = load_scenes(cfg, false);
  log("training on " + std::to_string(scenes.size()) + " scene(s) for " + std::to_string(cfg.train.epochs) + " epoch(s)");
  const auto result = train(scenes, cfg.train, nullptr, [](int epoch, const LossBreakdown& b, double lr) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %d lr %.3g loss %.6f (fusion %.4f 2d %.4f 3d %.4f unp %.4f)", epoch, lr, b.total,
                  b.l_fusion, b.l_2d, b.l_3d, b.l_2d_unp);
    log(buf);
  });
  write_checkpoint(out, result.model, cfg.train.model);
  nlohmann::ordered_json history = {{"format", "safnet-train-log"}, {"version", 1}, {"seed", cfg.seed}};
  history["loss_history"] = result.loss_history;
  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  for (const auto& b : result.epoch_losses) epochs.push_back(loss_json(b));
  history["epochs"] = epochs;
  history["model"] = to_json(cfg.train.model);
  history["pipeline"] = to_json(cfg.train.pipeline);
  write_text(out + ".history.json", history.dump(2) + "\n");
  log("wrote " + out);
  return 0;
}

int segment_cmd(const std::string& scene_dir, const std::string& model_path, const std::string& mode,
                const std::string& out, int threads, int budget) {
  const auto ck = read_checkpoint(model_path);
  ModelOptions opt = ck.options;
  if (!mode.empty()) opt.mode = parse_fusion_mode(mode);
  auto scene = read_scene(scene_dir);
  PipelineConfig p;
  if (threads > 0) p.threads = threads;
  if (budget > 0) p.view_budget = budget;
  const auto seg = segment_scene(ck.model, opt, scene, p);
  scene.cloud.labels = seg.labels;
  write_point_cloud(scene.cloud, out);
  char buf[160];
  std::snprintf(buf, sizeof buf, "segmented %zu points in %zu chunks (%s mode, mean similarity %.4f)", scene.cloud.size(),
                seg.chunk_count, to_string(opt.mode), seg.mean_similarity);
  log(buf);
  return 0;
}

int eval_cmd(const std::string& pred_path, const std::string& gt_path, const std::string& report, int class_count,
             const std::string& history_path) {
  const auto pred = read_point_cloud(pred_path);
  const auto gt = read_point_cloud(gt_path);
  if (!pred.has_labels()) throw UsageError(pred_path + ": point cloud has no label property");
  if (!gt.has_labels()) throw UsageError(gt_path + ": point cloud has no label property");
  if (pred.size() != gt.size())
    throw UsageError("point count mismatch: " + std::to_string(pred.size()) + " predicted vs " +
                     std::to_string(gt.size()) + " ground truth");
  if (class_count <= 0) {
    int mx = 0;
    for (int l : pred.labels) mx = std::max(mx, l);
    for (int l : gt.labels) mx = std::max(mx, l);
    class_count = mx + 1;
  }
  const auto cm = confusion(pred.labels, gt.labels, class_count);
  const auto iou = iou_scores(cm);
  nlohmann::ordered_json r = {{"format", "safnet-report"}, {"version", 1}, {"class_count", class_count},
                              {"point_count", gt.size()}};
  r["per_class_iou"] = iou.per_class;
  r["present"] = iou.present;
  r["miou"] = iou.miou;
  std::vector<std::vector<std::uint64_t>> rows(class_count);
  for (int g = 0; g < class_count; ++g)
    for (int p = 0; p < class_count; ++p) rows[g].push_back(cm.at(g, p));
  r["confusion"] = rows;
  r["loss_history"] = nlohmann::json::array();
  if (!history_path.empty()) {
    const auto h = nlohmann::json::parse(safnet::detail::slurp(history_path));
    if (!h.contains("loss_history")) throw UsageError(history_path + ": missing loss_history");
    r["loss_history"] = h["loss_history"];
  }
  write_text(report, r.dump(2) + "\n");
  char buf[96];
  std::snprintf(buf, sizeof buf, "mIoU %.6f over %zu points", iou.miou, gt.size());
  log(buf);
  return 0;
}

// Largest mIoU decrease between consecutive rows after the first.
double max_component_drop(const std::vector<AblationResult>& rows) {
  double drop = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) drop = std::max(drop, rows[i - 1].mean_miou - rows[i].mean_miou);
  return drop;
}

int ablate_cmd(const std::string& config_path, const std::string& report, int threads, double tolerance) {
  auto cfg = read_experiment_config(config_path);
  apply_threads(cfg, threads);
  const auto train_scenes = load_scenes(cfg, false);
  const auto val_scenes = load_scenes(cfg, true);
  const auto rows = run_ablation(cfg, train_scenes, val_scenes, log);
  nlohmann::ordered_json r = {{"format", "safnet-ablation"}, {"version", 1}, {"seeds", cfg.ablation_seeds}};
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  for (const auto& row : rows)
    table.push_back({{"name", row.name}, {"options", to_json(row.options)}, {"seed_miou", row.seed_miou},
                     {"mean_miou", row.mean_miou}});
  r["rows"] = table;
  const double drop = max_component_drop(rows);
  r["max_drop"] = drop;
  r["tolerance"] = tolerance;
  r["monotone"] = drop <= tolerance;
  const std::string text = r.dump(2) + "\n";
  if (report.empty())
    std::cout << text;
  else
    write_text(report, text);
  for (const auto& row : rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-20s mean mIoU %.4f", row.name.c_str(), row.mean_miou);
    log(buf);
  }
  return 0;
}

int robustness_cmd(const std::string& config_path, const std::string& csv, int threads) {
  auto cfg = read_experiment_config(config_path);
  apply_threads(cfg, threads);
  const auto train_scenes = load_scenes(cfg, false);
  const auto points = run_robustness(cfg, train_scenes, log);
  std::string text = "seed,views,mode,miou,mean_similarity\n";
  for (const auto& p : points) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%llu,%d,%s,%.8f,%.8f\n", static_cast<unsigned long long>(p.seed), p.views,
                  to_string(p.mode), p.miou, p.mean_similarity);
    text += buf;
  }
  if (csv.empty())
    std::cout << text;
  else
    write_text(csv, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Similarity-aware 2D-3D fusion for point cloud segmentation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string spec, out, scene, config, model, mode, pred, gt, report, history, csv;
  std::uint64_t seed = 0;
  int budget = kDefaultViewBudget, threads = 0, class_count = 0, segment_budget = 0;
  double radius = kDefaultMatchRadius, tolerance = 0.02;

  auto* gen = app.add_subcommand("gen-scene", "Generate a synthetic RGB-D scene directory");
  gen->add_option("--spec", spec, "Scene spec JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--seed", seed, "Scene seed (overrides the spec)")->required();
  gen->add_option("--out", out, "Output directory")->required();

  auto* vs = app.add_subcommand("view-select", "Greedy max-coverage view selection over a whole scene");
  vs->add_option("--scene", scene, "Scene directory")->required()->check(CLI::ExistingDirectory);
  vs->add_option("--budget", budget, "Number of views to select");
  vs->add_option("--radius", radius, "Depth match radius in meters");

  auto* tr = app.add_subcommand("train", "Train a model from an experiment config");
  tr->add_option("--config", config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", out, "Checkpoint path")->required();
  tr->add_option("--threads", threads, "Worker threads");

  auto* seg = app.add_subcommand("segment", "Label a scene with a trained model");
  seg->add_option("--scene", scene, "Scene directory")->required()->check(CLI::ExistingDirectory);
  seg->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
  seg->add_option("--mode", mode, "Fusion mode (default: the checkpoint's)")->check(CLI::IsMember({"safnet", "fixed"}));
  seg->add_option("--out", out, "Output PLY")->required();
  seg->add_option("--threads", threads, "Worker threads");
  seg->add_option("--budget", segment_budget, "Views per chunk (default 5)");

  auto* ev = app.add_subcommand("eval", "Score predicted labels against ground truth");
  ev->add_option("--pred", pred, "Predicted PLY")->required()->check(CLI::ExistingFile);
  ev->add_option("--gt", gt, "Ground-truth PLY")->required()->check(CLI::ExistingFile);
  ev->add_option("--report", report, "Output report JSON")->required();
  ev->add_option("--class-count", class_count, "Number of classes (default: inferred from labels)");
  ev->add_option("--history", history, "Training log whose loss history is copied into the report")
      ->check(CLI::ExistingFile);

  auto* ab = app.add_subcommand("ablate", "Train and score each ablation row");
  ab->add_option("--config", config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  ab->add_option("--report", report, "Output report JSON (default: stdout)");
  ab->add_option("--threads", threads, "Worker threads");
  ab->add_option("--tolerance", tolerance, "Largest allowed mIoU drop per added component");

  auto* rb = app.add_subcommand("robustness", "mIoU versus available views, as CSV");
  rb->add_option("--config", config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  rb->add_option("--csv", csv, "Output CSV (default: stdout)");
  rb->add_option("--threads", threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return gen_scene(spec, seed, out);
    if (*vs) return view_select(scene, budget, radius);
    if (*tr) return train_cmd(config, out, threads);
    if (*seg) return segment_cmd(scene, model, mode, out, threads, segment_budget);
    if (*ev) return eval_cmd(pred, gt, report, class_count, history);
    if (*ab) return ablate_cmd(config, report, threads, tolerance);
    if (*rb) return robustness_cmd(config, csv, threads);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const safnet::ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const safnet::ArgumentError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitFailure;
  }
  return kExitUsage;
}
