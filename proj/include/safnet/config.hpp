#pragma once

// JSON configuration. Every object is parsed strictly: unknown keys and
// wrongly typed values are rejected with the offending JSON path.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safnet/io.hpp"
#include "safnet/synth.hpp"
#include "safnet/train.hpp"

namespace safnet {

using Json = nlohmann::json;

class ConfigError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

namespace detail {

using FieldHandlers = std::map<std::string, std::function<void(const Json&, const std::string&)>>;

inline void parse_object(const Json& j, const std::string& path, const FieldHandlers& fields) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError(path + ": unknown key '" + key + "'");
    it->second(value, path + "." + key);
  }
}

template <class T>
T get_as(const Json& j, const std::string& path) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError(path + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0)
          throw ConfigError(path + ": expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw ConfigError(path + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ConfigError(path + ": expected a string");
    }
    return j.get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

template <class T>
std::function<void(const Json&, const std::string&)> into(T& target) {
  return [&target](const Json& j, const std::string& path) { target = get_as<T>(j, path); };
}

template <std::size_t N>
std::function<void(const Json&, const std::string&)> into(std::array<double, N>& target) {
  return [&target](const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != N) throw ConfigError(path + ": expected an array of " + std::to_string(N) + " numbers");
    for (std::size_t i = 0; i < N; ++i) target[i] = get_as<double>(j[i], path + "[" + std::to_string(i) + "]");
  };
}

}  // namespace detail

inline Degradation degradation_from_json(const Json& j, const std::string& path = "degradation") {
  Degradation d;
  detail::parse_object(j, path,
                       {{"mismatch_offset", detail::into(d.mismatch_offset)},
                        {"overlap_factor", detail::into(d.overlap_factor)},
                        {"occluder_count", detail::into(d.occluder_count)},
                        {"view_drop", detail::into(d.view_drop)}});
  return d;
}

inline Json to_json(const Degradation& d) {
  return {{"mismatch_offset", d.mismatch_offset},
          {"overlap_factor", d.overlap_factor},
          {"occluder_count", d.occluder_count},
          {"view_drop", d.view_drop}};
}

inline SceneSpec scene_spec_from_json(const Json& j, const std::string& path = "spec") {
  SceneSpec s;
  detail::parse_object(
      j, path,
      {{"seed", detail::into(s.seed)},
       {"room", detail::into(s.room)},
       {"object_count", detail::into(s.object_count)},
       {"points_per_scene", detail::into(s.points_per_scene)},
       {"camera_count", detail::into(s.camera_count)},
       {"image_width", detail::into(s.image_width)},
       {"image_height", detail::into(s.image_height)},
       {"focal", detail::into(s.focal)},
       {"color_noise", detail::into(s.color_noise)},
       {"camera_path",
        [&](const Json& v, const std::string& p) {
          if (!v.is_array()) throw ConfigError(p + ": expected an array of 4x4 row-major matrices");
          for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string pi = p + "[" + std::to_string(i) + "]";
            if (!v[i].is_array() || v[i].size() != 16) throw ConfigError(pi + ": expected 16 numbers");
            RigidPose pose;
            for (int r = 0; r < 3; ++r) {
              for (int c = 0; c < 3; ++c) pose.rotation[3 * r + c] = detail::get_as<double>(v[i][4 * r + c], pi);
              const double t = detail::get_as<double>(v[i][4 * r + 3], pi);
              (r == 0 ? pose.translation.x : r == 1 ? pose.translation.y : pose.translation.z) = t;
            }
            try {
              pose.validate();
            } catch (const std::exception& e) {
              throw ConfigError(pi + ": " + e.what());
            }
            s.camera_path.push_back(pose);
          }
        }},
       {"degradation", [&](const Json& v, const std::string& p) { s.degradation = degradation_from_json(v, p); }}});
  try {
    s.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return s;
}

inline Json to_json(const SceneSpec& s) {
  Json j = {{"seed", s.seed},
            {"room", s.room},
            {"object_count", s.object_count},
            {"points_per_scene", s.points_per_scene},
            {"camera_count", s.camera_count},
            {"image_width", s.image_width},
            {"image_height", s.image_height},
            {"focal", s.focal},
            {"color_noise", s.color_noise},
            {"degradation", to_json(s.degradation)}};
  return j;
}

inline ModelOptions model_options_from_json(const Json& j, ModelOptions o = {}, const std::string& path = "model") {
  detail::parse_object(j, path,
                       {{"mode",
                         [&](const Json& v, const std::string& p) {
                           try {
                             o.mode = parse_fusion_mode(detail::get_as<std::string>(v, p));
                           } catch (const ConfigError&) {
                             throw;
                           } catch (const ArgumentError& e) {
                             throw ConfigError(p + ": " + e.what());
                           }
                         }},
                        {"gsm_forward", detail::into(o.gsm_terms.forward)},
                        {"gsm_backward", detail::into(o.gsm_terms.backward)},
                        {"csm", detail::into(o.use_csm)},
                        {"channel_attention", detail::into(o.channel_attention)},
                        {"clip_similarity", detail::into(o.clip_similarity)},
                        {"dropout", detail::into(o.dropout)}});
  return o;
}

inline Json to_json(const ModelOptions& o) {
  return {{"mode", to_string(o.mode)},
          {"gsm_forward", o.gsm_terms.forward},
          {"gsm_backward", o.gsm_terms.backward},
          {"csm", o.use_csm},
          {"channel_attention", o.channel_attention},
          {"clip_similarity", o.clip_similarity},
          {"dropout", o.dropout}};
}

inline LossWeights loss_weights_from_json(const Json& j, LossWeights w = {}, const std::string& path = "loss") {
  detail::parse_object(j, path,
                       {{"lambda_2d", detail::into(w.l2d)},
                        {"lambda_3d", detail::into(w.l3d)},
                        {"lambda_2d_unp", detail::into(w.l2d_unp)}});
  return w;
}

inline PipelineConfig pipeline_from_json(const Json& j, PipelineConfig c = {}, const std::string& path = "pipeline") {
  detail::parse_object(j, path,
                       {{"view_budget", detail::into(c.view_budget)},
                        {"match_radius", detail::into(c.match_radius)},
                        {"chunk_size", detail::into(c.chunk_size)},
                        {"stride", detail::into(c.stride)},
                        {"neighborhood_k", detail::into(c.neighborhood_k)},
                        {"query_radius", detail::into(c.query_radius)},
                        {"unprojected_radius", detail::into(c.unprojected_radius)},
                        {"q_margin", detail::into(c.q_margin)},
                        {"threads", detail::into(c.threads)}});
  try {
    c.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

inline Json to_json(const PipelineConfig& c) {
  return {{"view_budget", c.view_budget},   {"match_radius", c.match_radius},
          {"chunk_size", c.chunk_size},     {"stride", c.stride},
          {"neighborhood_k", c.neighborhood_k}, {"query_radius", c.query_radius},
          {"unprojected_radius", c.unprojected_radius}, {"q_margin", c.q_margin}};
}

// Synthetic scene set: one spec, instantiated once per seed.
struct SyntheticData {
  SceneSpec spec;
  std::vector<std::uint64_t> train_seeds;
  std::vector<std::uint64_t> val_seeds;
  // Optional view_drop per training scene, cycled over train_seeds.
  std::vector<double> train_view_drops;
};

struct AblationRow {
  std::string name;
  ModelOptions options;
  LossWeights lambdas;
};

struct RobustnessConfig {
  std::vector<int> view_counts{1, 2, 3, 4, 5};  // views kept out of base_views
  int base_views = 5;
  double mismatch_offset = 0.1;
  std::vector<std::uint64_t> seeds{0};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::vector<std::string> train_scenes;  // scene directories
  std::vector<std::string> val_scenes;
  std::optional<SyntheticData> synthetic;
  TrainConfig train;
  std::vector<std::uint64_t> ablation_seeds{0};
  std::vector<AblationRow> ablation_rows;
  RobustnessConfig robustness;
};

// The GSM-FS, +GSM-BS, +CSM progression, preceded by the plain late-fusion
// baseline; all rows keep every auxiliary loss and channel attention.
inline std::vector<AblationRow> default_ablation_rows(const ModelOptions& base, const LossWeights& lambdas) {
  auto row = [&](std::string name, FusionMode mode, bool fs, bool bs, bool csm) {
    AblationRow r{std::move(name), base, lambdas};
    r.options.mode = mode;
    r.options.gsm_terms = {fs, bs};
    r.options.use_csm = csm;
    return r;
  };
  return {row("baseline", FusionMode::fixed, false, false, false),
          row("gsm_fs", FusionMode::safnet, true, false, false),
          row("gsm_fs_bs", FusionMode::safnet, true, true, false),
          row("gsm_fs_bs_csm", FusionMode::safnet, true, true, true)};
}

inline ExperimentConfig experiment_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
  ExperimentConfig cfg;
  auto& t = cfg.train;
  std::optional<Json> rows_json;
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return (fp.is_relative() && !base_dir.empty() ? base_dir / fp : fp).string();
  };
  auto dirs = [&](std::vector<std::string>& out) {
    return [&out, resolve](const Json& v, const std::string& p) {
      if (!v.is_array()) throw ConfigError(p + ": expected an array of scene directories");
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(resolve(detail::get_as<std::string>(v[i], p + "[" + std::to_string(i) + "]")));
    };
  };
  auto seeds = [](std::vector<std::uint64_t>& out) {
    return [&out](const Json& v, const std::string& p) {
      if (!v.is_array()) throw ConfigError(p + ": expected an array of seeds");
      out.clear();
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(detail::get_as<std::uint64_t>(v[i], p + "[" + std::to_string(i) + "]"));
    };
  };
  std::optional<Json> model_json, loss_json;
  detail::parse_object(
      j, "config",
      {{"seed", detail::into(cfg.seed)},
       {"data",
        [&](const Json& v, const std::string& p) {
          detail::parse_object(
              v, p,
              {{"train_scenes", dirs(cfg.train_scenes)},
               {"val_scenes", dirs(cfg.val_scenes)},
               {"synthetic", [&](const Json& s, const std::string& sp) {
                  SyntheticData d;
                  detail::parse_object(s, sp,
                                       {{"spec", [&](const Json& x, const std::string& xp) { d.spec = scene_spec_from_json(x, xp); }},
                                        {"train_seeds", seeds(d.train_seeds)},
                                        {"val_seeds", seeds(d.val_seeds)},
                                        {"train_view_drops", [&](const Json& x, const std::string& xp) {
                                           if (!x.is_array()) throw ConfigError(xp + ": expected an array of numbers");
                                           for (std::size_t i = 0; i < x.size(); ++i) {
                                             const auto ip = xp + "[" + std::to_string(i) + "]";
                                             const double v = detail::get_as<double>(x[i], ip);
                                             if (!(v >= 0.0 && v < 1.0)) throw ConfigError(ip + ": view_drop must be in [0, 1)");
                                             d.train_view_drops.push_back(v);
                                           }
                                         }}});
                  cfg.synthetic = d;
                }}});
        }},
       {"model", [&](const Json& v, const std::string&) { model_json = v; }},
       {"loss", [&](const Json& v, const std::string&) { loss_json = v; }},
       {"pipeline", [&](const Json& v, const std::string& p) { t.pipeline = pipeline_from_json(v, t.pipeline, p); }},
       {"train",
        [&](const Json& v, const std::string& p) {
          detail::parse_object(v, p,
                               {{"epochs", detail::into(t.epochs)},
                                {"learning_rate", detail::into(t.learning_rate)},
                                {"lr_step_epochs", detail::into(t.lr_step_epochs)},
                                {"lr_decay", detail::into(t.lr_decay)},
                                {"points_per_chunk", detail::into(t.points_per_chunk)},
                                {"chunks_per_scene", detail::into(t.chunks_per_scene)},
                                {"batch_size", detail::into(t.batch_size)},
                                {"pixels_per_batch", detail::into(t.pixels_per_batch)},
                                {"min_view_budget", detail::into(t.min_view_budget)}});
        }},
       {"ablation",
        [&](const Json& v, const std::string& p) {
          detail::parse_object(v, p,
                               {{"seeds", seeds(cfg.ablation_seeds)},
                                {"rows", [&](const Json& r, const std::string&) { rows_json = r; }}});
        }},
       {"robustness", [&](const Json& v, const std::string& p) {
          auto& r = cfg.robustness;
          detail::parse_object(v, p,
                               {{"view_counts", detail::into(r.view_counts)},
                                {"base_views", detail::into(r.base_views)},
                                {"mismatch_offset", detail::into(r.mismatch_offset)},
                                {"seeds", seeds(r.seeds)}});
        }}});
  if (model_json) t.model = model_options_from_json(*model_json, t.model, "config.model");
  if (loss_json) t.lambdas = loss_weights_from_json(*loss_json, t.lambdas, "config.loss");
  t.seed = cfg.seed;

  cfg.ablation_rows = default_ablation_rows(t.model, t.lambdas);
  if (rows_json) {
    if (!rows_json->is_array() || rows_json->empty()) throw ConfigError("config.ablation.rows: expected a non-empty array");
    cfg.ablation_rows.clear();
    for (std::size_t i = 0; i < rows_json->size(); ++i) {
      const std::string p = "config.ablation.rows[" + std::to_string(i) + "]";
      const Json& r = (*rows_json)[i];
      if (!r.is_object() || !r.contains("name")) throw ConfigError(p + ": each row needs a name");
      AblationRow row{detail::get_as<std::string>(r["name"], p + ".name"), t.model, t.lambdas};
      Json model_part = r;
      model_part.erase("name");
      if (model_part.contains("loss")) {
        row.lambdas = loss_weights_from_json(model_part["loss"], row.lambdas, p + ".loss");
        model_part.erase("loss");
      }
      row.options = model_options_from_json(model_part, row.options, p);
      cfg.ablation_rows.push_back(row);
    }
  }
  try {
    t.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (cfg.train_scenes.empty() && !(cfg.synthetic && !cfg.synthetic->train_seeds.empty()))
    throw ConfigError("config.data: no training scenes (give train_scenes or synthetic.train_seeds)");
  if (cfg.robustness.base_views < 1) throw ConfigError("config.robustness.base_views must be >= 1");
  for (int v : cfg.robustness.view_counts)
    if (v < 1 || v > cfg.robustness.base_views)
      throw ConfigError("config.robustness.view_counts: entries must be in [1, base_views]");
  return cfg;
}

inline ExperimentConfig read_experiment_config(const std::filesystem::path& file) {
  Json j;
  try {
    j = Json::parse(detail::slurp(file));
  } catch (const Json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return experiment_from_json(j, file.parent_path());
}

}  // namespace safnet
