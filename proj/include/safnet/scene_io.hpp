#pragma once

// Scene directory layout:
//
//   <dir>/cloud.ply               labeled point cloud
//   <dir>/scene.json              {"format": "safnet-scene", "version": 1, "class_count": C, "frames": [ids]}
//   <dir>/frames/NNN.pgm          depth, uint16 millimeters (0 = no return)
//   <dir>/frames/NNN.ppm          color, 8-bit RGB
//   <dir>/frames/NNN.pose.txt     4x4 camera-to-world
//   <dir>/frames/NNN.intr.txt     fx fy cx cy width height
//   <dir>/frames/NNN.label.pgm    optional per-pixel class ids (255 = unlabeled)
//
// Without scene.json, frames are discovered from frames/*.pose.txt and the
// class count is one more than the largest cloud label.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safnet/core.hpp"
#include "safnet/io.hpp"

namespace safnet {

namespace fs = std::filesystem;

inline std::string frame_stem(int frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03d", frame_id);
  return buf;
}

inline void write_scene(const SceneBundle& scene, const fs::path& dir) {
  scene.validate();
  fs::create_directories(dir / "frames");
  write_point_cloud(scene.cloud, dir / "cloud.ply");
  nlohmann::ordered_json meta;
  meta["format"] = "safnet-scene";
  meta["version"] = 1;
  meta["class_count"] = scene.class_count;
  std::vector<int> ids;
  for (const auto& f : scene.frames) ids.push_back(f.frame_id);
  meta["frames"] = ids;
  auto out = detail::open_out(dir / "scene.json");
  out << meta.dump(2) << '\n';
  for (const auto& f : scene.frames) {
    const fs::path base = dir / "frames" / frame_stem(f.frame_id);
    write_frame(f, base.string() + ".pgm", base.string() + ".ppm", base.string() + ".intr.txt",
                base.string() + ".pose.txt", f.has_labels() ? fs::path(base.string() + ".label.pgm") : fs::path());
  }
}

inline SceneBundle read_scene(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ParseError(dir.string() + ": scene directory not found");
  SceneBundle scene;
  scene.cloud = read_point_cloud(dir / "cloud.ply");
  std::vector<int> ids;
  const fs::path meta_path = dir / "scene.json";
  if (fs::exists(meta_path)) {
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(detail::slurp(meta_path));
      if (meta.value("format", std::string()) != "safnet-scene")
        throw ParseError(meta_path.string() + ": not a safnet scene description");
      scene.class_count = meta.at("class_count").get<int>();
      ids = meta.at("frames").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(meta_path.string() + ": " + e.what());
    }
  } else {
    int max_label = -1;
    for (int l : scene.cloud.labels) max_label = std::max(max_label, l);
    scene.class_count = std::max(1, max_label + 1);
    if (fs::is_directory(dir / "frames"))
      for (const auto& entry : fs::directory_iterator(dir / "frames")) {
        const std::string name = entry.path().filename().string();
        const std::string suffix = ".pose.txt";
        if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
          continue;
        try {
          ids.push_back(std::stoi(name.substr(0, name.size() - suffix.size())));
        } catch (const std::exception&) {
          throw ParseError(entry.path().string() + ": frame files must be named NNN.pose.txt");
        }
      }
    std::sort(ids.begin(), ids.end());
  }
  for (int id : ids) {
    const std::string base = (dir / "frames" / frame_stem(id)).string();
    const fs::path labels = base + ".label.pgm";
    scene.frames.push_back(read_frame(base + ".pgm", base + ".ppm", base + ".intr.txt", base + ".pose.txt", id,
                                      fs::exists(labels) ? labels : fs::path()));
  }
  scene.validate();
  return scene;
}

}  // namespace safnet
