#pragma once

// Synthetic RGB-D rooms: an axis-aligned room (floor + four walls) holding
// boxes of two classes, rendered analytically by ray casting from a ring of
// cameras. The labeled point cloud is sampled from the clean back-projection of
// those renders, so with no degradation every cloud point is exactly a pixel
// of some frame. Degradations reproduce sensor problems: a rigid offset
// between recorded and true camera poses, extra overlapping views, transient
// occluders present only in the images, and dropped views.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "safnet/core.hpp"
#include "safnet/projection.hpp"
#include "safnet/random.hpp"

namespace safnet {

enum SceneClass : int { kFloor = 0, kWall = 1, kBoxA = 2, kBoxB = 3 };
inline constexpr int kSyntheticClassCount = 4;

struct Degradation {
  double mismatch_offset = 0.0;  // meters, along each camera's optical axis
  int overlap_factor = 1;        // frames per camera station
  int occluder_count = 0;        // boxes visible in images but absent from the cloud
  double view_drop = 0.0;        // fraction of frames removed, in [0, 1)
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::array<double, 3> room{4.0, 4.0, 2.5};
  int object_count = 6;
  int points_per_scene = 25000;
  int camera_count = 20;
  int image_width = 160;
  int image_height = 120;
  double focal = 120.0;
  double color_noise = 0.03;
  std::vector<RigidPose> camera_path;  // optional; generated when empty
  Degradation degradation;

  void validate() const {
    if (!(room[0] > 0 && room[1] > 0 && room[2] > 0)) throw ArgumentError("scene spec: room dimensions must be positive");
    if (object_count < 1) throw ArgumentError("scene spec: at least one object is required");
    if (points_per_scene < 1) throw ArgumentError("scene spec: points_per_scene must be positive");
    if (camera_path.empty() && camera_count < 1) throw ArgumentError("scene spec: at least one camera is required");
    if (image_width < 2 || image_height < 2 || !(focal > 0)) throw ArgumentError("scene spec: invalid camera model");
    if (degradation.overlap_factor < 1) throw ArgumentError("scene spec: overlap_factor must be >= 1");
    if (degradation.occluder_count < 0) throw ArgumentError("scene spec: occluder_count must be >= 0");
    if (!(degradation.view_drop >= 0.0 && degradation.view_drop < 1.0))
      throw ArgumentError("scene spec: view_drop must be in [0, 1)");
    if (!(degradation.mismatch_offset >= 0.0)) throw ArgumentError("scene spec: mismatch_offset must be >= 0");
    if (!(color_noise >= 0.0)) throw ArgumentError("scene spec: color_noise must be >= 0");
  }
};

struct Box {
  Point3 lo, hi;
  int label = -1;  // -1 for occluders
  std::array<double, 3> color{};
};

namespace detail {

inline std::array<double, 3> class_color(int label) {
  switch (label) {
    case kFloor: return {0.55, 0.45, 0.35};
    case kWall: return {0.85, 0.85, 0.80};
    case kBoxA: return {0.80, 0.20, 0.20};
    case kBoxB: return {0.20, 0.35, 0.80};
    default: return {0.25, 0.70, 0.30};
  }
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int label = -1;
  bool valid = false;
  Point3 normal;
  std::array<double, 3> color{};
};

// Slab test; returns the entry parameter for a ray starting outside the box.
inline std::optional<std::pair<double, Point3>> ray_box(const Point3& o, const Point3& d, const Box& b) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  int axis0 = -1;
  double sign0 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double oa = o[a], da = d[a], lo = b.lo[a], hi = b.hi[a];
    if (std::abs(da) < 1e-15) {
      if (oa < lo || oa > hi) return std::nullopt;
      continue;
    }
    double ta = (lo - oa) / da, tb = (hi - oa) / da;
    double s = -1.0;
    if (ta > tb) {
      std::swap(ta, tb);
      s = 1.0;
    }
    if (ta > t0) {
      t0 = ta;
      axis0 = a;
      sign0 = s;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  if (axis0 < 0) return std::nullopt;  // origin inside the box
  Point3 n{};
  if (axis0 == 0) n.x = sign0;
  if (axis0 == 1) n.y = sign0;
  if (axis0 == 2) n.z = sign0;
  return std::make_pair(t0, n);
}

// Ray from inside the room against floor and walls (the ceiling is left open).
inline Hit ray_room(const Point3& o, const Point3& d, const std::array<double, 3>& room) {
  Hit best;
  auto consider = [&](double t, const Point3& n, int label) {
    if (!(t > 0.0) || t >= best.t) return;
    const Point3 p = o + t * d;
    const double eps = 1e-9;
    if (p.x < -eps || p.x > room[0] + eps || p.y < -eps || p.y > room[1] + eps || p.z < -eps || p.z > room[2] + eps)
      return;
    best.t = t;
    best.normal = n;
    best.label = label;
    best.valid = true;
  };
  if (d.z < 0) consider(-o.z / d.z, {0, 0, 1}, kFloor);
  if (d.x < 0) consider(-o.x / d.x, {1, 0, 0}, kWall);
  if (d.x > 0) consider((room[0] - o.x) / d.x, {-1, 0, 0}, kWall);
  if (d.y < 0) consider(-o.y / d.y, {0, 1, 0}, kWall);
  if (d.y > 0) consider((room[1] - o.y) / d.y, {0, -1, 0}, kWall);
  if (best.valid) best.color = class_color(best.label);
  return best;
}

inline RigidPose look_at(const Point3& eye, const Point3& target) {
  Point3 f = target - eye;
  f = (1.0 / norm(f)) * f;
  const Point3 up{0, 0, 1};
  Point3 r{f.y * up.z - f.z * up.y, f.z * up.x - f.x * up.z, f.x * up.y - f.y * up.x};
  r = (1.0 / norm(r)) * r;
  const Point3 dn{f.y * r.z - f.z * r.y, f.z * r.x - f.x * r.z, f.x * r.y - f.y * r.x};
  RigidPose pose;
  pose.rotation = {r.x, dn.x, f.x, r.y, dn.y, f.y, r.z, dn.z, f.z};
  pose.translation = eye;
  return pose;
}

inline bool boxes_overlap(const Box& a, const Box& b, double gap) {
  return a.lo.x < b.hi.x + gap && b.lo.x < a.hi.x + gap && a.lo.y < b.hi.y + gap && b.lo.y < a.hi.y + gap;
}

}  // namespace detail

struct SceneLayout {
  std::vector<Box> objects;
  std::vector<Box> occluders;
  std::vector<RigidPose> cameras;  // true poses, one per frame
};

inline SceneLayout make_layout(const SceneSpec& spec) {
  spec.validate();
  Rng rng(Rng::mix(spec.seed, 100));
  SceneLayout layout;
  const auto& room = spec.room;
  const double margin = 0.15;

  auto place = [&](std::vector<Box>& out, int label, double max_side, double max_height,
                   const std::vector<Box>& avoid) -> bool {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const double sx = std::min(rng.uniform(0.3, max_side), room[0] - 2 * margin);
      const double sy = std::min(rng.uniform(0.3, max_side), room[1] - 2 * margin);
      const double sz = std::min(rng.uniform(0.3, max_height), room[2] * 0.6);
      const double x = rng.uniform(margin, std::max(margin, room[0] - margin - sx));
      const double y = rng.uniform(margin, std::max(margin, room[1] - margin - sy));
      Box b{{x, y, 0.0}, {x + sx, y + sy, sz}, label, detail::class_color(label)};
      bool ok = true;
      for (const auto& o : avoid) ok = ok && !detail::boxes_overlap(b, o, 0.1);
      for (const auto& o : out) ok = ok && !detail::boxes_overlap(b, o, 0.1);
      if (ok) {
        out.push_back(b);
        return true;
      }
    }
    return false;
  };
  for (int i = 0; i < spec.object_count; ++i)
    if (!place(layout.objects, i % 2 == 0 ? kBoxA : kBoxB, 0.8, 1.0, {}))
      throw ArgumentError("scene spec: cannot place " + std::to_string(spec.object_count) + " objects in the room");
  for (int i = 0; i < spec.degradation.occluder_count; ++i) {
    if (!place(layout.occluders, -1, 0.5, 1.2, layout.objects)) break;
    layout.occluders.back().color = {rng.uniform(0.1, 0.4), rng.uniform(0.5, 0.9), rng.uniform(0.1, 0.4)};
  }

  std::vector<RigidPose> stations = spec.camera_path;
  if (stations.empty()) {
    const Point3 center{room[0] / 2, room[1] / 2, 0.0};
    const double ring = 0.35 * std::min(room[0], room[1]);
    const double top = std::max(0.5, std::min(1.5, room[2] - 0.3));
    for (int c = 0; c < spec.camera_count; ++c) {
      const double angle = 6.283185307179586 * (c + rng.uniform(-0.25, 0.25)) / spec.camera_count;
      const Point3 eye{center.x + ring * std::cos(angle), center.y + ring * std::sin(angle),
                       top + rng.uniform(-0.15, 0.1)};
      const double reach = rng.uniform(0.3, 0.9);
      Point3 target{center.x + (center.x - eye.x) * reach + rng.uniform(-0.5, 0.5),
                    center.y + (center.y - eye.y) * reach + rng.uniform(-0.5, 0.5), rng.uniform(0.0, 0.6)};
      target.x = std::clamp(target.x, 0.1, room[0] - 0.1);
      target.y = std::clamp(target.y, 0.1, room[1] - 0.1);
      stations.push_back(detail::look_at(eye, target));
    }
  }
  for (const auto& s : stations) {
    layout.cameras.push_back(s);
    for (int k = 1; k < spec.degradation.overlap_factor; ++k) {
      const double yaw = rng.uniform(-0.07, 0.07);
      const Mat3 rz{std::cos(yaw), -std::sin(yaw), 0, std::sin(yaw), std::cos(yaw), 0, 0, 0, 1};
      RigidPose p;
      p.rotation = mul(rz, s.rotation);
      p.translation = s.translation + Point3{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 0.0};
      layout.cameras.push_back(p);
    }
  }
  return layout;
}

struct RenderedView {
  std::vector<double> depth;
  std::vector<double> color;
  std::vector<int> labels;
};

/**
 * Casts one ray per pixel center. Depth is quantized to whole millimeters and
 * color to 8 bits so that the in-memory frame equals its on-disk encoding.
 */
inline RenderedView render_view(const SceneSpec& spec, const SceneLayout& layout, const RigidPose& pose,
                                const CameraIntrinsics& k, bool with_occluders, std::uint64_t noise_seed) {
  const int w = k.width, h = k.height;
  RenderedView view;
  view.depth.assign(static_cast<std::size_t>(w) * h, 0.0);
  view.color.assign(static_cast<std::size_t>(w) * h * 3, 0.0);
  view.labels.assign(static_cast<std::size_t>(w) * h, -1);
  Rng noise(noise_seed);
  const Point3 light{0.3, 0.5, 0.81};
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t px = static_cast<std::size_t>(v) * w + u;
      const Point3 dir_cam{(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
      const Point3 dir = mul(pose.rotation, dir_cam);
      detail::Hit hit = detail::ray_room(pose.translation, dir, spec.room);
      auto test_boxes = [&](const std::vector<Box>& boxes) {
        for (const auto& b : boxes) {
          auto r = detail::ray_box(pose.translation, dir, b);
          if (r && r->first > 0.0 && r->first < hit.t) {
            hit.t = r->first;
            hit.normal = r->second;
            hit.label = b.label;
            hit.color = b.color;
            hit.valid = true;
          }
        }
      };
      test_boxes(layout.objects);
      if (with_occluders) test_boxes(layout.occluders);
      std::array<double, 3> rgb{0, 0, 0};
      if (hit.valid) {
        const double mm = std::round(hit.t * 1000.0);
        if (mm >= 1.0 && mm <= 65535.0) {
          view.depth[px] = mm / 1000.0;
          view.labels[px] = hit.label;
          const double shade = 0.8 + 0.2 * std::abs(dot(hit.normal, light));
          for (int c = 0; c < 3; ++c) rgb[c] = hit.color[c] * shade;
        }
      }
      for (int c = 0; c < 3; ++c) {
        const double noisy = std::clamp(rgb[c] + (spec.color_noise > 0 ? noise.uniform(-1, 1) * spec.color_noise : 0.0),
                                        0.0, 1.0);
        view.color[3 * px + c] = std::round(noisy * 255.0) / 255.0;
      }
    }
  }
  return view;
}

inline CameraIntrinsics spec_intrinsics(const SceneSpec& spec) {
  CameraIntrinsics k;
  k.fx = k.fy = spec.focal;
  k.width = spec.image_width;
  k.height = spec.image_height;
  k.cx = (spec.image_width - 1) / 2.0;
  k.cy = (spec.image_height - 1) / 2.0;
  return k;
}

// Recorded pose of a camera whose sensor is displaced by `offset` meters along
// its own optical axis.
inline RigidPose mismatched_pose(const RigidPose& truth, double offset) {
  RigidPose p = truth;
  p.translation = truth.apply({0.0, 0.0, offset});
  return p;
}

inline SceneBundle generate_scene(const SceneSpec& spec) {
  const SceneLayout layout = make_layout(spec);
  const CameraIntrinsics k = spec_intrinsics(spec);
  const auto& deg = spec.degradation;

  SceneBundle bundle;
  bundle.class_count = kSyntheticClassCount;

  // Cloud: sampled from the clean back-projection of every view.
  std::vector<Point3> pool;
  std::vector<int> pool_labels;
  for (std::size_t f = 0; f < layout.cameras.size(); ++f) {
    const auto& pose = layout.cameras[f];
    const auto view = render_view(spec, layout, pose, k, false, 0);
    for (int v = 0; v < k.height; ++v)
      for (int u = 0; u < k.width; ++u) {
        const std::size_t px = static_cast<std::size_t>(v) * k.width + u;
        if (!(view.depth[px] > 0.0) || view.labels[px] < 0) continue;
        pool.push_back(pose.apply(pixel_to_camera(k, u, v, view.depth[px])));
        pool_labels.push_back(view.labels[px]);
      }
  }
  if (pool.empty()) throw ArgumentError("scene spec: cameras see no surfaces");
  Rng pick(Rng::mix(spec.seed, 200));
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t n = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(spec.points_per_scene));
  for (std::size_t i = 0; i < n; ++i) std::swap(order[i], order[i + pick.below(order.size() - i)]);
  order.resize(n);
  std::sort(order.begin(), order.end());
  for (std::size_t idx : order) {
    bundle.cloud.points.push_back(pool[idx]);
    bundle.cloud.labels.push_back(pool_labels[idx]);
  }

  // Frames: rendered from the true pose (with occluders), recorded with the
  // mismatched pose.
  std::vector<std::size_t> kept(layout.cameras.size());
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = i;
  const auto keep_count = static_cast<std::size_t>(std::ceil((1.0 - deg.view_drop) * kept.size() - 1e-9));
  Rng drop(Rng::mix(spec.seed, 300));
  for (std::size_t i = 0; i < kept.size(); ++i) std::swap(kept[i], kept[i + drop.below(kept.size() - i)]);
  kept.resize(keep_count);
  std::sort(kept.begin(), kept.end());

  for (std::size_t f : kept) {
    const auto view = render_view(spec, layout, layout.cameras[f], k, true, Rng::mix(spec.seed, 1000 + f));
    RgbdFrame frame;
    frame.frame_id = static_cast<int>(f);
    frame.intrinsics = k;
    frame.pose = mismatched_pose(layout.cameras[f], deg.mismatch_offset);
    frame.depth = view.depth;
    frame.color = view.color;
    frame.labels = view.labels;
    bundle.frames.push_back(std::move(frame));
  }
  return bundle;
}

}  // namespace safnet
