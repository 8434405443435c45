#pragma once

#include <optional>
#include <span>
#include <vector>

#include "safnet/core.hpp"

namespace safnet {

struct PixelRef {
  int frame_id = 0;
  int u = 0;
  int v = 0;
  friend bool operator==(const PixelRef&, const PixelRef&) = default;
};

// World-space points lifted from image pixels. Every point carries the
// feature vector of its source pixel and that pixel's provenance.
struct BackprojectedCloud {
  PointCloud cloud;
  std::vector<PixelRef> source;

  std::size_t size() const { return cloud.size(); }
  bool empty() const { return cloud.empty(); }

  void append(const BackprojectedCloud& other) {
    if (cloud.empty()) cloud.feature_dim = other.cloud.feature_dim;
    if (other.cloud.feature_dim != cloud.feature_dim)
      throw ArgumentError("backprojected clouds with different feature dimensions");
    cloud.points.insert(cloud.points.end(), other.cloud.points.begin(), other.cloud.points.end());
    cloud.features.insert(cloud.features.end(), other.cloud.features.begin(), other.cloud.features.end());
    if (!other.cloud.labels.empty() || !cloud.labels.empty()) {
      cloud.labels.resize(cloud.points.size() - other.size(), -1);
      if (other.cloud.labels.empty())
        cloud.labels.resize(cloud.points.size(), -1);
      else
        cloud.labels.insert(cloud.labels.end(), other.cloud.labels.begin(), other.cloud.labels.end());
    }
    source.insert(source.end(), other.source.begin(), other.source.end());
  }
};

// Pinhole lift of pixel center (u, v) at depth z into camera coordinates.
inline Point3 pixel_to_camera(const CameraIntrinsics& k, double u, double v, double z) {
  return {(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z};
}

/**
 * Lifts every pixel with strictly positive depth into world space, copying the
 * per-pixel feature vector from `feature_map` (height x width x feature_dim,
 * row-major). Pixels are visited in row-major order. When the frame has
 * per-pixel labels, they are carried over as point labels (-1 = unlabeled).
 */
inline BackprojectedCloud backproject_frame(const RgbdFrame& frame, std::span<const double> feature_map,
                                            std::size_t feature_dim) {
  const int w = frame.width(), h = frame.height();
  const auto pixels = static_cast<std::size_t>(w) * h;
  if (feature_dim == 0) throw ArgumentError("backproject_frame: feature dimension must be at least 1");
  if (feature_map.size() != pixels * feature_dim)
    throw ArgumentError("backproject_frame: feature map does not match frame dimensions");
  if (frame.depth.size() != pixels) throw ArgumentError("backproject_frame: depth does not match intrinsics");

  BackprojectedCloud out;
  out.cloud.feature_dim = feature_dim;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t px = frame.pixel(u, v);
      const double z = frame.depth[px];
      if (!(z > 0.0)) continue;
      out.cloud.points.push_back(frame.pose.apply(pixel_to_camera(frame.intrinsics, u, v, z)));
      const double* f = feature_map.data() + px * feature_dim;
      out.cloud.features.insert(out.cloud.features.end(), f, f + feature_dim);
      if (frame.has_labels()) out.cloud.labels.push_back(frame.labels[px]);
      out.source.push_back({frame.frame_id, u, v});
    }
  }
  return out;
}

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
};

// Continuous image coordinates of a world point, or nullopt when the point is
// at or behind the camera plane. Coordinates are not clamped to the image.
inline std::optional<PixelProjection> project_point(const Point3& p_world, const CameraIntrinsics& k,
                                                    const RigidPose& pose) {
  const Point3 pc = pose.apply_inverse(p_world);
  if (pc.z <= 1e-9) return std::nullopt;
  return PixelProjection{k.fx * pc.x / pc.z + k.cx, k.fy * pc.y / pc.z + k.cy, pc.z};
}

inline std::optional<PixelProjection> project_point(const Point3& p_world, const RgbdFrame& frame) {
  return project_point(p_world, frame.intrinsics, frame.pose);
}

}  // namespace safnet
