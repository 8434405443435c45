#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace safnet {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Point3 operator*(double s, const Point3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Point3&, const Point3&) = default;

  double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double squared_norm(const Point3& a) { return dot(a, a); }
inline double norm(const Point3& a) { return std::sqrt(squared_norm(a)); }
inline double squared_distance(const Point3& a, const Point3& b) { return squared_norm(a - b); }
inline double distance(const Point3& a, const Point3& b) { return std::sqrt(squared_distance(a, b)); }

// Parallel arrays. `labels` and `features` are either empty (absent) or sized
// to match `points`; features are stored row-major with `feature_dim` columns.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<int> labels;
  std::size_t feature_dim = 0;
  std::vector<double> features;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return !labels.empty(); }
  bool has_features() const { return feature_dim > 0; }

  const double* feature(std::size_t i) const { return features.data() + i * feature_dim; }
  double* feature(std::size_t i) { return features.data() + i * feature_dim; }

  void validate() const {
    if (!labels.empty() && labels.size() != points.size())
      throw ArgumentError("point cloud: label count does not match point count");
    if (features.size() != points.size() * feature_dim)
      throw ArgumentError("point cloud: feature array does not match point count x feature dimension");
    for (const auto& p : points)
      if (!p.finite()) throw ArgumentError("point cloud: non-finite coordinate");
    for (int l : labels)
      if (l < 0) throw ArgumentError("point cloud: negative label");
    for (double f : features)
      if (!std::isfinite(f)) throw ArgumentError("point cloud: non-finite feature");
  }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw ArgumentError("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw ArgumentError("intrinsics: image size must be positive");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
      throw ArgumentError("intrinsics: principal point outside the image");
  }
  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

using Mat3 = std::array<double, 9>;  // row-major

inline Mat3 identity3() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

inline Point3 mul(const Mat3& m, const Point3& p) {
  return {m[0] * p.x + m[1] * p.y + m[2] * p.z, m[3] * p.x + m[4] * p.y + m[5] * p.z,
          m[6] * p.x + m[7] * p.y + m[8] * p.z};
}

inline Point3 mul_transposed(const Mat3& m, const Point3& p) {
  return {m[0] * p.x + m[3] * p.y + m[6] * p.z, m[1] * p.x + m[4] * p.y + m[7] * p.z,
          m[2] * p.x + m[5] * p.y + m[8] * p.z};
}

inline Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[3 * i + j] += a[3 * i + k] * b[3 * k + j];
  return r;
}

inline double determinant(const Mat3& m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

// max_ij |(R^T R - I)_ij|
inline double orthonormality_error(const Mat3& r) {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += r[3 * k + i] * r[3 * k + j];
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

// Camera-to-world rigid transform: p_world = rotation * p_cam + translation.
struct RigidPose {
  Mat3 rotation = identity3();
  Point3 translation{};

  Point3 apply(const Point3& p_cam) const { return mul(rotation, p_cam) + translation; }
  Point3 apply_inverse(const Point3& p_world) const { return mul_transposed(rotation, p_world - translation); }

  // (this ∘ other): first other, then this.
  RigidPose compose(const RigidPose& other) const {
    return {mul(rotation, other.rotation), apply(other.translation)};
  }

  void validate(double tolerance = 1e-6) const {
    for (double v : rotation)
      if (!std::isfinite(v)) throw ArgumentError("pose: non-finite rotation entry");
    if (!translation.finite()) throw ArgumentError("pose: non-finite translation");
    if (orthonormality_error(rotation) > tolerance) throw ArgumentError("pose: rotation is not orthonormal");
    if (determinant(rotation) < 0.0) throw ArgumentError("pose: rotation has determinant -1");
  }
  friend bool operator==(const RigidPose&, const RigidPose&) = default;
};

struct RgbdFrame {
  std::vector<double> depth;  // height*width, meters, 0 = invalid
  std::vector<double> color;  // height*width*3, [0,1]
  std::vector<int> labels;    // optional height*width per-pixel class ids, -1 = unlabeled
  CameraIntrinsics intrinsics;
  RigidPose pose;
  int frame_id = 0;

  int width() const { return intrinsics.width; }
  int height() const { return intrinsics.height; }
  std::size_t pixel(int u, int v) const { return static_cast<std::size_t>(v) * intrinsics.width + u; }
  double depth_at(int u, int v) const { return depth[pixel(u, v)]; }
  bool has_labels() const { return !labels.empty(); }

  void validate() const {
    intrinsics.validate();
    pose.validate();
    const auto n = static_cast<std::size_t>(intrinsics.width) * intrinsics.height;
    if (depth.size() != n) throw ArgumentError("frame: depth size does not match intrinsics");
    if (color.size() != 3 * n) throw ArgumentError("frame: color size does not match intrinsics");
    if (!labels.empty() && labels.size() != n) throw ArgumentError("frame: label image size does not match intrinsics");
    for (double d : depth)
      if (!std::isfinite(d) || d < 0.0) throw ArgumentError("frame: depth must be finite and non-negative");
  }
};

struct SceneBundle {
  PointCloud cloud;
  std::vector<RgbdFrame> frames;
  int class_count = 1;

  void validate() const {
    cloud.validate();
    if (class_count <= 0) throw ArgumentError("scene: class_count must be positive");
    for (int l : cloud.labels)
      if (l >= class_count) throw ArgumentError("scene: label exceeds class_count");
    std::vector<int> ids;
    for (const auto& f : frames) ids.push_back(f.frame_id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw ArgumentError("scene: duplicate frame_id");
  }

  const RgbdFrame* find_frame(int frame_id) const {
    for (const auto& f : frames)
      if (f.frame_id == frame_id) return &f;
    return nullptr;
  }
};

}  // namespace safnet
