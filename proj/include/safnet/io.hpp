#pragma once

// ASCII PLY point clouds, PGM/PPM images, and the text intrinsics/pose files
// that make up an RGB-D frame on disk.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "safnet/core.hpp"

namespace safnet {

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line) + ": ";
}

inline bool parse_double(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline bool parse_long(std::string_view token, long long& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline double finite_or_throw(std::string_view token, const std::string& path, std::size_t line) {
  double v = 0.0;
  if (!parse_double(token, v))
    throw ParseError(where(path, line) + "invalid number '" + std::string(token) + "'");
  if (!std::isfinite(v)) throw ParseError(where(path, line) + "non-finite value '" + std::string(token) + "'");
  return v;
}

inline std::string format_fixed8(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.8f", v);
  return buf;
}

inline std::string format_g(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PLY

inline PointCloud read_point_cloud(const std::filesystem::path& file) {
  const std::string path = file.string();
  std::ifstream in(file);
  if (!in) throw ParseError(path + ": cannot open file");

  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    return true;
  };

  if (!next_line() || detail::split_ws(line) != std::vector<std::string_view>{"ply"})
    throw ParseError(detail::where(path, line_no) + "missing 'ply' magic");

  long long vertex_count = -1;
  bool in_vertex = false, saw_format = false;
  long long other_elements = 0;
  int x_col = -1, y_col = -1, z_col = -1, label_col = -1;
  std::vector<int> feature_cols;
  int column = 0;

  for (;;) {
    if (!next_line()) throw ParseError(detail::where(path, line_no) + "malformed header: missing end_header");
    auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() != 3 || tok[1] != "ascii")
        throw ParseError(detail::where(path, line_no) + "malformed header: only 'format ascii 1.0' is supported");
      saw_format = true;
    } else if (tok[0] == "element") {
      long long count = 0;
      if (tok.size() != 3 || !detail::parse_long(tok[2], count) || count < 0)
        throw ParseError(detail::where(path, line_no) + "malformed header: bad element line");
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        if (vertex_count >= 0) throw ParseError(detail::where(path, line_no) + "malformed header: duplicate vertex element");
        vertex_count = count;
      } else {
        if (vertex_count < 0 && count > 0)
          throw ParseError(detail::where(path, line_no) + "malformed header: elements before vertex are not supported");
        other_elements += count;
      }
    } else if (tok[0] == "property") {
      if (!in_vertex) continue;
      if (tok.size() != 3 || tok[1] == "list")
        throw ParseError(detail::where(path, line_no) + "malformed header: unsupported vertex property");
      const std::string_view name = tok[2];
      if (name == "x") x_col = column;
      else if (name == "y") y_col = column;
      else if (name == "z") z_col = column;
      else if (name == "label") label_col = column;
      else if (name.size() > 1 && name[0] == 'f') {
        long long fi = 0;
        if (!detail::parse_long(name.substr(1), fi) || fi != static_cast<long long>(feature_cols.size()))
          throw ParseError(detail::where(path, line_no) + "malformed header: feature properties must be f0..f{d-1} in order");
        feature_cols.push_back(column);
      }
      ++column;
    } else {
      throw ParseError(detail::where(path, line_no) + "malformed header: unknown keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!saw_format) throw ParseError(detail::where(path, line_no) + "malformed header: missing format line");
  if (vertex_count < 0) throw ParseError(detail::where(path, line_no) + "malformed header: missing vertex element");
  if (x_col < 0 || y_col < 0 || z_col < 0)
    throw ParseError(detail::where(path, line_no) + "malformed header: x, y, z properties required");

  PointCloud cloud;
  cloud.feature_dim = feature_cols.size();
  cloud.points.reserve(static_cast<std::size_t>(vertex_count));
  if (label_col >= 0) cloud.labels.reserve(static_cast<std::size_t>(vertex_count));
  cloud.features.reserve(static_cast<std::size_t>(vertex_count) * cloud.feature_dim);

  for (long long i = 0; i < vertex_count;) {
    if (!next_line())
      throw ParseError(detail::where(path, line_no) + "vertex count mismatch: header declares " +
                       std::to_string(vertex_count) + " vertices, file contains " + std::to_string(i));
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (static_cast<int>(tok.size()) != column)
      throw ParseError(detail::where(path, line_no) + "expected " + std::to_string(column) + " values, found " +
                       std::to_string(tok.size()));
    Point3 p{detail::finite_or_throw(tok[x_col], path, line_no), detail::finite_or_throw(tok[y_col], path, line_no),
             detail::finite_or_throw(tok[z_col], path, line_no)};
    cloud.points.push_back(p);
    if (label_col >= 0) {
      long long l = 0;
      if (!detail::parse_long(tok[label_col], l) || l < 0 || l > 1'000'000)
        throw ParseError(detail::where(path, line_no) + "invalid label '" + std::string(tok[label_col]) + "'");
      cloud.labels.push_back(static_cast<int>(l));
    }
    for (int c : feature_cols) cloud.features.push_back(detail::finite_or_throw(tok[c], path, line_no));
    ++i;
  }
  long long extra = 0;
  while (next_line())
    if (!detail::split_ws(line).empty()) ++extra;
  if (extra > other_elements)
    throw ParseError(detail::where(path, line_no) + "vertex count mismatch: more data lines than declared elements");
  return cloud;
}

inline std::string point_cloud_to_ply(const PointCloud& cloud) {
  cloud.validate();
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
                    "\nproperty double x\nproperty double y\nproperty double z\n";
  if (cloud.has_labels()) out += "property int label\n";
  for (std::size_t f = 0; f < cloud.feature_dim; ++f) out += "property double f" + std::to_string(f) + "\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out += detail::format_fixed8(p.x) + ' ' + detail::format_fixed8(p.y) + ' ' + detail::format_fixed8(p.z);
    if (cloud.has_labels()) out += ' ' + std::to_string(cloud.labels[i]);
    for (std::size_t f = 0; f < cloud.feature_dim; ++f) out += ' ' + detail::format_g(cloud.feature(i)[f], 9);
    out += '\n';
  }
  return out;
}

inline void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << point_cloud_to_ply(cloud);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Netpbm

struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<int> values;  // row-major
};

struct RgbImage {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<int> values;  // row-major, 3 per pixel
};

namespace detail {

struct NetpbmHeader {
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  std::size_t data_offset = 0;
};

// Reads magic, width, height, maxval honoring '#' comments; data_offset points
// at the first raster byte (after the single whitespace following maxval).
inline NetpbmHeader read_netpbm_header(const std::string& bytes, const std::string& path) {
  NetpbmHeader h;
  std::size_t pos = 0;
  auto token = [&]() -> std::string {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  h.magic = token();
  long long w = 0, hh = 0, m = 0;
  if (!parse_long(token(), w) || !parse_long(token(), hh) || !parse_long(token(), m) || w <= 0 || hh <= 0 || m <= 0 ||
      m > 65535)
    throw ParseError(path + ": malformed netpbm header");
  h.width = static_cast<int>(w);
  h.height = static_cast<int>(hh);
  h.maxval = static_cast<int>(m);
  h.data_offset = pos + 1;
  return h;
}

inline std::vector<int> read_netpbm_raster(const std::string& bytes, const NetpbmHeader& h, std::size_t count,
                                           bool binary, const std::string& path) {
  std::vector<int> values;
  values.reserve(count);
  if (binary) {
    const std::size_t bpv = h.maxval > 255 ? 2 : 1;
    if (bytes.size() < h.data_offset + count * bpv) throw ParseError(path + ": truncated raster");
    for (std::size_t i = 0; i < count; ++i) {
      const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + h.data_offset + i * bpv);
      values.push_back(bpv == 2 ? (b[0] << 8) | b[1] : b[0]);
    }
  } else {
    std::string_view rest(bytes);
    rest.remove_prefix(std::min(h.data_offset, bytes.size()));
    std::istringstream ss{std::string(rest)};
    std::string t;
    while (values.size() < count && ss >> t) {
      long long v = 0;
      if (!parse_long(t, v) || v < 0 || v > h.maxval) throw ParseError(path + ": invalid raster value '" + t + "'");
      values.push_back(static_cast<int>(v));
    }
    if (values.size() != count) throw ParseError(path + ": truncated raster");
  }
  for (int v : values)
    if (v > h.maxval) throw ParseError(path + ": raster value exceeds maxval");
  return values;
}

}  // namespace detail

inline GrayImage read_pgm(const std::filesystem::path& file) {
  const std::string path = file.string();
  const std::string bytes = detail::slurp(file);
  auto h = detail::read_netpbm_header(bytes, path);
  if (h.magic != "P2" && h.magic != "P5") throw ParseError(path + ": expected PGM magic P2 or P5");
  GrayImage img{h.width, h.height, h.maxval, {}};
  img.values = detail::read_netpbm_raster(bytes, h, static_cast<std::size_t>(h.width) * h.height, h.magic == "P5", path);
  return img;
}

inline RgbImage read_ppm(const std::filesystem::path& file) {
  const std::string path = file.string();
  const std::string bytes = detail::slurp(file);
  auto h = detail::read_netpbm_header(bytes, path);
  if (h.magic != "P3" && h.magic != "P6") throw ParseError(path + ": expected PPM magic P3 or P6");
  RgbImage img{h.width, h.height, h.maxval, {}};
  img.values =
      detail::read_netpbm_raster(bytes, h, static_cast<std::size_t>(h.width) * h.height * 3, h.magic == "P6", path);
  return img;
}

inline void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  auto out = detail::open_out(path, true);
  out << "P5\n" << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
  for (int v : img.values) {
    if (img.maxval > 255) out.put(static_cast<char>((v >> 8) & 0xff));
    out.put(static_cast<char>(v & 0xff));
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline void write_ppm(const RgbImage& img, const std::filesystem::path& path) {
  auto out = detail::open_out(path, true);
  out << "P6\n" << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
  for (int v : img.values) {
    if (img.maxval > 255) out.put(static_cast<char>((v >> 8) & 0xff));
    out.put(static_cast<char>(v & 0xff));
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Intrinsics and pose text files

inline CameraIntrinsics read_intrinsics(const std::filesystem::path& file) {
  const std::string path = file.string();
  const std::string text = detail::slurp(file);
  auto tok = detail::split_ws(text);
  if (tok.size() != 6) throw ParseError(path + ":1: expected 'fx fy cx cy width height'");
  CameraIntrinsics k;
  k.fx = detail::finite_or_throw(tok[0], path, 1);
  k.fy = detail::finite_or_throw(tok[1], path, 1);
  k.cx = detail::finite_or_throw(tok[2], path, 1);
  k.cy = detail::finite_or_throw(tok[3], path, 1);
  long long w = 0, h = 0;
  if (!detail::parse_long(tok[4], w) || !detail::parse_long(tok[5], h))
    throw ParseError(path + ":1: width and height must be integers");
  k.width = static_cast<int>(w);
  k.height = static_cast<int>(h);
  try {
    k.validate();
  } catch (const ArgumentError& e) {
    throw ParseError(path + ":1: " + e.what());
  }
  return k;
}

inline void write_intrinsics(const CameraIntrinsics& k, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << detail::format_g(k.fx, 17) << ' ' << detail::format_g(k.fy, 17) << ' ' << detail::format_g(k.cx, 17) << ' '
      << detail::format_g(k.cy, 17) << ' ' << k.width << ' ' << k.height << '\n';
}

inline RigidPose read_pose(const std::filesystem::path& file, double tolerance = 1e-6) {
  const std::string path = file.string();
  std::istringstream in(detail::slurp(file));
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 4) throw ParseError(detail::where(path, line_no) + "pose rows must have 4 values");
    std::vector<double> row;
    for (auto t : tok) row.push_back(detail::finite_or_throw(t, path, line_no));
    rows.push_back(row);
  }
  if (rows.size() != 4) throw ParseError(path + ": pose must have 4 rows");
  const auto& last = rows[3];
  if (std::abs(last[0]) > tolerance || std::abs(last[1]) > tolerance || std::abs(last[2]) > tolerance ||
      std::abs(last[3] - 1.0) > tolerance)
    throw ParseError(path + ": pose bottom row must be 0 0 0 1");
  RigidPose pose;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) pose.rotation[3 * r + c] = rows[r][c];
  pose.translation = {rows[0][3], rows[1][3], rows[2][3]};
  if (orthonormality_error(pose.rotation) > tolerance)
    throw ParseError(path + ": pose rotation is not orthonormal (tolerance " + detail::format_g(tolerance, 3) + ")");
  if (determinant(pose.rotation) < 0.0) throw ParseError(path + ": pose rotation has determinant -1");
  return pose;
}

inline void write_pose(const RigidPose& pose, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out << detail::format_g(pose.rotation[3 * r + c], 17) << ' ';
    out << detail::format_g(pose.translation[r], 17) << '\n';
  }
  out << "0 0 0 1\n";
}

// ---------------------------------------------------------------------------
// Frames

constexpr int kUnlabeledPixel = 255;

inline RgbdFrame read_frame(const std::filesystem::path& depth_path, const std::filesystem::path& color_path,
                            const std::filesystem::path& intrinsics_path, const std::filesystem::path& pose_path,
                            int frame_id = 0, const std::filesystem::path& label_path = {}) {
  RgbdFrame frame;
  frame.frame_id = frame_id;
  frame.intrinsics = read_intrinsics(intrinsics_path);
  frame.pose = read_pose(pose_path);
  const int w = frame.intrinsics.width, h = frame.intrinsics.height;

  auto depth = read_pgm(depth_path);
  if (depth.width != w || depth.height != h)
    throw ParseError(depth_path.string() + ": depth dimensions " + std::to_string(depth.width) + "x" +
                     std::to_string(depth.height) + " do not match intrinsics " + std::to_string(w) + "x" +
                     std::to_string(h));
  frame.depth.resize(depth.values.size());
  for (std::size_t i = 0; i < depth.values.size(); ++i) frame.depth[i] = depth.values[i] / 1000.0;

  auto color = read_ppm(color_path);
  if (color.width != w || color.height != h)
    throw ParseError(color_path.string() + ": color dimensions do not match intrinsics");
  frame.color.resize(color.values.size());
  for (std::size_t i = 0; i < color.values.size(); ++i)
    frame.color[i] = static_cast<double>(color.values[i]) / color.maxval;

  if (!label_path.empty()) {
    auto labels = read_pgm(label_path);
    if (labels.width != w || labels.height != h)
      throw ParseError(label_path.string() + ": label dimensions do not match intrinsics");
    frame.labels.resize(labels.values.size());
    for (std::size_t i = 0; i < labels.values.size(); ++i)
      frame.labels[i] = labels.values[i] == kUnlabeledPixel ? -1 : labels.values[i];
  }
  return frame;
}

// Depth is stored as uint16 millimeters (rounded); color as 8-bit.
inline void write_frame(const RgbdFrame& frame, const std::filesystem::path& depth_path,
                        const std::filesystem::path& color_path, const std::filesystem::path& intrinsics_path,
                        const std::filesystem::path& pose_path, const std::filesystem::path& label_path = {}) {
  frame.validate();
  const int w = frame.width(), h = frame.height();
  GrayImage depth{w, h, 65535, {}};
  depth.values.reserve(frame.depth.size());
  for (double d : frame.depth) depth.values.push_back(static_cast<int>(std::min(65535.0, std::round(d * 1000.0))));
  write_pgm(depth, depth_path);

  RgbImage color{w, h, 255, {}};
  color.values.reserve(frame.color.size());
  for (double c : frame.color) color.values.push_back(static_cast<int>(std::round(std::clamp(c, 0.0, 1.0) * 255.0)));
  write_ppm(color, color_path);

  write_intrinsics(frame.intrinsics, intrinsics_path);
  write_pose(frame.pose, pose_path);

  if (!label_path.empty() && frame.has_labels()) {
    GrayImage labels{w, h, 255, {}};
    for (int l : frame.labels) labels.values.push_back(l < 0 || l >= kUnlabeledPixel ? kUnlabeledPixel : l);
    write_pgm(labels, label_path);
  }
}

}  // namespace safnet
