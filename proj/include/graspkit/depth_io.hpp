#pragma once

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "graspkit/common.hpp"

namespace graspkit {

/// Pinhole camera model. Camera frame: x right, y down, z along the optical axis.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvalidArgument("intrinsics: raster size must be positive");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
      throw InvalidArgument("intrinsics: principal point outside the raster");
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Point in the camera frame for pixel (u, v) at z-depth d.
inline Eigen::Vector3d deproject(double u, double v, double d, const CameraIntrinsics& k) {
  return {(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d};
}

/// Inverse of deproject: returns (u, v, d).
inline Eigen::Vector3d project(const Eigen::Vector3d& p, const CameraIntrinsics& k) {
  return {p.x() * k.fx / p.z() + k.cx, p.y() * k.fy / p.z() + k.cy, p.z()};
}

/// Unit ray from the camera center through pixel (u, v), pointing into the scene.
inline Eigen::Vector3d viewing_ray(double u, double v, const CameraIntrinsics& k) {
  return Eigen::Vector3d((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0).normalized();
}

/// Metric z-depth raster with validity mask.
class DepthMap {
 public:
  DepthMap() = default;

  /// Builds from raw samples; non-finite or non-positive samples become invalid.
  DepthMap(const CameraIntrinsics& intrinsics, Raster<float> depth) : intrinsics_(intrinsics) {
    intrinsics.validate();
    if (depth.width() != intrinsics.width || depth.height() != intrinsics.height)
      throw InvalidArgument("depth raster size does not match intrinsics");
    valid_ = Mask(depth.width(), depth.height(), 0);
    auto d = depth.data();
    auto m = valid_.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (std::isfinite(d[i]) && d[i] > 0.0f) {
        m[i] = 1;
      } else {
        d[i] = 0.0f;
      }
    }
    depth_ = std::move(depth);
  }

  int width() const { return depth_.width(); }
  int height() const { return depth_.height(); }
  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  const Raster<float>& depth() const { return depth_; }
  const Mask& valid() const { return valid_; }

  bool is_valid(int u, int v) const { return depth_.contains(u, v) && valid_(u, v) != 0; }
  double at(int u, int v) const { return depth_(u, v); }

  Eigen::Vector3d point(int u, int v) const { return deproject(u, v, depth_(u, v), intrinsics_); }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto m : valid_.data()) n += m;
    return n;
  }

  /// Marks a pixel invalid (stored depth becomes 0).
  void invalidate(int u, int v) {
    valid_(u, v) = 0;
    depth_(u, v) = 0.0f;
  }

  /// Overwrites a pixel; invalid if the value is not a positive finite number.
  void set(int u, int v, float d) {
    if (std::isfinite(d) && d > 0.0f) {
      depth_(u, v) = d;
      valid_(u, v) = 1;
    } else {
      invalidate(u, v);
    }
  }

  bool operator==(const DepthMap&) const = default;

 private:
  CameraIntrinsics intrinsics_;
  Raster<float> depth_;
  Mask valid_;
};

/// Per-pixel unit surface normals in camera coordinates, facing the camera.
struct NormalMap {
  Raster<Eigen::Vector3d> normals;
  Mask valid;

  bool is_valid(int u, int v) const { return valid.contains(u, v) && valid(u, v) != 0; }
};

inline constexpr int kDefaultNormalHalfWindow = 2;

/// Least-squares plane normal over the (2h+1)^2 window around each valid pixel.
///
/// A pixel gets a normal only when at least 6 other pixels of its window are
/// valid and the neighbourhood is not collinear. Normals are oriented so that
/// n.z < 0.
inline NormalMap estimate_normals(const DepthMap& map, int half_window = kDefaultNormalHalfWindow,
                                  int threads = 1) {
  if (half_window < 1) throw InvalidArgument("estimate_normals: half_window must be >= 1");
  const int w = map.width();
  const int h = map.height();
  NormalMap out{Raster<Eigen::Vector3d>(w, h, Eigen::Vector3d::Zero()), Mask(w, h, 0)};

  parallel_rows(h, threads, [&](int v) {
    for (int u = 0; u < w; ++u) {
      if (!map.is_valid(u, v)) continue;
      const int u0 = std::max(0, u - half_window), u1 = std::min(w - 1, u + half_window);
      const int v0 = std::max(0, v - half_window), v1 = std::min(h - 1, v + half_window);

      int count = 0;
      Eigen::Vector3d sum = Eigen::Vector3d::Zero();
      for (int y = v0; y <= v1; ++y)
        for (int x = u0; x <= u1; ++x)
          if (map.is_valid(x, y)) {
            sum += map.point(x, y);
            ++count;
          }
      if (count - 1 < 6) continue;
      const Eigen::Vector3d centroid = sum / count;

      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (int y = v0; y <= v1; ++y)
        for (int x = u0; x <= u1; ++x)
          if (map.is_valid(x, y)) {
            const Eigen::Vector3d d = map.point(x, y) - centroid;
            cov.noalias() += d * d.transpose();
          }

      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
      if (solver.info() != Eigen::Success) continue;
      const auto& ev = solver.eigenvalues();  // ascending
      if (!(ev(1) > 1e-12 * std::max(ev(2), 1e-300))) continue;  // collinear support

      Eigen::Vector3d n = solver.eigenvectors().col(0).normalized();
      if (std::abs(n.z()) < 1e-12) continue;  // seen exactly edge-on
      if (n.z() > 0.0) n = -n;
      out.normals(u, v) = n;
      out.valid(u, v) = 1;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline std::string format_intrinsics(const CameraIntrinsics& k) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "fx=" << k.fx << "\nfy=" << k.fy << "\ncx=" << k.cx << "\ncy=" << k.cy << "\nwidth=" << k.width
     << "\nheight=" << k.height << "\n";
  return os.str();
}

inline CameraIntrinsics parse_intrinsics(const KeyValueConfig& cfg) {
  CameraIntrinsics k;
  k.fx = cfg.get_double("fx");
  k.fy = cfg.get_double("fy");
  k.cx = cfg.get_double("cx");
  k.cy = cfg.get_double("cy");
  k.width = cfg.get_int("width");
  k.height = cfg.get_int("height");
  k.validate();
  return k;
}

inline CameraIntrinsics load_intrinsics(const std::filesystem::path& path) {
  return parse_intrinsics(KeyValueConfig::load(path));
}

/// Sidecar intrinsics path for a depth file: same stem, `.intrinsics` extension.
inline std::filesystem::path intrinsics_path_for(const std::filesystem::path& pfm_path) {
  auto p = pfm_path;
  p.replace_extension(".intrinsics");
  return p;
}

namespace detail {
inline std::uint32_t byteswap32(std::uint32_t x) {
  return (x >> 24) | ((x >> 8) & 0xff00u) | ((x << 8) & 0xff0000u) | (x << 24);
}

/// Reads one whitespace-delimited header token; `pos` ends on the delimiter.
inline std::string next_token(const std::string& buf, std::size_t& pos) {
  while (pos < buf.size() && std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
  const std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
  return buf.substr(start, pos - start);
}
}  // namespace detail

inline std::string pfm_header(int width, int height) {
  return "Pf\n" + std::to_string(width) + " " + std::to_string(height) + "\n-1\n";
}

/// Encodes a grayscale little-endian PFM; rows run bottom to top.
inline std::string encode_pfm(const DepthMap& map) {
  std::string out = pfm_header(map.width(), map.height());
  const std::size_t header = out.size();
  out.resize(header + map.depth().size() * 4);
  char* dst = out.data() + header;
  for (int row = map.height() - 1; row >= 0; --row) {
    for (int u = 0; u < map.width(); ++u) {
      const float value = map.is_valid(u, row) ? map.depth()(u, row) : 0.0f;
      std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
      if constexpr (std::endian::native == std::endian::big) bits = detail::byteswap32(bits);
      std::memcpy(dst, &bits, 4);
      dst += 4;
    }
  }
  return out;
}


inline Raster<float> decode_pfm(const std::string& buf) {
  std::size_t pos = 0;
  const std::string magic = detail::next_token(buf, pos);
  if (magic == "PF") throw FormatError("PFM: unsupported channel count (color PFM)");
  if (magic != "Pf") throw FormatError("PFM: bad magic '" + magic + "'");
  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(detail::next_token(buf, pos));
    height = std::stoi(detail::next_token(buf, pos));
    scale = std::stod(detail::next_token(buf, pos));
  } catch (const std::exception&) {
    throw FormatError("PFM: malformed header");
  }
  if (width <= 0 || height <= 0) throw FormatError("PFM: malformed header (size)");
  if (scale == 0.0 || !std::isfinite(scale)) throw FormatError("PFM: malformed header (scale)");
  if (pos >= buf.size()) throw FormatError("PFM: truncated header");
  ++pos;  // single whitespace byte before the raster
  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 4;
  if (buf.size() - pos != need) throw FormatError("PFM: raster size does not match header");

  const bool file_little = scale < 0.0;
  const bool swap = file_little != (std::endian::native == std::endian::little);
  Raster<float> r(width, height);
  const char* src = buf.data() + pos;
  for (int row = height - 1; row >= 0; --row) {
    for (int u = 0; u < width; ++u) {
      std::uint32_t bits;
      std::memcpy(&bits, src, 4);
      src += 4;
      if (swap) bits = detail::byteswap32(bits);
      r(u, row) = std::bit_cast<float>(bits);
    }
  }
  return r;
}

/// Writes `<path>` and its `.intrinsics` sidecar. Invalid pixels are stored as 0.
inline void save_pfm(const DepthMap& map, const std::filesystem::path& path) {
  write_file_atomic(path, encode_pfm(map));
  write_file_atomic(intrinsics_path_for(path), format_intrinsics(map.intrinsics()));
}

inline DepthMap load_pfm(const std::filesystem::path& path, const std::filesystem::path& intrinsics_path) {
  const CameraIntrinsics k = load_intrinsics(intrinsics_path);
  Raster<float> raster = decode_pfm(read_file(path));
  if (raster.width() != k.width || raster.height() != k.height)
    throw FormatError("PFM size " + std::to_string(raster.width()) + "x" + std::to_string(raster.height()) +
                      " does not match intrinsics " + std::to_string(k.width) + "x" + std::to_string(k.height));
  return DepthMap(k, std::move(raster));
}

inline DepthMap load_pfm(const std::filesystem::path& path) { return load_pfm(path, intrinsics_path_for(path)); }

}  // namespace graspkit
