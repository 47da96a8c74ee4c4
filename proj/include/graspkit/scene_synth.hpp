#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "graspkit/common.hpp"
#include "graspkit/depth_io.hpp"
#include "graspkit/gripper_models.hpp"
#include "graspkit/rigid_transform.hpp"

namespace graspkit {

enum class Shape { Cylinder, Annulus, Cuboid, Sphere };

inline std::string to_string(Shape s) {
  switch (s) {
    case Shape::Cylinder: return "cylinder";
    case Shape::Annulus: return "annulus";
    case Shape::Cuboid: return "cuboid";
    case Shape::Sphere: return "sphere";
  }
  return "unknown";
}

inline Shape parse_shape(const std::string& s) {
  if (s == "cylinder") return Shape::Cylinder;
  if (s == "annulus") return Shape::Annulus;
  if (s == "cuboid") return Shape::Cuboid;
  if (s == "sphere") return Shape::Sphere;
  throw FormatError("unknown shape '" + s + "'");
}

/// A solid part. The local frame sits at the shape's center with the
/// symmetry axis along local z.
///
/// dims: Cylinder (radius, height, -), Annulus (outer radius, inner radius,
/// height), Cuboid (size x, size y, size z), Sphere (radius, -, -).
struct Primitive {
  Shape shape = Shape::Cuboid;
  std::array<double, 3> dims{0.0, 0.0, 0.0};
  RigidTransform pose;  // camera <- local
  int part_id = 0;
  int part_class = 0;

  void validate() const {
    const int used = shape == Shape::Sphere ? 1 : (shape == Shape::Cylinder ? 2 : 3);
    for (int i = 0; i < used; ++i)
      if (!(dims[i] > 0.0)) throw InvalidArgument("primitive dimensions must be > 0");
    if (shape == Shape::Annulus && !(dims[1] < dims[0]))
      throw InvalidArgument("annulus inner radius must be smaller than the outer radius");
  }
};

/// Open-top box: floor plane at `floor_depth` plus four wall slabs.
struct Bin {
  double center_x = 0.0;
  double center_y = 0.0;
  double inner_size_x = 0.200;
  double inner_size_y = 0.140;
  double wall_thickness = 0.006;
  double wall_height = 0.050;
  double floor_depth = 0.800;

  void validate() const {
    if (!(inner_size_x > 0.0 && inner_size_y > 0.0 && wall_thickness > 0.0 && wall_height > 0.0 &&
          floor_depth > wall_height))
      throw InvalidArgument("degenerate bin geometry");
  }

  std::vector<Primitive> walls() const {
    const double hx = 0.5 * inner_size_x, hy = 0.5 * inner_size_y, t = wall_thickness;
    const double zc = floor_depth - 0.5 * wall_height;
    auto slab = [&](double cx, double cy, double sx, double sy) {
      Primitive p;
      p.shape = Shape::Cuboid;
      p.dims = {sx, sy, wall_height};
      p.pose = RigidTransform::from_translation({center_x + cx, center_y + cy, zc});
      return p;
    };
    return {slab(-hx - 0.5 * t, 0.0, t, inner_size_y + 2 * t), slab(hx + 0.5 * t, 0.0, t, inner_size_y + 2 * t),
            slab(0.0, -hy - 0.5 * t, inner_size_x, t), slab(0.0, hy + 0.5 * t, inner_size_x, t)};
  }
};

/// Default scene camera: 480x360 looking straight down, 0.5 mm/px at the floor.
inline CameraIntrinsics default_camera() { return {1600.0, 1600.0, 240.0, 180.0, 480, 360}; }

struct RayHit {
  double depth = std::numeric_limits<double>::infinity();  // z in the camera frame
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();       // camera frame, facing the camera
};

namespace detail {

/// Candidate hit on a surface, tested against the current best.
struct HitAccumulator {
  double t = std::numeric_limits<double>::infinity();
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  void offer(double ti, const Eigen::Vector3d& ni) {
    if (ti > 1e-9 && ti < t) {
      t = ti;
      n = ni;
    }
  }
};

inline void hit_cylinder_wall(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double radius, double half_h,
                              bool inward, HitAccumulator& acc) {
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a <= 0.0) return;
  const double b = 2.0 * (o.x() * d.x() + o.y() * d.y());
  const double c = o.x() * o.x() + o.y() * o.y() - radius * radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return;
  const double sq = std::sqrt(disc);
  for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
    const Eigen::Vector3d p = o + t * d;
    if (std::abs(p.z()) > half_h) continue;
    Eigen::Vector3d n(p.x(), p.y(), 0.0);
    n /= radius;
    acc.offer(t, inward ? Eigen::Vector3d(-n) : n);
  }
}

inline void hit_caps(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double r_in, double r_out, double half_h,
                     HitAccumulator& acc) {
  if (d.z() == 0.0) return;
  for (double zc : {-half_h, half_h}) {
    const double t = (zc - o.z()) / d.z();
    const Eigen::Vector3d p = o + t * d;
    const double rho2 = p.x() * p.x() + p.y() * p.y();
    if (rho2 > r_out * r_out || rho2 < r_in * r_in) continue;
    acc.offer(t, Eigen::Vector3d(0.0, 0.0, zc > 0.0 ? 1.0 : -1.0));
  }
}

inline void hit_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& half,
                    HitAccumulator& acc) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int axis = -1;
  double sign = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (d(i) == 0.0) {
      if (std::abs(o(i)) > half(i)) return;
      continue;
    }
    double t0 = (-half(i) - o(i)) / d(i);
    double t1 = (half(i) - o(i)) / d(i);
    double s = -1.0;
    if (t0 > t1) {
      std::swap(t0, t1);
      s = 1.0;
    }
    if (t0 > t_near) {
      t_near = t0;
      axis = i;
      sign = s;
    }
    t_far = std::min(t_far, t1);
  }
  if (axis < 0 || t_near > t_far) return;
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n(axis) = sign;
  acc.offer(t_near, n);
}

inline void hit_sphere(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double radius, HitAccumulator& acc) {
  const double a = d.squaredNorm();
  const double b = 2.0 * o.dot(d);
  const double c = o.squaredNorm() - radius * radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return;
  const double t = (-b - std::sqrt(disc)) / (2.0 * a);
  acc.offer(t, (o + t * d) / radius);
}

}  // namespace detail

/// Intersects the camera ray (x, y, 1) with a primitive. Because the ray has
/// unit z component, the ray parameter is the z-depth of the hit.
inline std::optional<RayHit> intersect(const Primitive& p, const Eigen::Vector3d& ray) {
  const RigidTransform inv = p.pose.inverse();
  const Eigen::Vector3d o = inv.translation();
  const Eigen::Vector3d d = inv.rotation() * ray;
  detail::HitAccumulator acc;
  switch (p.shape) {
    case Shape::Cylinder:
      detail::hit_cylinder_wall(o, d, p.dims[0], 0.5 * p.dims[1], false, acc);
      detail::hit_caps(o, d, 0.0, p.dims[0], 0.5 * p.dims[1], acc);
      break;
    case Shape::Annulus:
      detail::hit_cylinder_wall(o, d, p.dims[0], 0.5 * p.dims[2], false, acc);
      detail::hit_cylinder_wall(o, d, p.dims[1], 0.5 * p.dims[2], true, acc);
      detail::hit_caps(o, d, p.dims[1], p.dims[0], 0.5 * p.dims[2], acc);
      break;
    case Shape::Cuboid:
      detail::hit_box(o, d, Eigen::Vector3d(0.5 * p.dims[0], 0.5 * p.dims[1], 0.5 * p.dims[2]), acc);
      break;
    case Shape::Sphere:
      detail::hit_sphere(o, d, p.dims[0], acc);
      break;
  }
  if (!std::isfinite(acc.t)) return std::nullopt;
  Eigen::Vector3d n = p.pose.rotation() * acc.n;
  if (n.dot(ray) > 0.0) n = -n;
  return RayHit{acc.t, n.normalized()};
}

struct SyntheticScene {
  std::vector<Primitive> primitives;
  Bin bin;
  DepthMap rendered;
  Raster<std::uint16_t> labels;  // part_id per pixel, 0 = floor or bin
  // Noise-free ground truth kept for evaluation.
  Raster<float> clean_depth;
  Raster<Eigen::Vector3d> normals;
  std::uint64_t noise_seed = 0;
  int part_class = 0;  // benchmark class, 0 when mixed

  const Primitive* find_part(int part_id) const {
    for (const auto& p : primitives)
      if (p.part_id == part_id) return &p;
    return nullptr;
  }
};

/// Per-pixel z-buffer over primitives, bin walls and floor, sampled at pixel centers.
inline SyntheticScene render(const std::vector<Primitive>& primitives, const Bin& bin, const CameraIntrinsics& k) {
  k.validate();
  bin.validate();
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    primitives[i].validate();
    if (primitives[i].part_id <= 0 || primitives[i].part_id > 65535)
      throw InvalidArgument("part_id must be in [1, 65535]");
    for (std::size_t j = 0; j < i; ++j)
      if (primitives[i].part_id == primitives[j].part_id) throw InvalidArgument("duplicate part_id");
  }
  const auto walls = bin.walls();

  SyntheticScene s;
  s.primitives = primitives;
  s.bin = bin;
  s.labels = Raster<std::uint16_t>(k.width, k.height, 0);
  s.clean_depth = Raster<float>(k.width, k.height, 0.0f);
  s.normals = Raster<Eigen::Vector3d>(k.width, k.height, Eigen::Vector3d::Zero());
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      const Eigen::Vector3d ray((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      RayHit best{bin.floor_depth, Eigen::Vector3d(0.0, 0.0, -1.0)};
      int label = 0;
      for (const auto& w : walls)
        if (auto h = intersect(w, ray); h && h->depth < best.depth) best = *h;
      for (const auto& p : primitives)
        if (auto h = intersect(p, ray); h && h->depth < best.depth) {
          best = *h;
          label = p.part_id;
        }
      s.clean_depth(u, v) = static_cast<float>(best.depth);
      s.labels(u, v) = static_cast<std::uint16_t>(label);
      s.normals(u, v) = best.normal;
    }
  s.rendered = DepthMap(k, s.clean_depth);
  return s;
}

struct NoiseParams {
  double sigma_depth = 0.0003;
  double dropout_rate = 0.01;
  double edge_bias = 4.0;  // extra dropout weight at the steepest pixel
};

/// Gaussian depth noise plus dropout biased towards depth discontinuities.
///
/// Each valid pixel i gets weight 1 + edge_bias * g_i / g_max, where g_i is
/// the largest absolute depth step to a 4-neighbour. The dropout probability
/// is dropout_rate * N * w_i / sum(w), clamped to 1.
inline SyntheticScene apply_noise(SyntheticScene scene, const NoiseParams& noise, std::uint64_t seed) {
  if (!(noise.sigma_depth >= 0.0)) throw InvalidArgument("apply_noise: sigma_depth must be >= 0");
  if (!(noise.dropout_rate >= 0.0 && noise.dropout_rate < 1.0))
    throw InvalidArgument("apply_noise: dropout_rate must be in [0, 1)");
  scene.noise_seed = seed;
  if (noise.sigma_depth == 0.0 && noise.dropout_rate == 0.0) return scene;

  DepthMap& map = scene.rendered;
  const int w = map.width(), h = map.height();
  std::mt19937_64 rng(seed);

  if (noise.dropout_rate > 0.0) {
    Raster<double> grad(w, h, 0.0);
    double gmax = 0.0;
    std::size_t n = 0;
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        if (!map.is_valid(u, v)) continue;
        ++n;
        double g = 0.0;
        const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto& o : nb)
          if (map.is_valid(u + o[0], v + o[1])) g = std::max(g, std::abs(map.at(u + o[0], v + o[1]) - map.at(u, v)));
        grad(u, v) = g;
        gmax = std::max(gmax, g);
      }
    double wsum = 0.0;
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u)
        if (map.is_valid(u, v)) wsum += 1.0 + (gmax > 0.0 ? noise.edge_bias * grad(u, v) / gmax : 0.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double scale = wsum > 0.0 ? noise.dropout_rate * static_cast<double>(n) / wsum : 0.0;
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        if (!map.is_valid(u, v)) continue;
        const double wi = 1.0 + (gmax > 0.0 ? noise.edge_bias * grad(u, v) / gmax : 0.0);
        if (uni(rng) < std::min(1.0, scale * wi)) map.invalidate(u, v);
      }
  }
  if (noise.sigma_depth > 0.0) {
    std::normal_distribution<double> gauss(0.0, noise.sigma_depth);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u)
        if (map.is_valid(u, v)) map.set(u, v, static_cast<float>(map.at(u, v) + gauss(rng)));
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Benchmark part classes

/// One of the seven benchmark part classes and the gripper used to pick it.
struct PartClassSpec {
  int id;
  const char* name;
  Shape shape;
  std::array<double, 3> dims;
  bool lying;  // symmetry axis parallel to the floor
  GripperKind gripper;
  int default_parts;
};

inline const std::array<PartClassSpec, 7>& part_classes() {
  static const std::array<PartClassSpec, 7> table{{
      {1, "gear_motor", Shape::Cuboid, {0.034, 0.024, 0.022}, false, GripperKind::Suction, 6},
      {2, "large_pulley", Shape::Cylinder, {0.015, 0.012, 0.0}, false, GripperKind::Suction, 8},
      {3, "bearing_cap", Shape::Sphere, {0.010, 0.0, 0.0}, false, GripperKind::Suction, 12},
      {4, "washer", Shape::Annulus, {0.0075, 0.0040, 0.003}, false, GripperKind::TwoFingerInner, 12},
      {5, "idler_pulley", Shape::Annulus, {0.0090, 0.0045, 0.008}, false, GripperKind::TwoFingerInner, 12},
      {6, "spacer", Shape::Cylinder, {0.005, 0.012, 0.0}, false, GripperKind::TwoFinger, 12},
      {7, "shaft", Shape::Cylinder, {0.004, 0.040, 0.0}, true, GripperKind::TwoFinger, 10},
  }};
  return table;
}

inline const PartClassSpec& part_class_spec(int part_class) {
  if (part_class < 1 || part_class > 7) throw InvalidArgument("part class must be in 1..7");
  return part_classes()[static_cast<std::size_t>(part_class - 1)];
}

/// Gripper model used for each approach type in the benchmark.
inline GripperModel default_gripper(GripperKind kind) {
  switch (kind) {
    case GripperKind::Suction: return GripperModel::suction(0.0045);
    case GripperKind::TwoFinger: return GripperModel::two_finger(kind, 0.016, 0.004, 0.003, 0.008);
    case GripperKind::TwoFingerInner: return GripperModel::two_finger(kind, 0.004, 0.003, 0.002, 0.006);
  }
  throw InvalidArgument("unknown gripper kind");
}

class PlacementError : public Error {
 public:
  using Error::Error;
};

namespace detail {

/// Oriented rectangle on the floor plane.
struct Footprint {
  double x, y, half_x, half_y, yaw;
};

inline bool footprints_overlap(const Footprint& a, const Footprint& b, double gap) {
  const Eigen::Vector2d d(b.x - a.x, b.y - a.y);
  const std::array<Eigen::Vector2d, 4> axes{Eigen::Vector2d(std::cos(a.yaw), std::sin(a.yaw)),
                                            Eigen::Vector2d(-std::sin(a.yaw), std::cos(a.yaw)),
                                            Eigen::Vector2d(std::cos(b.yaw), std::sin(b.yaw)),
                                            Eigen::Vector2d(-std::sin(b.yaw), std::cos(b.yaw))};
  auto extent = [](const Footprint& f, const Eigen::Vector2d& axis) {
    const Eigen::Vector2d ex(std::cos(f.yaw), std::sin(f.yaw)), ey(-std::sin(f.yaw), std::cos(f.yaw));
    return f.half_x * std::abs(ex.dot(axis)) + f.half_y * std::abs(ey.dot(axis));
  };
  for (const auto& ax : axes)
    if (std::abs(d.dot(ax)) >= extent(a, ax) + extent(b, ax) + gap) return false;
  return true;
}

}  // namespace detail

/// Floor footprint half extents (along local x, y) of a resting class part.
inline std::array<double, 2> footprint_half_extents(const PartClassSpec& c) {
  switch (c.shape) {
    case Shape::Cuboid: return {0.5 * c.dims[0], 0.5 * c.dims[1]};
    case Shape::Sphere: return {c.dims[0], c.dims[0]};
    case Shape::Annulus: return {c.dims[0], c.dims[0]};
    case Shape::Cylinder:
      if (c.lying) return {c.dims[0], 0.5 * c.dims[1]};
      return {c.dims[0], c.dims[0]};
  }
  return {0.0, 0.0};
}

struct BenchmarkSceneOptions {
  Bin bin;
  CameraIntrinsics camera = default_camera();
  NoiseParams noise;
  double wall_margin = 0.003;
  double min_gap = 0.001;
  int max_attempts_per_part = 2000;
};

/// Places `n_parts` resting, non-overlapping parts of one class in the bin,
/// renders the scene and applies the default noise. Deterministic in `seed`.
inline SyntheticScene generate_benchmark(int part_class, int n_parts, std::uint64_t seed,
                                         const BenchmarkSceneOptions& opt = {}) {
  const PartClassSpec& spec = part_class_spec(part_class);
  if (n_parts < 1) throw InvalidArgument("generate_benchmark: n_parts must be >= 1");
  std::mt19937_64 rng(derive_seed(seed, 0x706c6163ull));  // placement stream
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  const auto half = footprint_half_extents(spec);
  const double reach = std::hypot(half[0], half[1]);
  const double lim_x = 0.5 * opt.bin.inner_size_x - opt.wall_margin;
  const double lim_y = 0.5 * opt.bin.inner_size_y - opt.wall_margin;

  std::vector<detail::Footprint> placed;
  std::vector<Primitive> parts;
  for (int i = 0; i < n_parts; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < opt.max_attempts_per_part && !ok; ++attempt) {
      const double yaw = uni(rng) * 2.0 * std::numbers::pi;
      const double x = opt.bin.center_x + (2.0 * uni(rng) - 1.0) * (lim_x - reach);
      const double y = opt.bin.center_y + (2.0 * uni(rng) - 1.0) * (lim_y - reach);
      detail::Footprint f{x, y, half[0], half[1], yaw};
      bool clash = false;
      for (const auto& q : placed)
        if (detail::footprints_overlap(f, q, opt.min_gap)) {
          clash = true;
          break;
        }
      if (clash) continue;
      placed.push_back(f);

      Primitive p;
      p.shape = spec.shape;
      p.dims = spec.dims;
      p.part_id = i + 1;
      p.part_class = spec.id;
      const Eigen::Quaterniond yaw_q(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
      double resting_half_height = 0.0;
      Eigen::Quaterniond q = yaw_q;
      switch (spec.shape) {
        case Shape::Cuboid: resting_half_height = 0.5 * spec.dims[2]; break;
        case Shape::Sphere: resting_half_height = spec.dims[0]; break;
        case Shape::Annulus: resting_half_height = 0.5 * spec.dims[2]; break;
        case Shape::Cylinder:
          if (spec.lying) {
            // cylinder axis onto local y of the footprint, then yaw
            q = yaw_q * Eigen::Quaterniond(Eigen::AngleAxisd(0.5 * std::numbers::pi, Eigen::Vector3d::UnitX()));
            resting_half_height = spec.dims[0];
          } else {
            resting_half_height = 0.5 * spec.dims[1];
          }
          break;
      }
      p.pose = RigidTransform(q, Eigen::Vector3d(x, y, opt.bin.floor_depth - resting_half_height));
      parts.push_back(p);
      ok = true;
    }
    if (!ok)
      throw PlacementError("could not place part " + std::to_string(i + 1) + " of " + std::to_string(n_parts) +
                           " (bin too full)");
  }
  SyntheticScene scene = render(parts, opt.bin, opt.camera);
  scene.part_class = part_class;
  return apply_noise(std::move(scene), opt.noise, derive_seed(seed, 0x6e6f697365ull));
}

// ---------------------------------------------------------------------------
// Scene directories: depth.pfm, depth.intrinsics, labels.pgm, manifest.txt

inline std::string encode_pgm16(const Raster<std::uint16_t>& r) {
  std::string out = "P5\n" + std::to_string(r.width()) + " " + std::to_string(r.height()) + "\n65535\n";
  out.reserve(out.size() + r.size() * 2);
  for (auto x : r.data()) {
    out.push_back(static_cast<char>(x >> 8));
    out.push_back(static_cast<char>(x & 0xff));
  }
  return out;
}

inline Raster<std::uint16_t> decode_pgm16(const std::string& buf) {
  std::size_t pos = 0;
  if (detail::next_token(buf, pos) != "P5") throw FormatError("labels: expected binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(detail::next_token(buf, pos));
    h = std::stoi(detail::next_token(buf, pos));
    maxval = std::stoi(detail::next_token(buf, pos));
  } catch (const std::exception&) {
    throw FormatError("labels: malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 255 || maxval > 65535) throw FormatError("labels: expected 16-bit PGM");
  ++pos;
  if (buf.size() - pos != static_cast<std::size_t>(w) * h * 2) throw FormatError("labels: truncated PGM");
  Raster<std::uint16_t> r(w, h);
  for (std::size_t i = 0; i < r.size(); ++i)
    r.data()[i] = static_cast<std::uint16_t>((static_cast<unsigned char>(buf[pos + 2 * i]) << 8) |
                                             static_cast<unsigned char>(buf[pos + 2 * i + 1]));
  return r;
}

inline std::string format_manifest(const SyntheticScene& s, const std::vector<std::string>& extra = {}) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "# graspkit scene manifest\n";
  for (const auto& e : extra) os << e << "\n";
  os << "part_class " << s.part_class << "\n";
  if (s.part_class >= 1 && s.part_class <= 7) os << "part_class_name " << part_class_spec(s.part_class).name << "\n";
  os << "noise_seed " << s.noise_seed << "\n";
  os << "bin " << s.bin.center_x << ' ' << s.bin.center_y << ' ' << s.bin.inner_size_x << ' ' << s.bin.inner_size_y
     << ' ' << s.bin.wall_thickness << ' ' << s.bin.wall_height << ' ' << s.bin.floor_depth << "\n";
  os << "# primitive <part_id> <class> <shape> <d0> <d1> <d2> <qw qx qy qz tx ty tz>\n";
  for (const auto& p : s.primitives)
    os << "primitive " << p.part_id << ' ' << p.part_class << ' ' << to_string(p.shape) << ' ' << p.dims[0] << ' '
       << p.dims[1] << ' ' << p.dims[2] << ' ' << format_pose(p.pose) << "\n";
  return os.str();
}

inline void save_scene(const SyntheticScene& s, const std::filesystem::path& dir,
                       const std::vector<std::string>& manifest_extra = {}) {
  std::filesystem::create_directories(dir);
  save_pfm(s.rendered, dir / "depth.pfm");
  write_file_atomic(dir / "labels.pgm", encode_pgm16(s.labels));
  write_file_atomic(dir / "manifest.txt", format_manifest(s, manifest_extra));
}

/// Reloads a saved scene. Ground truth is re-rendered from the manifest.
inline SyntheticScene load_scene(const std::filesystem::path& dir) {
  DepthMap depth = load_pfm(dir / "depth.pfm");
  std::istringstream in(read_file(dir / "manifest.txt"));
  std::vector<Primitive> prims;
  Bin bin;
  int part_class = 0;
  std::uint64_t noise_seed = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    auto fail = [&] { throw FormatError("manifest.txt:" + std::to_string(lineno) + ": malformed '" + tag + "' line"); };
    if (tag == "part_class") {
      if (!(ls >> part_class)) fail();
    } else if (tag == "noise_seed") {
      if (!(ls >> noise_seed)) fail();
    } else if (tag == "bin") {
      if (!(ls >> bin.center_x >> bin.center_y >> bin.inner_size_x >> bin.inner_size_y >> bin.wall_thickness >>
            bin.wall_height >> bin.floor_depth))
        fail();
    } else if (tag == "primitive") {
      Primitive p;
      std::string shape;
      std::array<double, 7> pose{};
      if (!(ls >> p.part_id >> p.part_class >> shape >> p.dims[0] >> p.dims[1] >> p.dims[2])) fail();
      for (auto& x : pose)
        if (!(ls >> x)) fail();
      p.shape = parse_shape(shape);
      p.pose = RigidTransform::from_tuple(pose);
      prims.push_back(p);
    }
  }
  SyntheticScene s = render(prims, bin, depth.intrinsics());
  s.labels = decode_pgm16(read_file(dir / "labels.pgm"));
  if (!s.labels.same_shape(depth.depth())) throw FormatError("labels raster size does not match depth");
  s.rendered = std::move(depth);
  s.part_class = part_class;
  s.noise_seed = noise_seed;
  return s;
}

}  // namespace graspkit
