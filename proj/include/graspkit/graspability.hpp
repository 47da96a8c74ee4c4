#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "graspkit/common.hpp"
#include "graspkit/depth_io.hpp"
#include "graspkit/gripper_models.hpp"

namespace graspkit {

/// Depth rules used when scoring a template placement.
///
/// Grasp depth is the center-pixel depth z. Suction and TwoFinger grasps need
/// the center to stand at least `min_part_height` above `floor_depth` (no
/// check when `floor_depth <= 0`). TwoFinger fingers descend to
/// z + finger_descent and collide with anything shallower than that depth
/// minus `collision_clearance`. TwoFingerInner fingers are inserted at the
/// center depth (a hole bottom) and collide with anything shallower than
/// z - collision_clearance; their contact pixels are the material standing
/// more than the clearance above the hole bottom.
struct ScoringRules {
  double collision_clearance = 0.002;
  double finger_descent = 0.005;
  double floor_depth = 0.0;
  double min_part_height = 0.002;
  double resolution_tolerance = 0.05;
  int threads = 1;
};

/// Template-offset form of one rotation, built once per template.
struct TemplateOffsets {
  struct Offset {
    int dx, dy;
    int side;
  };
  std::vector<Offset> contact;
  std::vector<Offset> collision;
  int side_count[3] = {0, 0, 0};

  static TemplateOffsets from(const GripperTemplate& t) {
    TemplateOffsets o;
    const int r = t.radius();
    for (int j = 0; j < t.contact.height(); ++j)
      for (int i = 0; i < t.contact.width(); ++i) {
        if (t.contact(i, j)) {
          const int side = t.contact_side(i, j);
          o.contact.push_back({i - r, j - r, side});
          ++o.side_count[side];
        }
        if (t.collision(i, j)) o.collision.push_back({i - r, j - r, 0});
      }
    return o;
  }
};

/// Ground sampling distance at the median valid depth, in meters per pixel.
inline double median_ground_resolution(const DepthMap& map) {
  std::vector<float> d;
  d.reserve(map.valid_count());
  for (int v = 0; v < map.height(); ++v)
    for (int u = 0; u < map.width(); ++u)
      if (map.is_valid(u, v)) d.push_back(map.depth()(u, v));
  if (d.empty()) return 0.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return static_cast<double>(*mid) / map.intrinsics().fx;
}

/// Per-rotation 4-DoF graspability rasters in [0, 1].
///
/// For Suction the score is the fraction of pad pixels whose depth lies within
/// the template band of the center depth. For two-finger kinds each finger
/// gets its own contact fraction and the score is the smaller one, so both
/// fingers must meet the part. Any collision zeroes the score. A collision
/// pixel falling outside the raster counts as a collision, since clearance
/// there cannot be checked; contact pixels outside it never touch.
inline std::vector<Raster<double>> compute_g4(const DepthMap& map, const GripperTemplateSet& templates,
                                              const ScoringRules& rules = {}) {
  const int w = map.width(), h = map.height();
  std::vector<Raster<double>> out(templates.rotations(), Raster<double>(w, h, 0.0));
  const double gsd = median_ground_resolution(map);
  if (gsd <= 0.0) return out;
  if (std::abs(templates.resolution - gsd) > rules.resolution_tolerance * gsd)
    throw InvalidArgument("compute_g4: template resolution " + std::to_string(templates.resolution) +
                          " m/px differs from the depth map's " + std::to_string(gsd) + " m/px by more than " +
                          std::to_string(rules.resolution_tolerance * 100.0) + "%");

  const GripperKind kind = templates.kind;
  const double band = templates.contact_depth_band;
  const auto& depth = map.depth();

  for (std::size_t r = 0; r < templates.rotations(); ++r) {
    const auto offsets = TemplateOffsets::from(templates.templates[r]);
    auto& g4 = out[r];
    parallel_rows(h, rules.threads, [&](int v) {
      for (int u = 0; u < w; ++u) {
        if (!map.is_valid(u, v)) continue;
        const double z = depth(u, v);
        if (kind != GripperKind::TwoFingerInner && rules.floor_depth > 0.0 &&
            !(z < rules.floor_depth - rules.min_part_height))
          continue;

        double collision_limit = 0.0;
        if (kind == GripperKind::TwoFinger) collision_limit = z + rules.finger_descent - rules.collision_clearance;
        if (kind == GripperKind::TwoFingerInner) collision_limit = z - rules.collision_clearance;

        bool collides = false;
        for (const auto& o : offsets.collision) {
          const int x = u + o.dx, y = v + o.dy;
          if (!depth.contains(x, y) || (map.is_valid(x, y) && static_cast<double>(depth(x, y)) < collision_limit)) {
            collides = true;
            break;
          }
        }
        if (collides) continue;

        int hits[3] = {0, 0, 0};
        for (const auto& o : offsets.contact) {
          const int x = u + o.dx, y = v + o.dy;
          if (!map.is_valid(x, y)) continue;
          const double d = depth(x, y);
          const bool touch = kind == GripperKind::TwoFingerInner ? d < collision_limit : std::abs(d - z) <= band;
          if (touch) ++hits[o.side];
        }
        if (kind == GripperKind::Suction) {
          g4(u, v) = static_cast<double>(hits[1]) / offsets.side_count[1];
        } else {
          const double f1 = static_cast<double>(hits[1]) / offsets.side_count[1];
          const double f2 = static_cast<double>(hits[2]) / offsets.side_count[2];
          g4(u, v) = std::min(f1, f2);
        }
      }
    });
  }
  return out;
}

/// Viewing-angle weight for one pixel. Both angles in degrees.
inline double omega_from_theta(double theta_deg, double t_theta_deg) {
  if (std::abs(theta_deg) >= t_theta_deg) return 0.0;
  return 1.0 - theta_deg / t_theta_deg;
}

/// Angle in degrees between the negated viewing ray and the surface normal.
/// Uses atan2(|a x b|, a . b), which equals arccos of the normalized dot
/// product but stays accurate for nearly parallel vectors.
inline double view_normal_angle_deg(const Eigen::Vector3d& viewing, const Eigen::Vector3d& normal) {
  const Eigen::Vector3d a = -viewing;
  return std::atan2(a.cross(normal).norm(), a.dot(normal)) * 180.0 / std::numbers::pi;
}

struct OmegaResult {
  Raster<double> omega;
  Raster<double> theta;  // degrees; NaN where the normal is invalid
  Raster<Eigen::Vector3d> viewing;
};

inline OmegaResult compute_omega(const NormalMap& normals, const CameraIntrinsics& k, double t_theta_deg) {
  if (!(t_theta_deg > 0.0)) throw InvalidArgument("compute_omega: t_theta must be > 0");
  const int w = normals.normals.width(), h = normals.normals.height();
  OmegaResult r{Raster<double>(w, h, 0.0), Raster<double>(w, h, std::numeric_limits<double>::quiet_NaN()),
                Raster<Eigen::Vector3d>(w, h, Eigen::Vector3d::Zero())};
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const Eigen::Vector3d n_c = viewing_ray(u, v, k);
      r.viewing(u, v) = n_c;
      if (!normals.is_valid(u, v)) continue;
      const double theta = view_normal_angle_deg(n_c, normals.normals(u, v));
      r.theta(u, v) = theta;
      r.omega(u, v) = omega_from_theta(theta, t_theta_deg);
    }
  return r;
}

inline std::vector<Raster<double>> compute_g6(const std::vector<Raster<double>>& g4, const Raster<double>& omega) {
  std::vector<Raster<double>> out;
  out.reserve(g4.size());
  for (const auto& g : g4) {
    if (!g.same_shape(omega)) throw InvalidArgument("compute_g6: g4 and omega shapes differ");
    Raster<double> r(g.width(), g.height());
    for (std::size_t i = 0; i < g.size(); ++i) r.data()[i] = omega.data()[i] * g.data()[i];
    out.push_back(std::move(r));
  }
  return out;
}

struct GraspabilityMaps {
  std::vector<Raster<double>> g4;
  Raster<double> omega;
  std::vector<Raster<double>> g6;
  Raster<double> theta;
  double t_theta = 25.0;
  Raster<Eigen::Vector3d> viewing;
  std::vector<double> rotations;  // radians, one per g4/g6 layer
};

struct GraspCandidate {
  int u = 0;
  int v = 0;
  int rotation_index = 0;
  double g4 = 0.0;
  double omega = 0.0;
  double g6 = 0.0;
  double score = 0.0;  // ranking score (smoothed g6)
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d approach = Eigen::Vector3d::Zero();
  double grasp_z_rotation = 0.0;

  bool operator==(const GraspCandidate&) const = default;
};

struct ExtractionOptions {
  int max_candidates = 10;
  double min_score = 0.1;
  double nms_radius = 10.0;      // pixels
  double smoothing_sigma = 1.0;  // pixels; 0 disables
};

/// Separable Gaussian blur; taps outside the raster are dropped and the
/// remaining weights renormalized.
inline Raster<double> gaussian_blur(const Raster<double>& in, double sigma) {
  if (!(sigma > 0.0)) return in;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  const int w = in.width(), h = in.height();
  Raster<double> tmp(w, h), out(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      double acc = 0.0, wsum = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int x = u + i;
        if (x < 0 || x >= w) continue;
        acc += kernel[i + radius] * in(x, v);
        wsum += kernel[i + radius];
      }
      tmp(u, v) = acc / wsum;
    }
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      double acc = 0.0, wsum = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int y = v + i;
        if (y < 0 || y >= h) continue;
        acc += kernel[i + radius] * tmp(u, y);
        wsum += kernel[i + radius];
      }
      out(u, v) = acc / wsum;
    }
  return out;
}

/// Best-first peaks of G_6DoF with non-maximum suppression.
///
/// Ranking uses omega * blur(g4) (or raw g6 when smoothing is off). A peak is
/// a (pixel, rotation) whose ranking score is >= every score in its 3x3
/// neighbourhood across all rotations and whose raw g6 is positive and at
/// least `min_score`. Peaks are visited by descending score, ties by
/// ascending (v, u, rotation), and kept unless an already kept candidate lies
/// within `nms_radius` pixels.
inline std::vector<GraspCandidate> extract_candidates(const GraspabilityMaps& maps, const NormalMap& normals,
                                                      const DepthMap& map, const ExtractionOptions& opt) {
  if (opt.max_candidates < 1) throw InvalidArgument("extract_candidates: max_candidates must be >= 1");
  const std::size_t nrot = maps.g6.size();
  if (nrot == 0) return {};
  const int w = maps.omega.width(), h = maps.omega.height();

  std::vector<Raster<double>> rank(nrot);
  for (std::size_t r = 0; r < nrot; ++r) {
    if (opt.smoothing_sigma > 0.0 && r < maps.g4.size()) {
      rank[r] = gaussian_blur(maps.g4[r], opt.smoothing_sigma);
      for (std::size_t i = 0; i < rank[r].size(); ++i) rank[r].data()[i] *= maps.omega.data()[i];
    } else {
      rank[r] = maps.g6[r];
    }
  }

  struct Peak {
    double score;
    int v, u, r;
  };
  std::vector<Peak> peaks;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      for (std::size_t r = 0; r < nrot; ++r) {
        const double g6 = maps.g6[r](u, v);
        if (!(g6 > 0.0) || g6 < opt.min_score) continue;
        if (!map.is_valid(u, v) || !normals.is_valid(u, v)) continue;
        const double s = rank[r](u, v);
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy)
          for (int dx = -1; dx <= 1 && is_max; ++dx) {
            const int x = u + dx, y = v + dy;
            if (x < 0 || y < 0 || x >= w || y >= h) continue;
            for (std::size_t q = 0; q < nrot; ++q)
              if (rank[q](x, y) > s) {
                is_max = false;
                break;
              }
          }
        if (is_max) peaks.push_back({s, v, u, static_cast<int>(r)});
      }

  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.v, a.u, a.r) < std::tie(b.v, b.u, b.r);
  });

  std::vector<GraspCandidate> out;
  const double r2 = opt.nms_radius * opt.nms_radius;
  for (const auto& p : peaks) {
    if (static_cast<int>(out.size()) >= opt.max_candidates) break;
    bool suppressed = false;
    for (const auto& c : out) {
      const double du = c.u - p.u, dv = c.v - p.v;
      if (du * du + dv * dv <= r2) {
        suppressed = true;
        break;
      }
    }
    if (suppressed) continue;
    GraspCandidate c;
    c.u = p.u;
    c.v = p.v;
    c.rotation_index = p.r;
    c.g4 = p.r < static_cast<int>(maps.g4.size()) ? maps.g4[p.r](p.u, p.v) : 0.0;
    c.omega = maps.omega(p.u, p.v);
    c.g6 = maps.g6[p.r](p.u, p.v);
    c.score = p.score;
    c.position = map.point(p.u, p.v);
    c.approach = -normals.normals(p.u, p.v);
    c.grasp_z_rotation = p.r < static_cast<int>(maps.rotations.size()) ? maps.rotations[p.r] : 0.0;
    out.push_back(c);
  }
  return out;
}

/// Tunables of the whole detection pipeline.
struct DetectionParams {
  double t_theta_deg = 25.0;
  int normal_half_window = kDefaultNormalHalfWindow;
  int n_rotations = kDefaultRotations;
  double contact_band = kDefaultContactBand;
  ScoringRules rules;
  ExtractionOptions extraction;
  /// Template resolution in m/px; 0 uses the map's median ground resolution.
  double resolution = 0.0;
};

inline DetectionParams parse_detection_params(const KeyValueConfig& cfg) {
  DetectionParams p;
  p.t_theta_deg = cfg.get_double("t_theta_deg", p.t_theta_deg);
  p.normal_half_window = cfg.get_int("normal_half_window", p.normal_half_window);
  p.n_rotations = cfg.get_int("n_rotations", p.n_rotations);
  p.contact_band = cfg.get_double("contact_band_m", p.contact_band);
  p.rules.collision_clearance = cfg.get_double("collision_clearance_m", p.rules.collision_clearance);
  p.rules.finger_descent = cfg.get_double("finger_descent_m", p.rules.finger_descent);
  p.rules.floor_depth = cfg.get_double("floor_depth_m", p.rules.floor_depth);
  p.rules.min_part_height = cfg.get_double("min_part_height_m", p.rules.min_part_height);
  p.extraction.max_candidates = cfg.get_int("max_candidates", p.extraction.max_candidates);
  p.extraction.min_score = cfg.get_double("min_score", p.extraction.min_score);
  p.extraction.nms_radius = cfg.get_double("nms_radius_px", p.extraction.nms_radius);
  p.extraction.smoothing_sigma = cfg.get_double("smoothing_sigma_px", p.extraction.smoothing_sigma);
  p.resolution = cfg.get_double("resolution_m", p.resolution);
  if (!(p.t_theta_deg > 0.0)) throw FormatError("t_theta_deg must be > 0");
  if (p.extraction.max_candidates < 1) throw FormatError("max_candidates must be >= 1");
  return p;
}

struct Detection {
  NormalMap normals;
  GripperTemplateSet templates;
  GraspabilityMaps maps;
  std::vector<GraspCandidate> candidates;
};

/// Full pipeline on one depth map, keeping every intermediate product.
inline Detection detect_full(const DepthMap& map, const GripperModel& model, const DetectionParams& params,
                             int threads = 1) {
  Detection d;
  d.normals = estimate_normals(map, params.normal_half_window, threads);
  double resolution = params.resolution > 0.0 ? params.resolution : median_ground_resolution(map);
  if (!(resolution > 0.0)) {
    // nothing valid to score
    d.maps.omega = Raster<double>(map.width(), map.height(), 0.0);
    return d;
  }
  d.templates = build_templates(model, resolution, params.n_rotations, params.contact_band);
  ScoringRules rules = params.rules;
  rules.threads = threads;
  d.maps.g4 = compute_g4(map, d.templates, rules);
  auto om = compute_omega(d.normals, map.intrinsics(), params.t_theta_deg);
  d.maps.omega = std::move(om.omega);
  d.maps.theta = std::move(om.theta);
  d.maps.viewing = std::move(om.viewing);
  d.maps.t_theta = params.t_theta_deg;
  d.maps.g6 = compute_g6(d.maps.g4, d.maps.omega);
  for (const auto& t : d.templates.templates) d.maps.rotations.push_back(t.angle);
  d.candidates = extract_candidates(d.maps, d.normals, map, params.extraction);
  return d;
}

inline std::vector<GraspCandidate> detect(const DepthMap& map, const GripperModel& model,
                                          const DetectionParams& params, int threads = 1) {
  return detect_full(map, model, params, threads).candidates;
}

}  // namespace graspkit
