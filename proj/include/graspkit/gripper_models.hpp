#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "graspkit/common.hpp"

namespace graspkit {

enum class GripperKind { Suction, TwoFinger, TwoFingerInner };

inline std::string to_string(GripperKind k) {
  switch (k) {
    case GripperKind::Suction: return "suction";
    case GripperKind::TwoFinger: return "two_finger";
    case GripperKind::TwoFingerInner: return "two_finger_inner";
  }
  return "unknown";
}

inline GripperKind parse_gripper_kind(const std::string& s) {
  if (s == "suction") return GripperKind::Suction;
  if (s == "two_finger") return GripperKind::TwoFinger;
  if (s == "two_finger_inner") return GripperKind::TwoFingerInner;
  throw FormatError("unknown gripper kind '" + s + "' (expected suction, two_finger, two_finger_inner)");
}

/// Dimensions of one gripper approach type, in meters.
///
/// Two-finger geometry is given in the gripper frame: x is the closing axis,
/// y runs along the finger width. `opening_width` is the finger center
/// distance at the start of the motion (open for TwoFinger, closed for
/// TwoFingerInner); each finger travels `closing_stroke / 2` during the
/// motion, inward for TwoFinger and outward for TwoFingerInner.
struct GripperModel {
  GripperKind kind = GripperKind::Suction;
  double pad_radius = 0.0;
  double opening_width = 0.0;
  double finger_width = 0.0;
  double finger_thickness = 0.0;
  double closing_stroke = 0.0;

  static GripperModel suction(double pad_radius) {
    GripperModel m;
    m.kind = GripperKind::Suction;
    m.pad_radius = pad_radius;
    m.validate();
    return m;
  }

  static GripperModel two_finger(GripperKind kind, double opening_width, double finger_width,
                                 double finger_thickness, double closing_stroke) {
    GripperModel m;
    m.kind = kind;
    m.opening_width = opening_width;
    m.finger_width = finger_width;
    m.finger_thickness = finger_thickness;
    m.closing_stroke = closing_stroke;
    m.validate();
    return m;
  }

  void validate() const {
    if (kind == GripperKind::Suction) {
      if (!(pad_radius > 0.0)) throw InvalidArgument("suction gripper: pad_radius must be > 0");
      return;
    }
    if (!(opening_width > 0.0 && finger_width > 0.0 && finger_thickness > 0.0 && closing_stroke > 0.0))
      throw InvalidArgument("two-finger gripper: all lengths must be > 0");
    if (kind == GripperKind::TwoFinger && !(closing_stroke < opening_width))
      throw InvalidArgument("two-finger gripper: closing_stroke must be smaller than opening_width");
  }
};

inline GripperModel parse_gripper_model(const KeyValueConfig& cfg) {
  GripperModel m;
  m.kind = parse_gripper_kind(cfg.get_string("kind"));
  if (m.kind == GripperKind::Suction) {
    m.pad_radius = cfg.get_double("pad_radius");
  } else {
    m.opening_width = cfg.get_double("opening_width");
    m.finger_width = cfg.get_double("finger_width");
    m.finger_thickness = cfg.get_double("finger_thickness");
    m.closing_stroke = cfg.get_double("closing_stroke");
  }
  m.validate();
  return m;
}

inline GripperModel load_gripper_model(const std::filesystem::path& path) {
  return parse_gripper_model(KeyValueConfig::load(path));
}

/// Footprints of one gripper rotation, centered on the grasp point.
///
/// Image axes: column offset dx to the right, row offset dy downwards. The
/// gripper closing axis points along (cos a, sin a) in image coordinates.
struct GripperTemplate {
  double angle = 0.0;
  Mask contact;
  Mask collision;
  /// Which finger a contact pixel belongs to: 1 or 2; 0 outside the contact
  /// mask. Suction pads use 1 throughout.
  Mask contact_side;

  int radius() const { return contact.width() / 2; }
};

inline constexpr double kDefaultContactBand = 0.003;
inline constexpr int kDefaultRotations = 8;

struct GripperTemplateSet {
  GripperKind kind = GripperKind::Suction;
  double resolution = 0.0;  // meters per pixel
  double contact_depth_band = kDefaultContactBand;
  std::vector<GripperTemplate> templates;

  std::size_t rotations() const { return templates.size(); }
};

namespace detail {

inline bool in_interval(double x, double lo, double hi) { return x >= lo && x < hi; }

/// Classifies a gripper-frame point: 0 nothing, 1/2 contact on finger 1/2,
/// 3 collision.
inline int classify_footprint(const GripperModel& m, double x, double y) {
  if (m.kind == GripperKind::Suction) return (x * x + y * y <= m.pad_radius * m.pad_radius) ? 1 : 0;

  const double half_w = 0.5 * m.finger_width;
  if (!(y >= -half_w && y < half_w)) return 0;
  const double ax = std::abs(x);
  const int side = x < 0.0 ? 1 : 2;
  const double center = 0.5 * m.opening_width;
  const double half_t = 0.5 * m.finger_thickness;
  const double travel = 0.5 * m.closing_stroke;
  if (in_interval(ax, center - half_t, center + half_t)) return 3;
  if (m.kind == GripperKind::TwoFinger) {
    if (in_interval(ax, center - half_t - travel, center - half_t)) return side;
  } else {
    if (in_interval(ax, center + half_t, center + half_t + travel)) return side;
  }
  return 0;
}

inline double footprint_extent(const GripperModel& m) {
  if (m.kind == GripperKind::Suction) return m.pad_radius;
  const double reach = 0.5 * m.opening_width + 0.5 * m.finger_thickness +
                       (m.kind == GripperKind::TwoFingerInner ? 0.5 * m.closing_stroke : 0.0);
  return std::hypot(reach, 0.5 * m.finger_width);
}

}  // namespace detail

/// Rasterizes a single rotation by sampling pixel centers.
inline GripperTemplate rasterize_template(const GripperModel& model, double resolution, double angle) {
  const int r = static_cast<int>(std::ceil(detail::footprint_extent(model) / resolution)) + 1;
  const int size = 2 * r + 1;
  GripperTemplate t{angle, Mask(size, size, 0), Mask(size, size, 0), Mask(size, size, 0)};
  const double c = std::cos(angle), s = std::sin(angle);
  for (int j = 0; j < size; ++j) {
    for (int i = 0; i < size; ++i) {
      const double px = (i - r) * resolution;
      const double py = (j - r) * resolution;
      // image offset -> gripper frame (rotate by -angle)
      const double gx = c * px + s * py;
      const double gy = -s * px + c * py;
      const int cls = detail::classify_footprint(model, gx, gy);
      if (cls == 3) {
        t.collision(i, j) = 1;
      } else if (cls != 0) {
        t.contact(i, j) = 1;
        t.contact_side(i, j) = static_cast<std::uint8_t>(cls);
      }
    }
  }
  return t;
}

/// Builds contact/collision templates for `n_rotations` angles in [0, pi).
/// Suction pads are rotationally symmetric and always get one template.
inline GripperTemplateSet build_templates(const GripperModel& model, double resolution,
                                          int n_rotations = kDefaultRotations,
                                          double contact_depth_band = kDefaultContactBand) {
  model.validate();
  if (!(resolution > 0.0)) throw InvalidArgument("build_templates: resolution must be > 0");
  if (n_rotations < 1) throw InvalidArgument("build_templates: n_rotations must be >= 1");

  GripperTemplateSet set;
  set.kind = model.kind;
  set.resolution = resolution;
  set.contact_depth_band = contact_depth_band;
  const int n = model.kind == GripperKind::Suction ? 1 : n_rotations;
  for (int i = 0; i < n; ++i) {
    const double angle = std::numbers::pi * i / n;
    auto t = rasterize_template(model, resolution, angle);
    std::size_t contact = 0, collision = 0, side1 = 0, side2 = 0;
    for (std::size_t k = 0; k < t.contact.size(); ++k) {
      contact += t.contact.data()[k];
      collision += t.collision.data()[k];
      side1 += t.contact_side.data()[k] == 1;
      side2 += t.contact_side.data()[k] == 2;
    }
    const bool two_finger = model.kind != GripperKind::Suction;
    if (contact == 0 || (two_finger && (collision == 0 || side1 == 0 || side2 == 0)))
      throw InvalidArgument("build_templates: resolution " + std::to_string(resolution) +
                            " m/px is too coarse for this gripper");
    set.templates.push_back(std::move(t));
  }
  return set;
}

}  // namespace graspkit
