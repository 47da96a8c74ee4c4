#pragma once

#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace graspkit {

/// Rigid body transform stored as a unit quaternion and a translation.
///
/// A transform `T_a_b` maps coordinates expressed in frame `b` into frame `a`,
/// so `T_a_b * T_b_c == T_a_c`. Every constructor and composition renormalizes
/// the rotation, keeping |q| = 1 to machine precision.
class RigidTransform {
 public:
  RigidTransform() = default;

  RigidTransform(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation.normalized()), translation_(translation) {}

  static RigidTransform identity() { return {}; }

  static RigidTransform from_translation(const Eigen::Vector3d& t) {
    return {Eigen::Quaterniond::Identity(), t};
  }

  static RigidTransform from_axis_angle(const Eigen::Vector3d& axis, double angle,
                                        const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
    return {Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())), t};
  }

  /// Pose 7-tuple in the order qw qx qy qz tx ty tz.
  static RigidTransform from_tuple(const std::array<double, 7>& v) {
    return {Eigen::Quaterniond(v[0], v[1], v[2], v[3]), Eigen::Vector3d(v[4], v[5], v[6])};
  }

  std::array<double, 7> to_tuple() const {
    return {rotation_.w(), rotation_.x(), rotation_.y(), rotation_.z(),
            translation_.x(), translation_.y(), translation_.z()};
  }

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_matrix();
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  RigidTransform inverse() const {
    const Eigen::Quaterniond inv = rotation_.conjugate();
    return {inv, -(inv * translation_)};
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return rotation_ * p + translation_; }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return {rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_};
  }

  /// Geodesic rotation angle to `other`, in [0, pi]. Insensitive to q/-q.
  double angle_to(const RigidTransform& other) const {
    return rotation_.angularDistance(other.rotation_);
  }

  double distance_to(const RigidTransform& other) const {
    return (translation_ - other.translation_).norm();
  }

  /// Slerp on rotation, lerp on translation.
  RigidTransform interpolate(const RigidTransform& to, double s) const {
    return {rotation_.slerp(s, to.rotation_), (1.0 - s) * translation_ + s * to.translation_};
  }

 private:
  Eigen::Quaterniond rotation_ = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

/// Writes the 7-tuple with round-trip precision, space separated.
inline std::string format_pose(const RigidTransform& t) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  const auto v = t.to_tuple();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ' ';
    os << v[i];
  }
  return os.str();
}

inline std::ostream& operator<<(std::ostream& os, const RigidTransform& t) {
  return os << format_pose(t);
}

}  // namespace graspkit
