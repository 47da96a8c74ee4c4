#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "graspkit/common.hpp"
#include "graspkit/rigid_transform.hpp"

namespace graspkit {

/// One observation: robot kinematics and the marker pose seen by the camera.
struct CalibrationSample {
  RigidTransform end_effector_pose;  // base <- gripper
  RigidTransform marker_pose;        // camera <- marker
};

class DegenerateMotionError : public Error {
 public:
  using Error::Error;
};

class TooFewSamplesError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kMinAxisSeparationDeg = 5.0;

namespace detail {

/// Left and right quaternion product matrices, (w, x, y, z) ordering:
/// p * q = left(p) q = right(q) p.
inline Eigen::Matrix4d quat_left(const Eigen::Quaterniond& p) {
  Eigen::Matrix4d m;
  m << p.w(), -p.x(), -p.y(), -p.z(),
       p.x(),  p.w(), -p.z(),  p.y(),
       p.y(),  p.z(),  p.w(), -p.x(),
       p.z(), -p.y(),  p.x(),  p.w();
  return m;
}

inline Eigen::Matrix4d quat_right(const Eigen::Quaterniond& q) {
  Eigen::Matrix4d m;
  m << q.w(), -q.x(), -q.y(), -q.z(),
       q.x(),  q.w(),  q.z(), -q.y(),
       q.y(), -q.z(),  q.w(),  q.x(),
       q.z(),  q.y(), -q.x(),  q.w();
  return m;
}

}  // namespace detail

/// Relative motion pair of AX = XB, both expressed as transforms.
struct MotionPair {
  RigidTransform a;  // motion of the gripper in the base frame
  RigidTransform b;  // motion of the marker in the camera frame
};

/// Pairs consecutive samples (i, i+1).
///
/// With X = base <- camera and Y = gripper <- marker, E_i Y = X M_i, which
/// gives A X = X B for A = E_j E_i^-1 and B = M_j M_i^-1.
inline std::vector<MotionPair> motion_pairs(const std::vector<CalibrationSample>& samples) {
  std::vector<MotionPair> pairs;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i)
    pairs.push_back({samples[i + 1].end_effector_pose * samples[i].end_effector_pose.inverse(),
                     samples[i + 1].marker_pose * samples[i].marker_pose.inverse()});
  return pairs;
}

/// Throws DegenerateMotionError unless two rotation axes differ by at least
/// `min_sep_deg` (axis sign ignored). Motions with negligible rotation carry
/// no axis and are skipped.
inline void check_motion_diversity(const std::vector<MotionPair>& pairs, double min_sep_deg = kMinAxisSeparationDeg) {
  std::vector<Eigen::Vector3d> axes;
  for (const auto& p : pairs) {
    const Eigen::AngleAxisd aa(p.a.rotation());
    if (std::abs(aa.angle()) < 1e-6) continue;
    axes.push_back(aa.axis().normalized());
  }
  const double cos_limit = std::cos(min_sep_deg * std::numbers::pi / 180.0);
  for (std::size_t i = 0; i < axes.size(); ++i)
    for (std::size_t j = i + 1; j < axes.size(); ++j)
      if (std::abs(axes[i].dot(axes[j])) < cos_limit) return;
  throw DegenerateMotionError("degenerate motion set: all rotation axes are within " + std::to_string(min_sep_deg) +
                              " degrees of each other");
}

/// Solves base <- camera from paired robot and marker poses.
///
/// Rotation: each pair contributes (L(q_A) - R(q_B)) q_X = 0; q_X is the
/// eigenvector of the smallest eigenvalue of the summed 4x4 normal matrix.
/// q_B is sign-aligned with q_A first (conjugate rotations share the scalar
/// part). Translation: stacked (R_A - I) t_X = R_X t_B - t_A in least squares.
inline RigidTransform solve_handeye(const std::vector<CalibrationSample>& samples) {
  if (samples.size() < 3) throw TooFewSamplesError("hand-eye calibration needs at least 3 samples");
  const auto pairs = motion_pairs(samples);
  check_motion_diversity(pairs);

  Eigen::Matrix4d normal = Eigen::Matrix4d::Zero();
  for (const auto& p : pairs) {
    const Eigen::Quaterniond qa = p.a.rotation();
    Eigen::Quaterniond qb = p.b.rotation();
    if (qa.w() * qb.w() < 0.0) qb.coeffs() = -qb.coeffs();
    const Eigen::Matrix4d m = detail::quat_left(qa) - detail::quat_right(qb);
    normal.noalias() += m.transpose() * m;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(normal);
  const Eigen::Vector4d v = eig.eigenvectors().col(0);
  Eigen::Quaterniond qx(v(0), v(1), v(2), v(3));
  qx.normalize();
  if (qx.w() < 0.0) qx.coeffs() = -qx.coeffs();
  const Eigen::Matrix3d rx = qx.toRotationMatrix();

  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd lhs(3 * n, 3);
  Eigen::VectorXd rhs(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    lhs.block<3, 3>(3 * i, 0) = p.a.rotation_matrix() - Eigen::Matrix3d::Identity();
    rhs.segment<3>(3 * i) = rx * p.b.translation() - p.a.translation();
  }
  const Eigen::Vector3d tx = lhs.colPivHouseholderQr().solve(rhs);
  return {qx, tx};
}

struct ResidualStats {
  double rotation_rms = 0.0;     // radians
  double translation_rms = 0.0;  // meters
};

/// RMS of the AX = XB mismatch over all consecutive pairs.
inline ResidualStats residual(const std::vector<CalibrationSample>& samples, const RigidTransform& x) {
  const auto pairs = motion_pairs(samples);
  if (pairs.empty()) throw TooFewSamplesError("residual needs at least one motion pair");
  double rot = 0.0, trans = 0.0;
  for (const auto& p : pairs) {
    const RigidTransform lhs = p.a * x;
    const RigidTransform rhs = x * p.b;
    const double ang = lhs.angle_to(rhs);
    rot += ang * ang;
    trans += (lhs.translation() - rhs.translation()).squaredNorm();
  }
  const double n = static_cast<double>(pairs.size());
  return {std::sqrt(rot / n), std::sqrt(trans / n)};
}

/// Fixed marker mount used by generated datasets (gripper <- marker).
inline RigidTransform default_marker_mount() {
  return RigidTransform::from_axis_angle(Eigen::Vector3d(1.0, 1.0, 0.0), 0.3, Eigen::Vector3d(0.01, -0.02, 0.05));
}

/// Synthetic calibration set for a known base <- camera transform.
///
/// Markers are placed 0.35-0.65 m in front of the camera within a 25 degree
/// cone, facing the camera up to 40 degrees off axis. Marker observations are
/// then perturbed: rotation by a random axis and N(0, rot_noise) angle,
/// translation by N(0, trans_noise) per axis.
inline std::vector<CalibrationSample> generate_dataset(const RigidTransform& ground_truth, int n, double rot_noise,
                                                       double trans_noise, std::uint64_t seed,
                                                       const RigidTransform& marker_mount = default_marker_mount()) {
  if (n < 3) throw TooFewSamplesError("generate_dataset: n must be >= 3");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_axis = [&] {
    Eigen::Vector3d a(gauss(rng), gauss(rng), gauss(rng));
    while (a.norm() < 1e-9) a = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    return a.normalized();
  };

  std::vector<CalibrationSample> out;
  out.reserve(static_cast<std::size_t>(n));
  const double cone = 25.0 * std::numbers::pi / 180.0;
  const double tilt = 40.0 * std::numbers::pi / 180.0;
  for (int i = 0; i < n; ++i) {
    const double dist = 0.35 + 0.30 * uni(rng);
    const double polar = cone * std::sqrt(uni(rng));
    const double azim = 2.0 * std::numbers::pi * uni(rng);
    const Eigen::Vector3d pos = dist * Eigen::Vector3d(std::sin(polar) * std::cos(azim),
                                                       std::sin(polar) * std::sin(azim), std::cos(polar));
    // marker z axis facing back at the camera, then a random tilt and spin
    const Eigen::Quaterniond facing(Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitX()));
    const Eigen::Quaterniond tilt_q(Eigen::AngleAxisd(tilt * uni(rng), random_axis()));
    const Eigen::Quaterniond spin(Eigen::AngleAxisd(2.0 * std::numbers::pi * uni(rng), Eigen::Vector3d::UnitZ()));
    const RigidTransform marker(tilt_q * facing * spin, pos);
    const RigidTransform ee = ground_truth * marker * marker_mount.inverse();

    RigidTransform observed = marker;
    if (rot_noise > 0.0 || trans_noise > 0.0) {
      const Eigen::Quaterniond dq(Eigen::AngleAxisd(rot_noise * gauss(rng), random_axis()));
      const Eigen::Vector3d dt(trans_noise * gauss(rng), trans_noise * gauss(rng), trans_noise * gauss(rng));
      observed = RigidTransform(dq * marker.rotation(), marker.translation() + dt);
    }
    out.push_back({ee, observed});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sample files: one sample per line, "qw qx qy qz tx ty tz" twice (end
// effector, then marker). Lines starting with '#' are comments; a comment of
// the form "# ground_truth <7-tuple>" records the generating transform.

inline std::string format_samples(const std::vector<CalibrationSample>& samples,
                                  const std::optional<RigidTransform>& ground_truth = std::nullopt) {
  std::ostringstream os;
  os << "# end_effector(qw qx qy qz tx ty tz) marker(qw qx qy qz tx ty tz)\n";
  if (ground_truth) os << "# ground_truth " << format_pose(*ground_truth) << "\n";
  for (const auto& s : samples) os << format_pose(s.end_effector_pose) << ' ' << format_pose(s.marker_pose) << "\n";
  return os.str();
}

struct SampleFile {
  std::vector<CalibrationSample> samples;
  std::optional<RigidTransform> ground_truth;
};

inline SampleFile parse_samples(const std::string& text) {
  SampleFile f;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto read_tuple = [](std::istringstream& ls, std::array<double, 7>& v) {
    for (auto& x : v)
      if (!(ls >> x)) return false;
    return true;
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first[0] == '#') {
      std::string tag;
      std::array<double, 7> v{};
      if (first == "#" && (ls >> tag) && tag == "ground_truth" && read_tuple(ls, v))
        f.ground_truth = RigidTransform::from_tuple(v);
      continue;
    }
    std::istringstream full(line);
    std::array<double, 7> a{}, b{};
    std::string extra;
    if (!read_tuple(full, a) || !read_tuple(full, b) || (full >> extra))
      throw FormatError("samples:" + std::to_string(lineno) + ": expected 14 numbers");
    f.samples.push_back({RigidTransform::from_tuple(a), RigidTransform::from_tuple(b)});
  }
  return f;
}

}  // namespace graspkit
