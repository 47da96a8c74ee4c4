#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using graspkit::RigidTransform;
using testing_support::random_pose;

namespace {

double max_abs_diff(const Eigen::Matrix4d& a, const Eigen::Matrix4d& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(RigidTransform, IdentityActsTrivially) {
  const Eigen::Vector3d p(1.0, -2.0, 3.0);
  EXPECT_EQ(RigidTransform::identity() * p, p);
  const auto t = RigidTransform::identity().to_tuple();
  EXPECT_EQ(t, (std::array<double, 7>{1, 0, 0, 0, 0, 0, 0}));
}

TEST(RigidTransform, CompositionMatchesHomogeneousMatrices) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto a = random_pose(rng), b = random_pose(rng);
    EXPECT_LT(max_abs_diff((a * b).matrix(), a.matrix() * b.matrix()), 1e-12);
  }
}

TEST(RigidTransform, AssociativeAndInvertible) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 500; ++i) {
    const auto a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    EXPECT_LT(max_abs_diff(((a * b) * c).matrix(), (a * (b * c)).matrix()), 1e-12);
    EXPECT_LT(max_abs_diff((a * a.inverse()).matrix(), Eigen::Matrix4d::Identity()), 1e-12);
    EXPECT_NEAR((a * b * c).rotation().norm(), 1.0, 1e-12);
  }
}

TEST(RigidTransform, TupleRoundTripAndNormalization) {
  const auto t = RigidTransform::from_tuple({2.0, 0.0, 0.0, 0.0, 0.1, 0.2, 0.3});
  EXPECT_DOUBLE_EQ(t.rotation().w(), 1.0);
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_pose(rng);
    const auto q = RigidTransform::from_tuple(p.to_tuple());
    EXPECT_LT(max_abs_diff(p.matrix(), q.matrix()), 1e-15);
  }
}

TEST(RigidTransform, AngleIgnoresQuaternionSign) {
  std::mt19937_64 rng(14);
  const auto p = random_pose(rng);
  Eigen::Quaterniond neg = p.rotation();
  neg.coeffs() = -neg.coeffs();
  EXPECT_NEAR(p.angle_to(RigidTransform(neg, p.translation())), 0.0, 1e-12);
  const auto r = RigidTransform::from_axis_angle(Eigen::Vector3d::UnitZ(), 0.3);
  EXPECT_NEAR(RigidTransform::identity().angle_to(r), 0.3, 1e-15);
}

TEST(RigidTransform, InterpolationEndpointsAndMidpoint) {
  const auto a = RigidTransform::identity();
  const auto b = RigidTransform::from_axis_angle(Eigen::Vector3d::UnitX(), 1.0, Eigen::Vector3d(2.0, 0.0, 0.0));
  EXPECT_LT(a.interpolate(b, 0.0).angle_to(a), 1e-15);
  EXPECT_LT(a.interpolate(b, 1.0).angle_to(b), 1e-12);
  const auto mid = a.interpolate(b, 0.5);
  EXPECT_NEAR(mid.angle_to(a), 0.5, 1e-12);
  EXPECT_NEAR(mid.translation().x(), 1.0, 1e-15);
}

TEST(RigidTransform, FormatUsesRoundTripPrecision) {
  std::mt19937_64 rng(15);
  const auto p = random_pose(rng);
  std::istringstream in(graspkit::format_pose(p));
  std::array<double, 7> v{};
  for (auto& x : v) in >> x;
  EXPECT_EQ(v, p.to_tuple());
}
