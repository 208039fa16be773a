// Copyright 2026 The qfold Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

namespace qfold {
namespace {

std::vector<Vec3> random_cloud(std::mt19937_64& rng, int n, double spread = 10.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

void expect_near(const Vec3& a, const Vec3& b, double tol) {
  EXPECT_LE((a - b).norm(), tol) << a.transpose() << " vs " << b.transpose();
}

TEST(ApplyPose, IdentityLeavesPointsUnchanged) {
  std::mt19937_64 rng(1);
  const auto pts = random_cloud(rng, 20);
  const auto out = apply_pose(Pose::identity(Vec3(1, 2, 3)), pts);
  for (std::size_t i = 0; i < pts.size(); ++i) expect_near(out[i], pts[i], 1e-12);
}

TEST(ApplyPose, QuarterTurnAboutZ) {
  Pose p;
  p.transform = rotation_about_axis(Axis::Z, 90.0);
  expect_near(p.apply(Vec3(1, 0, 0)), Vec3(0, 1, 0), 1e-15);
}

TEST(ApplyPose, FullTurnInOneDegreeSteps) {
  std::mt19937_64 rng(2);
  const Vec3 start = random_cloud(rng, 1).front();
  Vec3 p = start;
  const RigidTransform step = rotation_about_axis(Axis::Z, 1.0);
  for (int i = 0; i < 360; ++i) p = step.apply(p);
  expect_near(p, start, 1e-6);
}

TEST(ApplyPose, RotatesAboutTheCenterThenTranslates) {
  Pose p;
  p.rotation_center = Vec3(1, 1, 0);
  p.transform = compose(translation_transform(Vec3(0, 0, 5)), rotation_about_axis(Axis::Z, 180.0));
  expect_near(p.apply(Vec3(2, 1, 0)), Vec3(0, 1, 5), 1e-12);
  expect_near(p.posed_center(), Vec3(1, 1, 5), 1e-12);
}

TEST(ApplyPose, PreservesDistancesAndInverts) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Pose pose;
    pose.transform = oracle::random_rigid(rng);
    pose.rotation_center = random_cloud(rng, 1).front();
    const auto pts = random_cloud(rng, 10);
    const auto moved = apply_pose(pose, pts);
    ASSERT_EQ(moved.size(), pts.size());
    for (std::size_t i = 1; i < pts.size(); ++i)
      EXPECT_NEAR((moved[i] - moved[0]).norm(), (pts[i] - pts[0]).norm(), 1e-9);
    const auto back = apply_pose(pose.inverse(), moved);
    for (std::size_t i = 0; i < pts.size(); ++i) expect_near(back[i], pts[i], 1e-9);
    const RigidTransform t = pose.as_transform();
    for (std::size_t i = 0; i < pts.size(); ++i) expect_near(t.apply(pts[i]), moved[i], 1e-9);
  }
}

TEST(Compose, IdentityAndInverse) {
  std::mt19937_64 rng(4);
  const RigidTransform t = oracle::random_rigid(rng);
  const RigidTransform same = compose(t, RigidTransform::identity());
  EXPECT_TRUE(same.rotation.isApprox(t.rotation, 1e-15));
  EXPECT_TRUE(same.translation.isApprox(t.translation, 1e-15));
  const RigidTransform id = compose(t, t.inverse());
  EXPECT_LE((id.rotation - Mat3::Identity()).norm(), 1e-9);
  EXPECT_LE(id.translation.norm(), 1e-9);
}

TEST(Compose, OppositeDegreeTurnsCancel) {
  const RigidTransform id = compose(rotation_about_axis(Axis::Z, 1.0), rotation_about_axis(Axis::Z, -1.0));
  EXPECT_LE((id.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(id.translation, Vec3::Zero());
}

TEST(Compose, AppliesRightOperandFirstAndStaysProper) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform a = oracle::random_rigid(rng), b = oracle::random_rigid(rng);
    const RigidTransform ab = compose(a, b);
    const Vec3 p = random_cloud(rng, 1).front();
    expect_near(ab.apply(p), a.apply(b.apply(p)), 1e-9);
    EXPECT_TRUE(is_proper_rotation(ab.rotation, 1e-9));
  }
}

TEST(RotationAboutAxis, ZeroIsIdentity) {
  EXPECT_EQ(rotation_about_axis(Axis::Z, 0.0).rotation, Mat3::Identity());
}

TEST(RotationAboutAxis, HalfTurnAboutX) {
  expect_near(rotation_about_axis(Axis::X, 180.0).apply(Vec3(0, 1, 0)), Vec3(0, -1, 0), 1e-15);
}

TEST(RotationAboutAxis, OneDegreeAboutYMatchesClosedForm) {
  const double c = std::cos(std::numbers::pi / 180.0), s = std::sin(std::numbers::pi / 180.0);
  Mat3 expected;
  expected << c, 0, s, 0, 1, 0, -s, 0, c;
  EXPECT_LE((rotation_about_axis(Axis::Y, 1.0).rotation - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RotationAboutAxis, OppositeAnglesCancelOnEveryAxis) {
  for (Axis a : {Axis::X, Axis::Y, Axis::Z})
    for (double deg : {0.3, 1.0, 47.0, 179.0}) {
      const Mat3 m = rotation_about_axis(a, deg).rotation * rotation_about_axis(a, -deg).rotation;
      EXPECT_LE((m - Mat3::Identity()).norm(), 1e-12);
    }
}

TEST(Kabsch, IdenticalSetsGiveIdentity) {
  std::mt19937_64 rng(6);
  const auto pts = random_cloud(rng, 12);
  const auto s = kabsch_superpose(pts, pts);
  EXPECT_LE(s.rmsd, 1e-12);
  EXPECT_LE((s.transform.rotation - Mat3::Identity()).norm(), 1e-9);
  EXPECT_LE(s.transform.translation.norm(), 1e-9);
}

TEST(Kabsch, RecoversRigidMotion) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto fixed = random_cloud(rng, 15);
    const RigidTransform t = oracle::random_rigid(rng);
    const auto mobile = apply_transform(t, fixed);
    const auto s = kabsch_superpose(mobile, fixed);
    EXPECT_LE(s.rmsd, 1e-9);
    EXPECT_NEAR(s.transform.rotation.determinant(), 1.0, 1e-9);
  }
}

TEST(Kabsch, MatchesRotationGridOracle) {
  const std::vector<Vec3> a = {{0, 0, 0}, {3.8, 0, 0}, {3.8, 3.8, 0}, {1.0, 2.0, 3.0}};
  const std::vector<Vec3> b = {{1.0, 0.2, -0.5}, {4.1, 2.0, 0.3}, {1.8, 4.9, 1.1}, {0.2, 1.6, 3.9}};
  const std::vector<Vec3> c = {{-2, 1, 0}, {0, 4, 1}, {3, 3, -1}, {1, -1, 2}};
  const std::vector<Vec3> d = {{0.5, 0.5, 0.5}, {2, 5, 0}, {5, 1, 2}, {-1, 2, 4}};
  for (const auto& [m, f] : {std::pair{a, b}, std::pair{c, d}}) {
    const double oracle_rmsd = oracle::grid_superpose_rmsd(m, f);
    EXPECT_NEAR(kabsch_superpose(m, f).rmsd, oracle_rmsd, 1e-3);
  }
}

TEST(Kabsch, RejectsMirrorImages) {
  const std::vector<Vec3> fixed = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  std::vector<Vec3> mirror = fixed;
  for (auto& p : mirror) p.z() = -p.z();
  const auto s = kabsch_superpose(mirror, fixed);
  EXPECT_NEAR(s.transform.rotation.determinant(), 1.0, 1e-12);
  EXPECT_GT(s.rmsd, 0.1);
}

TEST(Kabsch, SmallRotationsNeverImproveTheFit) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto fixed = random_cloud(rng, 10);
    auto mobile = apply_transform(oracle::random_rigid(rng), fixed);
    for (auto& p : mobile) p += Vec3(noise(rng), noise(rng), noise(rng));
    const auto s = kabsch_superpose(mobile, fixed);
    const auto fitted = apply_transform(s.transform, mobile);
    const Vec3 c = centroid(fitted);
    for (Axis axis : {Axis::X, Axis::Y, Axis::Z})
      for (double deg : {0.1, -0.1}) {
        const Mat3 r = rotation_about_axis(axis, deg).rotation;
        std::vector<Vec3> tweaked;
        for (const auto& p : fitted) tweaked.push_back(r * (p - c) + c);
        EXPECT_GE(rmsd(tweaked, fixed), s.rmsd - 1e-9);
      }
  }
}

TEST(Kabsch, RejectsBadInput) {
  const std::vector<Vec3> three = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  const std::vector<Vec3> two = {{0, 0, 0}, {1, 0, 0}};
  const std::vector<Vec3> four = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  try {
    kabsch_superpose(three, four);
    FAIL() << "length mismatch accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  try {
    kabsch_superpose(two, two);
    FAIL() << "two points accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

TEST(PerturbPose, ZeroDeltaIsTheBasePose) {
  std::mt19937_64 rng(9);
  Pose base;
  base.transform = oracle::random_rigid(rng);
  base.rotation_center = Vec3(1, 2, 3);
  const Pose p = perturb_pose(base, PoseParams::Zero());
  EXPECT_TRUE(p.transform.rotation.isApprox(base.transform.rotation, 1e-15));
  EXPECT_EQ(p.transform.translation, base.transform.translation);
}

TEST(EulerRotation, DerivativesMatchFiniteDifferences) {
  const double rx = 0.3, ry = -0.7, rz = 1.1, h = 1e-6;
  const auto d = euler_rotation_derivatives(rx, ry, rz);
  const Mat3 fx = (euler_rotation(rx + h, ry, rz) - euler_rotation(rx - h, ry, rz)) / (2 * h);
  const Mat3 fy = (euler_rotation(rx, ry + h, rz) - euler_rotation(rx, ry - h, rz)) / (2 * h);
  const Mat3 fz = (euler_rotation(rx, ry, rz + h) - euler_rotation(rx, ry, rz - h)) / (2 * h);
  EXPECT_LE((d[0] - fx).norm(), 1e-8);
  EXPECT_LE((d[1] - fy).norm(), 1e-8);
  EXPECT_LE((d[2] - fz).norm(), 1e-8);
}

TEST(RandomRotation, IsProperAndSeedDeterministic) {
  std::mt19937_64 a(10), b(10);
  for (int i = 0; i < 100; ++i) {
    const Mat3 r = random_rotation(a);
    EXPECT_TRUE(is_proper_rotation(r, 1e-9));
    EXPECT_EQ(r, random_rotation(b));
  }
}

}  // namespace
}  // namespace qfold
