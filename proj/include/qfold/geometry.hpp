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

// Rigid-body geometry shared by every other module.
//
// Convention: points are column vectors and matrices left-multiply them, so a
// transform maps p to rotation * p + translation.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "qfold/error.hpp"

namespace qfold {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class Axis { X = 0, Y = 1, Z = 2 };

inline double deg2rad(double degrees) { return degrees * std::numbers::pi / 180.0; }

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }
};

/// Result applies `b` first, then `a`.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

inline RigidTransform rotation_about_axis(Axis axis, double degrees) {
  const double th = deg2rad(degrees);
  const double c = std::cos(th), s = std::sin(th);
  RigidTransform t;
  switch (axis) {
    case Axis::X: t.rotation << 1, 0, 0, 0, c, -s, 0, s, c; break;
    case Axis::Y: t.rotation << c, 0, s, 0, 1, 0, -s, 0, c; break;
    case Axis::Z: t.rotation << c, -s, 0, s, c, 0, 0, 0, 1; break;
  }
  return t;
}

inline RigidTransform translation_transform(const Vec3& v) {
  RigidTransform t;
  t.translation = v;
  return t;
}

/// Orthonormal with determinant +1, to `tol`.
inline bool is_proper_rotation(const Mat3& r, double tol = 1e-9) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

/// Rigid placement of the ligand. The rotation acts about `rotation_center`,
/// which is the centroid of the ligand's input coordinates and never moves
/// during an episode:
///
///   p' = rotation * (p - rotation_center) + rotation_center + translation
///
/// The posed centroid is therefore rotation_center + translation, and
/// left-multiplying `rotation` spins the ligand about its current centroid.
struct Pose {
  RigidTransform transform;
  Vec3 rotation_center = Vec3::Zero();

  static Pose identity(const Vec3& center = Vec3::Zero()) {
    Pose p;
    p.rotation_center = center;
    return p;
  }

  Vec3 apply(const Vec3& p) const {
    return transform.rotation * (p - rotation_center) + rotation_center + transform.translation;
  }

  Pose inverse() const {
    Pose inv;
    inv.rotation_center = rotation_center;
    inv.transform.rotation = transform.rotation.transpose();
    inv.transform.translation = -(inv.transform.rotation * transform.translation);
    return inv;
  }

  /// Same map expressed as a plain transform about the origin.
  RigidTransform as_transform() const {
    RigidTransform t;
    t.rotation = transform.rotation;
    t.translation = rotation_center + transform.translation - transform.rotation * rotation_center;
    return t;
  }

  Vec3 posed_center() const { return rotation_center + transform.translation; }
};

inline std::vector<Vec3> apply_pose(const Pose& pose, std::span<const Vec3> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(pose.apply(p));
  return out;
}

inline std::vector<Vec3> apply_transform(const RigidTransform& t, std::span<const Vec3> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(t.apply(p));
  return out;
}

inline Vec3 centroid(std::span<const Vec3> points) {
  Vec3 c = Vec3::Zero();
  if (points.empty()) return c;
  for (const auto& p : points) c += p;
  return c / static_cast<double>(points.size());
}

/// Largest distance from `center` to any of the points.
inline double bounding_radius(std::span<const Vec3> points, const Vec3& center) {
  double r = 0.0;
  for (const auto& p : points) r = std::max(r, (p - center).norm());
  return r;
}

inline double rmsd(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size() || a.empty())
    fail(ErrorCode::DimensionMismatch, "rmsd needs two non-empty point sets of equal size");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(a.size()));
}

struct Superposition {
  RigidTransform transform;  // maps mobile onto fixed
  double rmsd = 0.0;
};

/// Least-squares superposition of `mobile` onto `fixed` (Kabsch). The
/// reflection case is folded back so the rotation is always proper.
inline Superposition kabsch_superpose(std::span<const Vec3> mobile, std::span<const Vec3> fixed) {
  if (mobile.size() != fixed.size())
    fail(ErrorCode::DimensionMismatch, "kabsch: point sets differ in length (" +
                                           std::to_string(mobile.size()) + " vs " +
                                           std::to_string(fixed.size()) + ")");
  if (mobile.size() < 3) fail(ErrorCode::InvalidArgument, "kabsch: need at least 3 points");

  const Vec3 cm = centroid(mobile);
  const Vec3 cf = centroid(fixed);
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < mobile.size(); ++i) h += (mobile[i] - cm) * (fixed[i] - cf).transpose();

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  Superposition out;
  out.transform.rotation = v * d * u.transpose();
  out.transform.translation = cf - out.transform.rotation * cm;

  double sum = 0.0;
  for (std::size_t i = 0; i < mobile.size(); ++i)
    sum += (out.transform.apply(mobile[i]) - fixed[i]).squaredNorm();
  out.rmsd = std::sqrt(sum / static_cast<double>(mobile.size()));
  return out;
}

/// Six pose parameters: translation in Å then rotation angles in radians
/// about the X, Y and Z axes through the ligand centroid.
using PoseParams = Eigen::Matrix<double, 6, 1>;

/// R = Rz(rz) * Ry(ry) * Rx(rx).
inline Mat3 euler_rotation(double rx, double ry, double rz) {
  return (Eigen::AngleAxisd(rz, Vec3::UnitZ()) * Eigen::AngleAxisd(ry, Vec3::UnitY()) *
          Eigen::AngleAxisd(rx, Vec3::UnitX()))
      .toRotationMatrix();
}

/// Partial derivatives of euler_rotation with respect to rx, ry, rz.
inline std::array<Mat3, 3> euler_rotation_derivatives(double rx, double ry, double rz) {
  const Mat3 x = Eigen::AngleAxisd(rx, Vec3::UnitX()).toRotationMatrix();
  const Mat3 y = Eigen::AngleAxisd(ry, Vec3::UnitY()).toRotationMatrix();
  const Mat3 z = Eigen::AngleAxisd(rz, Vec3::UnitZ()).toRotationMatrix();
  Mat3 dx, dy, dz;
  const double cx = std::cos(rx), sx = std::sin(rx);
  const double cy = std::cos(ry), sy = std::sin(ry);
  const double cz = std::cos(rz), sz = std::sin(rz);
  dx << 0, 0, 0, 0, -sx, -cx, 0, cx, -sx;
  dy << -sy, 0, cy, 0, 0, 0, -cy, 0, -sy;
  dz << -sz, -cz, 0, cz, -sz, 0, 0, 0, 0;
  return {z * y * dx, z * dy * x, dz * y * x};
}

/// Pose obtained by moving `base` by `delta`: the rotation is left-composed
/// (spinning about the posed centroid) and the translation is added.
inline Pose perturb_pose(const Pose& base, const PoseParams& delta) {
  Pose p = base;
  p.transform.rotation = euler_rotation(delta[3], delta[4], delta[5]) * base.transform.rotation;
  p.transform.translation = base.transform.translation + delta.head<3>();
  return p;
}

/// Uniformly distributed proper rotation (random unit quaternion).
template <class Rng>
Mat3 random_rotation(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng));
  } while (q.norm() < 1e-12);
  q.normalize();
  return q.toRotationMatrix();
}

/// Uniformly distributed unit vector.
template <class Rng>
Vec3 random_unit_vector(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-12);
  return v.normalized();
}

}  // namespace qfold
