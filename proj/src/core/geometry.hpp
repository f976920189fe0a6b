// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

namespace metriccam {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rigid transform x -> R x + t. As a camera pose it maps camera coordinates
// to world coordinates.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
  RigidTransform operator*(const RigidTransform& o) const {
    return {rotation * o.rotation, rotation * o.translation + translation};
  }

  // Throws DomainError unless R R^T = I and det R = +1 within tol.
  void validate(double tol = 1e-9) const;

  static RigidTransform from_axis_angle(const Vec3& axis, double angle, const Vec3& t);
};

using Pose = RigidTransform;

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<int> frame_ids;  // empty or one per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

}  // namespace metriccam
