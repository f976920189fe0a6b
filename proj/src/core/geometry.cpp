// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include "geometry.hpp"

#include <cmath>

#include "error.hpp"

namespace metriccam {

void RigidTransform::validate(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite())
    throw DomainError("pose: non-finite entries");
  if ((rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
    throw DomainError("pose: rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > tol)
    throw DomainError("pose: rotation determinant is not +1");
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle, const Vec3& t) {
  RigidTransform out;
  out.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  out.translation = t;
  return out;
}

}  // namespace metriccam
