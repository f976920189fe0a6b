// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "camera.hpp"
#include "geometry.hpp"
#include "grid.hpp"

namespace metriccam {

// x = (u - u0) d / fx, y = (v - v0) d / fy, z = d for every valid pixel.
PointCloud unproject(const DepthMap& depth, const CameraIntrinsics& k, int frame_id = -1);

inline Vec3 unproject_pixel(double u, double v, double d, const CameraIntrinsics& k) {
  return {(u - k.u0) * d / k.fx, (v - k.v0) * d / k.fy, d};
}

// Maps each cloud to world coordinates with its camera-to-world pose and
// concatenates. voxel_size > 0 replaces the points of each occupied voxel by
// their centroid.
PointCloud transform_fuse(const std::vector<std::pair<PointCloud, Pose>>& frames,
                          double voxel_size = 0.0);
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size);

// Uniform spatial hash over a fixed point set. Queries are exact: the ring
// search stops only once no unvisited cell can hold a closer point, and falls
// back to a linear scan if the ring grows past the occupied extent.
class SpatialHash {
 public:
  SpatialHash(const std::vector<Vec3>& points, double cell);

  // Index and distance of the nearest point.
  std::pair<std::size_t, double> nearest(const Vec3& q) const;
  // True when some point lies within radius (radius <= cell is fastest).
  bool any_within(const Vec3& q, double radius) const;
  double cell() const { return cell_; }

 private:
  using Key = std::uint64_t;
  Key key(long ix, long iy, long iz) const;
  std::array<long, 3> coords(const Vec3& p) const;
  std::pair<std::size_t, double> brute(const Vec3& q) const;

  const std::vector<Vec3>& points_;
  double cell_;
  std::unordered_map<Key, std::vector<std::size_t>> cells_;
  std::array<long, 3> lo_{}, hi_{};
};

// Twice the median nearest-neighbor spacing, estimated on a deterministic
// subsample of at most 256 points.
double default_cell_size(const std::vector<Vec3>& points);

double chamfer_l1(const PointCloud& a, const PointCloud& b);

struct FScore {
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
};

FScore fscore(const PointCloud& a, const PointCloud& b, double tau = 0.05);

// Closed-form least-squares rigid transform mapping src[i] onto dst[i].
RigidTransform kabsch(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

struct IcpOptions {
  int max_iters = 50;
  double tol = 1e-10;
  // Fraction of worst correspondences dropped each iteration (0 disables).
  double trim_fraction = 0.0;
  RigidTransform initial;
  // Replace the initial translation with the one that matches centroids, so
  // large offsets do not depend on the nearest-neighbor basin.
  bool align_centroids = true;
};

struct IcpResult {
  RigidTransform transform;  // maps A onto B
  double rms = 0.0;
  int iterations = 0;
};

// Point-to-point ICP. Throws SingularError for collinear or coincident A.
IcpResult icp(const PointCloud& a, const PointCloud& b, const IcpOptions& opts = {});

// Euclidean distance between the unprojections of two valid pixels.
double measure(const DepthMap& depth, const CameraIntrinsics& k, int ua, int va, int ub, int vb);

}  // namespace metriccam
