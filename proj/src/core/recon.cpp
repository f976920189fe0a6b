// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include "recon.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "error.hpp"

namespace metriccam {
namespace {

constexpr long kMaxRing = 24;
constexpr long kMaxSpan = 8;

}  // namespace

PointCloud unproject(const DepthMap& depth, const CameraIntrinsics& k, int frame_id) {
  k.validate();
  if (depth.width() != k.width || depth.height() != k.height)
    throw DomainError("unproject: depth grid does not match intrinsics");
  PointCloud out;
  out.points.reserve(depth.valid_count());
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u)
      if (depth.valid(u, v)) out.points.push_back(unproject_pixel(u, v, depth.values(u, v), k));
  if (frame_id >= 0) out.frame_ids.assign(out.points.size(), frame_id);
  return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) return cloud;
  struct Acc {
    Vec3 sum = Vec3::Zero();
    int n = 0;
    int frame = -1;
  };
  std::unordered_map<std::uint64_t, std::size_t> index;
  std::vector<Acc> accs;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const auto ix = static_cast<std::int64_t>(std::floor(p.x() / voxel_size));
    const auto iy = static_cast<std::int64_t>(std::floor(p.y() / voxel_size));
    const auto iz = static_cast<std::int64_t>(std::floor(p.z() / voxel_size));
    const std::uint64_t key = (static_cast<std::uint64_t>(ix & 0x1fffff) << 42) |
                              (static_cast<std::uint64_t>(iy & 0x1fffff) << 21) |
                              static_cast<std::uint64_t>(iz & 0x1fffff);
    auto [it, inserted] = index.try_emplace(key, accs.size());
    if (inserted) {
      accs.emplace_back();
      accs.back().frame = cloud.frame_ids.empty() ? -1 : cloud.frame_ids[i];
    }
    accs[it->second].sum += p;
    accs[it->second].n += 1;
  }
  PointCloud out;
  out.points.reserve(accs.size());
  for (const auto& a : accs) out.points.push_back(a.sum / a.n);
  if (!cloud.frame_ids.empty())
    for (const auto& a : accs) out.frame_ids.push_back(a.frame);
  return out;
}

PointCloud transform_fuse(const std::vector<std::pair<PointCloud, Pose>>& frames,
                          double voxel_size) {
  if (frames.empty()) throw DomainError("transform_fuse: no frames");
  PointCloud out;
  for (const auto& [cloud, pose] : frames) {
    for (const auto& p : cloud.points) out.points.push_back(pose.apply(p));
    if (!cloud.frame_ids.empty())
      out.frame_ids.insert(out.frame_ids.end(), cloud.frame_ids.begin(), cloud.frame_ids.end());
  }
  if (out.frame_ids.size() != out.points.size()) out.frame_ids.clear();
  return voxel_size > 0.0 ? voxel_downsample(out, voxel_size) : out;
}

SpatialHash::SpatialHash(const std::vector<Vec3>& points, double cell)
    : points_(points), cell_(cell) {
  if (points.empty()) throw DomainError("spatial hash: empty point set");
  if (!(cell_ > 0.0) || !std::isfinite(cell_)) cell_ = 1.0;
  lo_ = {std::numeric_limits<long>::max(), std::numeric_limits<long>::max(),
         std::numeric_limits<long>::max()};
  hi_ = {std::numeric_limits<long>::min(), std::numeric_limits<long>::min(),
         std::numeric_limits<long>::min()};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = coords(points[i]);
    for (int a = 0; a < 3; ++a) {
      lo_[a] = std::min(lo_[a], c[a]);
      hi_[a] = std::max(hi_[a], c[a]);
    }
    cells_[key(c[0], c[1], c[2])].push_back(i);
  }
}

SpatialHash::Key SpatialHash::key(long ix, long iy, long iz) const {
  return (static_cast<Key>(ix & 0x1fffff) << 42) | (static_cast<Key>(iy & 0x1fffff) << 21) |
         static_cast<Key>(iz & 0x1fffff);
}

std::array<long, 3> SpatialHash::coords(const Vec3& p) const {
  return {static_cast<long>(std::floor(p.x() / cell_)),
          static_cast<long>(std::floor(p.y() / cell_)),
          static_cast<long>(std::floor(p.z() / cell_))};
}

std::pair<std::size_t, double> SpatialHash::brute(const Vec3& q) const {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const double d2 = (points_[i] - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return {best, std::sqrt(best_d2)};
}

std::pair<std::size_t, double> SpatialHash::nearest(const Vec3& q) const {
  const auto c = coords(q);
  // Chebyshev distance (in cells) from the query cell to the occupied box.
  long reach = 0;
  for (int a = 0; a < 3; ++a)
    reach = std::max({reach, std::abs(c[a] - lo_[a]), std::abs(c[a] - hi_[a])});
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (long r = 0; r <= std::min(reach, kMaxRing); ++r) {
    for (long dx = -r; dx <= r; ++dx)
      for (long dy = -r; dy <= r; ++dy)
        for (long dz = -r; dz <= r; ++dz) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
          auto it = cells_.find(key(c[0] + dx, c[1] + dy, c[2] + dz));
          if (it == cells_.end()) continue;
          for (std::size_t i : it->second) {
            const double d2 = (points_[i] - q).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
              best_d2 = d2;
              best = i;
            }
          }
        }
    // Anything outside ring r is at least r * cell away.
    const double bound = static_cast<double>(r) * cell_;
    if (best_d2 <= bound * bound) return {best, std::sqrt(best_d2)};
  }
  if (reach > kMaxRing) return brute(q);
  return {best, std::sqrt(best_d2)};
}

bool SpatialHash::any_within(const Vec3& q, double radius) const {
  const auto c = coords(q);
  const long span = static_cast<long>(std::ceil(radius / cell_));
  if (span > kMaxSpan) return brute(q).second <= radius;
  const double r2 = radius * radius;
  for (long dx = -span; dx <= span; ++dx)
    for (long dy = -span; dy <= span; ++dy)
      for (long dz = -span; dz <= span; ++dz) {
        auto it = cells_.find(key(c[0] + dx, c[1] + dy, c[2] + dz));
        if (it == cells_.end()) continue;
        for (std::size_t i : it->second)
          if ((points_[i] - q).squaredNorm() <= r2) return true;
      }
  return false;
}

double default_cell_size(const std::vector<Vec3>& points) {
  if (points.size() < 2) return 1.0;
  const std::size_t stride = std::max<std::size_t>(1, points.size() / 256);
  std::vector<double> nn;
  for (std::size_t i = 0; i < points.size(); i += stride) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < points.size(); ++j)
      if (j != i) best = std::min(best, (points[i] - points[j]).squaredNorm());
    nn.push_back(std::sqrt(best));
  }
  auto mid = nn.begin() + static_cast<std::ptrdiff_t>(nn.size() / 2);
  std::nth_element(nn.begin(), mid, nn.end());
  const double cell = 2.0 * *mid;
  return cell > 0.0 ? cell : 1.0;
}

double chamfer_l1(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw DomainError("chamfer_l1: empty point cloud");
  const auto one_way = [](const PointCloud& from, const PointCloud& to) {
    SpatialHash grid(to.points, default_cell_size(to.points));
    double sum = 0.0;
    for (const auto& p : from.points) sum += grid.nearest(p).second;
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

FScore fscore(const PointCloud& a, const PointCloud& b, double tau) {
  if (a.empty() || b.empty()) throw DomainError("fscore: empty point cloud");
  if (!(tau > 0.0)) throw DomainError("fscore: tau must be positive");
  const auto frac_within = [tau](const PointCloud& from, const PointCloud& to) {
    SpatialHash grid(to.points, tau);
    std::size_t n = 0;
    for (const auto& p : from.points) n += grid.any_within(p, tau);
    return static_cast<double>(n) / static_cast<double>(from.size());
  };
  FScore out;
  out.precision = frac_within(a, b);
  out.recall = frac_within(b, a);
  const double s = out.precision + out.recall;
  out.fscore = s > 0.0 ? 2.0 * out.precision * out.recall / s : 0.0;
  return out;
}

RigidTransform kabsch(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.size() != dst.size() || src.size() < 3)
    throw DomainError("kabsch: need >= 3 paired points");
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(dst.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(1) <= 1e-12 * std::max(1.0, svd.singularValues()(0)))
    throw SingularError("kabsch: points are collinear or coincident");
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
  RigidTransform out;
  out.rotation = v * d * u.transpose();
  out.translation = cd - out.rotation * cs;
  return out;
}

IcpResult icp(const PointCloud& a, const PointCloud& b, const IcpOptions& opts) {
  if (a.size() < 3 || b.empty()) throw SingularError("icp: need >= 3 source points");
  {
    Vec3 c = Vec3::Zero();
    for (const auto& p : a.points) c += p;
    c /= static_cast<double>(a.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : a.points) cov += (p - c) * (p - c).transpose();
    Eigen::JacobiSVD<Mat3> svd(cov);
    const auto s = svd.singularValues();
    if (s(1) <= 1e-12 * std::max(1e-300, s(0)) || s(0) <= 0.0)
      throw SingularError("icp: source cloud is collinear or coincident");
  }
  SpatialHash grid(b.points, default_cell_size(b.points));
  IcpResult res;
  res.transform = opts.initial;
  if (opts.align_centroids) {
    Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
    for (const auto& p : a.points) ca += p;
    for (const auto& p : b.points) cb += p;
    ca /= static_cast<double>(a.size());
    cb /= static_cast<double>(b.size());
    res.transform.translation = cb - res.transform.rotation * ca;
  }
  double prev = std::numeric_limits<double>::infinity();
  std::vector<Vec3> src, dst;
  std::vector<std::pair<double, std::size_t>> order;
  for (int it = 0; it < opts.max_iters; ++it) {
    src.clear();
    dst.clear();
    order.clear();
    std::vector<std::size_t> match(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto [j, d] = grid.nearest(res.transform.apply(a.points[i]));
      match[i] = j;
      order.emplace_back(d, i);
    }
    std::size_t keep = a.size();
    if (opts.trim_fraction > 0.0) {
      keep = std::max<std::size_t>(3, static_cast<std::size_t>(
                                          std::floor(a.size() * (1.0 - opts.trim_fraction))));
      std::stable_sort(order.begin(), order.end());
    }
    double sq = 0.0;
    for (std::size_t r = 0; r < keep; ++r) {
      const std::size_t i = order[r].second;
      sq += order[r].first * order[r].first;
      src.push_back(res.transform.apply(a.points[i]));
      dst.push_back(b.points[match[i]]);
    }
    const double rms = std::sqrt(sq / static_cast<double>(keep));
    res.rms = rms;
    res.iterations = it;
    if (prev - rms < opts.tol && it > 0) break;
    prev = rms;
    res.transform = kabsch(src, dst) * res.transform;
    res.iterations = it + 1;
  }
  // Report the residual of the returned transform.
  double sq = 0.0;
  for (const auto& p : a.points) {
    const double d = grid.nearest(res.transform.apply(p)).second;
    sq += d * d;
  }
  res.rms = std::sqrt(sq / static_cast<double>(a.size()));
  return res;
}

double measure(const DepthMap& depth, const CameraIntrinsics& k, int ua, int va, int ub, int vb) {
  k.validate();
  const auto inside = [&](int u, int v) {
    return u >= 0 && v >= 0 && u < depth.width() && v < depth.height();
  };
  if (!inside(ua, va) || !inside(ub, vb) || !depth.valid(ua, va) || !depth.valid(ub, vb))
    throw DomainError("measure: pixel outside the frame or without valid depth");
  const Vec3 pa = unproject_pixel(ua, va, depth.values(ua, va), k);
  const Vec3 pb = unproject_pixel(ub, vb, depth.values(ub, vb), k);
  return (pa - pb).norm();
}

}  // namespace metriccam
