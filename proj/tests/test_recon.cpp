// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "error.hpp"
#include "recon.hpp"
#include "rng.hpp"
#include "synthscene.hpp"

namespace metriccam {
namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed, double extent = 1.0) {
  Rng rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i)
    c.points.emplace_back(rng.uniform(0, extent), rng.uniform(0, 2 * extent), rng.uniform(0, 3 * extent));
  return c;
}

PointCloud transformed(const PointCloud& c, const RigidTransform& t) {
  PointCloud out = c;
  for (auto& p : out.points) p = t.apply(p);
  return out;
}

double brute_nn(const Vec3& q, const PointCloud& c) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : c.points) best = std::min(best, (p - q).norm());
  return best;
}

double brute_chamfer(const PointCloud& a, const PointCloud& b) {
  double sa = 0, sb = 0;
  for (const auto& p : a.points) sa += brute_nn(p, b);
  for (const auto& p : b.points) sb += brute_nn(p, a);
  return 0.5 * (sa / a.size() + sb / b.size());
}

FScore brute_fscore(const PointCloud& a, const PointCloud& b, double tau) {
  double pa = 0, rb = 0;
  for (const auto& p : a.points) pa += brute_nn(p, b) < tau;
  for (const auto& p : b.points) rb += brute_nn(p, a) < tau;
  FScore f;
  f.precision = pa / a.size();
  f.recall = rb / b.size();
  f.fscore = f.precision + f.recall > 0 ? 2 * f.precision * f.recall / (f.precision + f.recall) : 0.0;
  return f;
}

const CameraIntrinsics kK{100.0, 100.0, 40.0, 30.0, 80, 60};

TEST(Unproject, PrincipalAndFortyFiveDegreeRays) {
  const Vec3 a = unproject_pixel(kK.u0, kK.v0, 4.0, kK);
  EXPECT_EQ(a, Vec3(0, 0, 4));
  const Vec3 b = unproject_pixel(kK.u0 + kK.fx, kK.v0, 4.0, kK);
  EXPECT_NEAR((b - Vec3(4, 0, 4)).norm(), 0.0, 1e-15);
}

TEST(Unproject, SkipsInvalidAndTagsFrames) {
  DepthMap d(3, 2);
  d.set(0, 0, 1.0);
  d.set(2, 1, 2.0);
  const PointCloud c = unproject(d, {10, 10, 1, 1, 3, 2}, 7);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.frame_ids, (std::vector<int>{7, 7}));
}

TEST(Unproject, RenderedPlaneLiesOnItsPlane) {
  SceneSpec s;
  Primitive p;
  p.kind = PrimitiveKind::kPlane;
  p.size = 100.0;
  p.pose = RigidTransform::from_axis_angle(Vec3(1, 0.3, 0).normalized(), -1.0, Vec3(0.2, 1.0, 6.0));
  s.primitives.push_back(p);
  const RenderedFrame fr = render(s, kK, Pose{});
  const Vec3 n = p.pose.rotation.col(2);
  const PointCloud c = unproject(fr.depth, kK);
  ASSERT_GT(c.size(), 1000u);
  for (const auto& q : c.points) ASSERT_LT(std::abs(n.dot(q - p.pose.translation)), 1e-6);
}

TEST(Fuse, IdentityAndTranslation) {
  const PointCloud c = random_cloud(50, 1);
  const PointCloud same = transform_fuse({{c, Pose{}}});
  EXPECT_EQ(same.points, c.points);
  Pose shift;
  shift.translation = Vec3(0.5, -1.25, 2.0);
  const PointCloud moved = transform_fuse({{c, shift}});
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(moved.points[i], c.points[i] + shift.translation);
  EXPECT_THROW(transform_fuse({}), DomainError);
}

TEST(Fuse, TwoViewsOfOneSurfaceAgree) {
  SceneSpec s;
  Primitive p;
  p.kind = PrimitiveKind::kPlane;
  p.size = 100.0;
  p.pose = RigidTransform::from_axis_angle(Vec3::UnitX(), -0.4, Vec3(0, 0, 4));
  s.primitives.push_back(p);
  const Pose a{};
  const Pose b = RigidTransform::from_axis_angle(Vec3::UnitY(), 0.05, Vec3(0.1, 0.05, 0.0));
  const CameraIntrinsics k{120.0, 120.0, 39.5, 29.5, 80, 60};
  const RenderedFrame fa = render(s, k, a), fb = render(s, k, b);
  const double voxel = 0.05;
  const PointCloud fused =
      transform_fuse({{unproject(fa.depth, k, 0), a}, {unproject(fb.depth, k, 1), b}}, voxel);
  const PointCloud single = transform_fuse({{unproject(fa.depth, k, 0), a}});
  EXPECT_LT(chamfer_l1(fused, single), voxel);
}

TEST(Voxel, OnePointPerCell) {
  PointCloud c;
  c.points = {{0.01, 0.01, 0.01}, {0.03, 0.02, 0.04}, {0.51, 0.0, 0.0}};
  const PointCloud v = voxel_downsample(c, 0.1);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(voxel_downsample(c, 0.0).points, c.points);
}

TEST(Chamfer, Basics) {
  const PointCloud a = random_cloud(80, 2);
  EXPECT_EQ(chamfer_l1(a, a), 0.0);
  PointCloud s1, s2;
  s1.points = {Vec3::Zero()};
  s2.points = {Vec3(0, 0, 0.2)};
  EXPECT_NEAR(chamfer_l1(s1, s2), 0.2, 1e-15);
  EXPECT_THROW(chamfer_l1(a, PointCloud{}), DomainError);
}

TEST(Chamfer, MatchesBruteForceExactly) {
  for (std::uint64_t seed : {3, 4, 5}) {
    const PointCloud a = random_cloud(200, seed), b = random_cloud(200, seed + 10, 1.3);
    EXPECT_EQ(chamfer_l1(a, b), brute_chamfer(a, b));
    EXPECT_EQ(chamfer_l1(a, b), chamfer_l1(b, a));
  }
}

TEST(Chamfer, DuplicationInvariance) {
  const PointCloud a = random_cloud(100, 6);
  PointCloud aa = a;
  aa.points.insert(aa.points.end(), a.points.begin(), a.points.end());
  EXPECT_EQ(chamfer_l1(a, aa), 0.0);
}

TEST(Chamfer, SpatialHashAgreesWithBruteOnSparseClouds) {
  PointCloud a = random_cloud(30, 7, 0.1);
  a.points.emplace_back(50.0, -20.0, 3.0);
  const PointCloud b = random_cloud(40, 8, 5.0);
  const SpatialHash grid(b.points, 0.05);
  for (const auto& q : a.points) EXPECT_EQ(grid.nearest(q).second, brute_nn(q, b));
}

TEST(FScore, Basics) {
  const PointCloud a = random_cloud(60, 9);
  for (double tau : {1e-6, 0.05, 1.0}) EXPECT_EQ(fscore(a, a, tau).fscore, 1.0);
  const PointCloud far = transformed(a, RigidTransform{Mat3::Identity(), Vec3(100, 0, 0)});
  EXPECT_EQ(fscore(a, far, 0.05).fscore, 0.0);
  EXPECT_THROW(fscore(a, a, 0.0), DomainError);
  EXPECT_THROW(fscore(PointCloud{}, a, 0.05), DomainError);
}

TEST(FScore, HalfWithinMatchesBruteForce) {
  PointCloud b = random_cloud(100, 10);
  PointCloud a = b;
  for (std::size_t i = 0; i < a.size(); i += 2) a.points[i] += Vec3(10.0, 0, 0);
  // B is not a subset of A here; take B as the unmoved half.
  PointCloud sub;
  for (std::size_t i = 1; i < a.size(); i += 2) sub.points.push_back(a.points[i]);
  const FScore f = fscore(a, sub, 0.05), o = brute_fscore(a, sub, 0.05);
  EXPECT_EQ(f.precision, o.precision);
  EXPECT_EQ(f.recall, o.recall);
  EXPECT_EQ(f.fscore, o.fscore);
  EXPECT_NEAR(f.precision, 0.5, 1e-15);
  EXPECT_EQ(f.recall, 1.0);
  const FScore g = fscore(sub, a, 0.05);
  EXPECT_EQ(g.fscore, f.fscore);
}

TEST(FScore, RandomCloudsMatchBruteForce) {
  const PointCloud a = random_cloud(200, 11), b = random_cloud(200, 12);
  for (double tau : {0.05, 0.1, 0.3}) {
    const FScore f = fscore(a, b, tau), o = brute_fscore(a, b, tau);
    EXPECT_EQ(f.precision, o.precision);
    EXPECT_EQ(f.recall, o.recall);
  }
}

TEST(Kabsch, ExactOnFourCorrespondences) {
  const std::vector<Vec3> src = {{0, 0, 0}, {1, 0, 0}, {0, 2, 0}, {0, 0, 3}};
  const RigidTransform t = RigidTransform::from_axis_angle(Vec3(1, 2, 3).normalized(), 0.7, Vec3(0.3, -0.4, 1.5));
  std::vector<Vec3> dst;
  for (const auto& p : src) dst.push_back(t.apply(p));
  const RigidTransform r = kabsch(src, dst);
  EXPECT_LT((r.rotation - t.rotation).norm(), 1e-9);
  EXPECT_LT((r.translation - t.translation).norm(), 1e-9);
  EXPECT_NEAR(r.rotation.determinant(), 1.0, 1e-12);
}

TEST(Kabsch, NoReflection) {
  const std::vector<Vec3> src = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  std::vector<Vec3> dst;
  for (const auto& p : src) dst.emplace_back(-p.x(), p.y(), p.z());
  EXPECT_NEAR(kabsch(src, dst).rotation.determinant(), 1.0, 1e-12);
}

TEST(Icp, IdentityOnEqualClouds) {
  const PointCloud a = random_cloud(300, 13);
  const IcpResult r = icp(a, a);
  EXPECT_LT((r.transform.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(r.transform.translation.norm(), 1e-12);
  EXPECT_LT(r.rms, 1e-12);
}

class IcpRecovery : public ::testing::TestWithParam<int> {};

TEST_P(IcpRecovery, KnownTransform) {
  const int seed = GetParam();
  Rng rng(static_cast<std::uint64_t>(seed) + 100);
  const PointCloud a = random_cloud(400, static_cast<std::uint64_t>(seed));
  const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  const double angle = rng.uniform(-15.0, 15.0) * M_PI / 180.0;
  const Vec3 t(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
  const RigidTransform truth = RigidTransform::from_axis_angle(axis, angle, t);
  const IcpResult r = icp(a, transformed(a, truth), {100, 1e-12, 0.0, {}, true});
  EXPECT_LT((r.transform.rotation - truth.rotation).norm(), 1e-3);
  EXPECT_LT((r.transform.translation - truth.translation).norm(), 1e-3);
  EXPECT_LT(r.rms, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Seeds, IcpRecovery, ::testing::Range(0, 6));

TEST(Icp, ConjugationInvariance) {
  const PointCloud a = random_cloud(300, 20);
  const RigidTransform truth = RigidTransform::from_axis_angle(Vec3(0, 1, 1).normalized(), 0.15, Vec3(0.2, 0.1, -0.3));
  const PointCloud b = transformed(a, truth);
  const RigidTransform g = RigidTransform::from_axis_angle(Vec3(1, 0, 0), 1.1, Vec3(3, -2, 7));
  const IcpResult r1 = icp(a, b);
  const IcpResult r2 = icp(transformed(a, g), transformed(b, g));
  const RigidTransform expect = g * r1.transform * g.inverse();
  EXPECT_LT((r2.transform.rotation - expect.rotation).norm(), 1e-6);
  EXPECT_LT((r2.transform.translation - expect.translation).norm(), 1e-6);
}

TEST(Icp, DegenerateSourceIsSingular) {
  PointCloud line;
  for (int i = 0; i < 10; ++i) line.points.emplace_back(i, 2.0 * i, 0.5 * i);
  EXPECT_THROW(icp(line, random_cloud(10, 1)), SingularError);
  PointCloud same;
  same.points.assign(5, Vec3(1, 1, 1));
  EXPECT_THROW(icp(same, random_cloud(10, 1)), SingularError);
}

TEST(Icp, TrimmingToleratesOutliers) {
  PointCloud a = random_cloud(300, 21);
  const RigidTransform truth = RigidTransform::from_axis_angle(Vec3::UnitZ(), 0.1, Vec3(0.05, 0, 0));
  PointCloud b = transformed(a, truth);
  for (int i = 0; i < 15; ++i) a.points.emplace_back(5.0 + i, -3.0, 2.0);
  IcpOptions o;
  o.trim_fraction = 0.1;
  o.max_iters = 100;
  o.align_centroids = false;
  const IcpResult r = icp(a, b, o);
  EXPECT_LT((r.transform.rotation - truth.rotation).norm(), 1e-3);
}

TEST(Measure, SamePixelAndLateralGeometry) {
  DepthMap d(kK.width, kK.height);
  for (int v = 0; v < kK.height; ++v)
    for (int u = 0; u < kK.width; ++u) d.set(u, v, 3.0);
  const CameraIntrinsics k{20.0, 20.0, 30.0, 30.0, 80, 60};
  EXPECT_EQ(measure(d, k, 5, 5, 5, 5), 0.0);
  EXPECT_NEAR(measure(d, k, 30, 30, 50, 30), 3.0, 1e-12);
  d.invalidate(1, 1);
  EXPECT_THROW(measure(d, k, 1, 1, 5, 5), DomainError);
  EXPECT_THROW(measure(d, k, -1, 0, 5, 5), DomainError);
}

TEST(Measure, RenderedUnitCubeEdge) {
  Primitive box;
  box.kind = PrimitiveKind::kBox;
  box.size = 1.0;
  box.pose = RigidTransform::from_axis_angle(Vec3::UnitY(), M_PI / 4, Vec3(0, 0, 4));
  SceneSpec s;
  s.primitives.push_back(box);
  const CameraIntrinsics k{1000.0, 1000.0, 150.0, 150.0, 300, 300};
  const RenderedFrame fr = render(s, k, Pose{});
  // The front vertical edge projects onto the principal column.
  const int u = 150;
  int top = -1, bottom = -1;
  for (int v = 0; v < k.height; ++v)
    if (fr.depth.valid(u, v)) {
      if (top < 0) top = v;
      bottom = v;
    }
  ASSERT_GE(top, 0);
  EXPECT_NEAR(measure(fr.depth, k, u, top, u, bottom), 1.0, 0.02);
}

}  // namespace
}  // namespace metriccam
