// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>

#include "camera.hpp"
#include "error.hpp"
#include "losses.hpp"
#include "recon.hpp"
#include "synthscene.hpp"

namespace metriccam {
namespace {

namespace fs = std::filesystem;

Primitive make(PrimitiveKind kind, double size, const Vec3& t, const Mat3& r = Mat3::Identity()) {
  Primitive p;
  p.kind = kind;
  p.size = size;
  p.pose.rotation = r;
  p.pose.translation = t;
  return p;
}

SceneSpec single(const Primitive& p) {
  SceneSpec s;
  s.primitives.push_back(p);
  return s;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("metriccam_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Independent ray/axis-aligned-box oracle.
double slab_oracle(const Vec3& lo, const Vec3& hi, const Vec3& dir) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (0.0 < lo[a] || 0.0 > hi[a]) return -1.0;
      continue;
    }
    double t1 = lo[a] / dir[a], t2 = hi[a] / dir[a];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
  }
  if (tmax < tmin || tmax <= 0.0) return -1.0;
  return tmin > 0.0 ? tmin : tmax;
}

const CameraIntrinsics kCam{60.0, 60.0, 31.5, 23.5, 64, 48};

TEST(Render, FrontoParallelPlane) {
  const RenderedFrame fr = render(single(make(PrimitiveKind::kPlane, 100.0, Vec3(0, 0, 5))), kCam, Pose{});
  ASSERT_EQ(fr.depth.valid_count(), fr.depth.values.size());
  for (std::size_t i = 0; i < fr.depth.values.size(); ++i) {
    ASSERT_NEAR(fr.depth.values[i], 5.0, 1e-12);
    ASSERT_EQ(fr.plane_id[i], 0);
    ASSERT_NEAR(fr.normals[i].z(), -1.0, 1e-12);
  }
}

TEST(Render, SphereOnAxis) {
  const CameraIntrinsics k{10.0, 10.0, 8.0, 6.0, 17, 13};
  const RenderedFrame fr = render(single(make(PrimitiveKind::kSphere, 2.0, Vec3(0, 0, 10))), k, Pose{});
  ASSERT_TRUE(fr.depth.valid(8, 6));
  EXPECT_NEAR(fr.depth.values(8, 6), 9.0, 1e-12);
  EXPECT_EQ(fr.plane_id(8, 6), -1);
  EXPECT_FALSE(fr.depth.valid(0, 0));
}

TEST(Render, BoxMatchesSlabOracle) {
  const Vec3 c(0.8, 0.0, 6.0);
  const RenderedFrame fr = render(single(make(PrimitiveKind::kBox, 1.0, c)), kCam, Pose{});
  const Vec3 lo = c - Vec3::Constant(0.5), hi = c + Vec3::Constant(0.5);
  // Projected near corner (1.3, 0.5, 5.5) and its neighborhood.
  const int cu = static_cast<int>(kCam.u0 + kCam.fx * 1.3 / 5.5);
  const int cv = static_cast<int>(kCam.v0 + kCam.fy * 0.5 / 5.5);
  int hits = 0;
  for (int v = 0; v < kCam.height; ++v)
    for (int u = 0; u < kCam.width; ++u) {
      const Vec3 dir((u - kCam.u0) / kCam.fx, (v - kCam.v0) / kCam.fy, 1.0);
      const double t = slab_oracle(lo, hi, dir);
      ASSERT_EQ(fr.depth.valid(u, v), t > 0.0) << u << "," << v;
      if (t > 0.0) {
        ASSERT_NEAR(fr.depth.values(u, v), t, 1e-9);
        ++hits;
      }
    }
  EXPECT_GT(hits, 50);
  EXPECT_TRUE(fr.depth.valid(cu - 1, cv - 1));
  EXPECT_FALSE(fr.depth.valid(cu + 2, cv + 2));
}

TEST(Render, ShadingFollowsLambert) {
  SceneSpec s = single(make(PrimitiveKind::kPlane, 100.0, Vec3(0, 0, 5)));
  s.primitives[0].albedo = 0.8;
  s.ambient = 0.25;
  s.light_dir = Vec3(0.0, 0.6, -0.8);
  const RenderedFrame fr = render(s, kCam, Pose{});
  const double expected = 0.8 * (0.25 + 0.75 * 0.8);
  for (double v : fr.image.channels[0].storage()) ASSERT_NEAR(v, expected, 1e-12);
}

TEST(Render, AllMissFrameIsLegal) {
  const RenderedFrame fr = render(single(make(PrimitiveKind::kSphere, 1.0, Vec3(0, 0, -10))), kCam, Pose{});
  EXPECT_EQ(fr.depth.valid_count(), 0u);
}

TEST(Render, RejectsInvalidScenes) {
  SceneSpec empty;
  EXPECT_THROW(render(empty, kCam, Pose{}), DomainError);
  SceneSpec bad = single(make(PrimitiveKind::kBox, -1.0, Vec3(0, 0, 5)));
  EXPECT_THROW(render(bad, kCam, Pose{}), DomainError);
}

TEST(Render, UnprojectReprojectRecoversPixelCenters) {
  Rng rng(5);
  const CameraIntrinsics k{83.0, 81.0, 30.2, 22.9, 64, 48};
  const SampledScene sc = sample_scene(rng, k);
  const RenderedFrame fr = render(sc.scene, k, Pose{});
  ASSERT_GT(fr.depth.valid_count(), 100u);
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      if (!fr.depth.valid(u, v)) continue;
      const Vec3 p = unproject_pixel(u, v, fr.depth.values(u, v), k);
      ASSERT_NEAR(k.fx * p.x() / p.z() + k.u0, u, 1e-6);
      ASSERT_NEAR(k.fy * p.y() / p.z() + k.v0, v, 1e-6);
    }
}

TEST(Render, AnalyticNormalsAgreeWithDepthFit) {
  double sum = 0.0;
  int n = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    Rng rng(seed);
    const CameraIntrinsics k{70.0, 70.0, 31.5, 23.5, 64, 48};
    ScenePrior prior;
    prior.distance_scales_with_focal = false;
    prior.min_distance = 6.0;
    prior.max_distance = 8.0;
    const SampledScene sc = sample_scene(rng, k, prior);
    const RenderedFrame fr = render(sc.scene, k, sc.pose);
    for (int v = 1; v + 1 < k.height; ++v)
      for (int u = 1; u + 1 < k.width; ++u) {
        const int id = fr.plane_id(u, v);
        if (id < 0) continue;
        bool interior = true;
        for (int dv = -1; dv <= 1; ++dv)
          for (int du = -1; du <= 1; ++du) interior &= fr.plane_id(u + du, v + dv) == id;
        Vec3 fit;
        if (!interior || !fit_normal(fr.depth, k, u, v, &fit)) continue;
        const double c = std::clamp(fit.dot(fr.normals(u, v)), -1.0, 1.0);
        sum += std::acos(c) * 180.0 / M_PI;
        ++n;
      }
  }
  ASSERT_GT(n, 200);
  EXPECT_LT(sum / n, 5.0);
}

TEST(Render, NormalsAreUnitAndFaceCamera) {
  Rng rng(11);
  const CameraIntrinsics k{1000.0, 1000.0, 31.5, 23.5, 64, 48};
  const SampledScene sc = sample_scene(rng, k);
  const RenderedFrame fr = render(sc.scene, k, sc.pose);
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      if (!fr.depth.valid(u, v)) {
        ASSERT_EQ(fr.plane_id(u, v), -1);
        continue;
      }
      const Vec3 ray((u - k.u0) / k.fx, (v - k.v0) / k.fy, 1.0);
      ASSERT_NEAR(fr.normals(u, v).norm(), 1.0, 1e-12);
      ASSERT_LE(fr.normals(u, v).dot(ray), 0.0);
      const int id = fr.plane_id(u, v);
      if (id >= 0) ASSERT_EQ(sc.scene.primitives[id].kind, PrimitiveKind::kPlane);
    }
}

// A fronto-parallel object twice as far under twice the focal length covers
// the same pixels.
TEST(Render, FocalDistanceAmbiguity) {
  const CameraIntrinsics k1{200.0, 200.0, 31.5, 23.5, 64, 48};
  CameraIntrinsics k2 = k1;
  k2.fx = k2.fy = 400.0;
  for (double d : {5.0, 9.0}) {
    for (double size : {0.5, 1.3}) {
      const Vec3 offset(0.21, -0.13, 0.0);
      const RenderedFrame a = render(single(make(PrimitiveKind::kPlane, size, offset + Vec3(0, 0, d))), k1, Pose{});
      const RenderedFrame b = render(single(make(PrimitiveKind::kPlane, size, offset + Vec3(0, 0, 2 * d))), k2, Pose{});
      EXPECT_GT(a.depth.valid_count(), 20u);
      EXPECT_EQ(a.depth.mask, b.depth.mask) << "d=" << d << " size=" << size;
    }
  }
}

TEST(Scene, SamplePriorIsRespected) {
  const ScenePrior prior;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const SampledScene sc = sample_scene(rng, {500.0, 500.0, 31.5, 23.5, 64, 48}, prior);
    ASSERT_NO_THROW(sc.scene.validate());
    ASSERT_NO_THROW(sc.pose.validate());
    const auto& prims = sc.scene.primitives;
    ASSERT_EQ(prims[0].kind, PrimitiveKind::kPlane);
    const int objects = static_cast<int>(prims.size()) - 1;
    EXPECT_GE(objects, prior.min_objects);
    EXPECT_LE(objects, prior.max_objects);
    for (std::size_t i = 1; i < prims.size(); ++i) {
      EXPECT_NE(prims[i].kind, PrimitiveKind::kPlane);
      bool known = false;
      for (std::size_t c = 0; c < prior.size_classes.size(); ++c)
        known |= prims[i].size == prior.size_classes[c] && prims[i].albedo == prior.class_albedo[c];
      EXPECT_TRUE(known);
    }
  }
}

TEST(Scene, PriorValidation) {
  ScenePrior p;
  p.min_objects = 5;
  p.max_objects = 2;
  EXPECT_THROW(p.validate(), DomainError);
  ScenePrior q;
  q.class_albedo.pop_back();
  EXPECT_THROW(q.validate(), DomainError);
}

TEST(Dataset, CountsAndGroups) {
  DatasetConfig cfg;
  cfg.focal_set = {500.0, 1000.0};
  cfg.scenes_per_focal = 3;
  const fs::path dir = temp_dir("counts");
  const Manifest m = make_dataset(cfg, dir);
  ASSERT_EQ(m.entries.size(), 6u);
  int g500 = 0, g1000 = 0;
  for (const auto& e : m.entries) {
    g500 += e.focal_group == 500.0;
    g1000 += e.focal_group == 1000.0;
    EXPECT_EQ(e.intrinsics.fx, e.focal_group);
    EXPECT_TRUE(fs::exists(m.root / e.image_path));
    EXPECT_TRUE(fs::exists(m.root / e.depth_path));
  }
  EXPECT_EQ(g500, 3);
  EXPECT_EQ(g1000, 3);
  const Manifest back = load_manifest(dir / "manifest.json");
  ASSERT_EQ(back.entries.size(), 6u);
  const LoadedFrame fr = load_frame(back, 4);
  const RenderedFrame direct = make_frame(cfg, back.entries[4].focal_group, 4);
  EXPECT_EQ(fr.intrinsics, direct.intrinsics);
  for (std::size_t i = 0; i < fr.depth.values.size(); ++i) {
    ASSERT_EQ(fr.depth.valid(i), direct.depth.valid(i));
    ASSERT_NEAR(fr.depth.values[i], direct.depth.values[i], 1e-6 * direct.depth.values[i]);
    ASSERT_EQ(fr.plane_id[i], direct.plane_id[i]);
  }
  fs::remove_all(dir);
}

TEST(Dataset, ByteIdenticalAcrossRunsAndThreadCounts) {
  DatasetConfig cfg;
  cfg.focal_set = {450.0, 900.0};
  cfg.scenes_per_focal = 4;
  cfg.seed = 42;
  const fs::path a = temp_dir("det_a"), b = temp_dir("det_b");
  make_dataset(cfg, a, 1);
  make_dataset(cfg, b, 3);
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    ASSERT_EQ(slurp(entry.path()), slurp(b / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 1u + 8u * 4u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Dataset, SplitsAreDistinctStreams) {
  DatasetConfig train;
  DatasetConfig test = train;
  test.split = "test";
  const RenderedFrame a = make_frame(train, 1000.0, 0);
  const RenderedFrame b = make_frame(test, 1000.0, 0);
  EXPECT_NE(a.depth.values, b.depth.values);
}

TEST(Dataset, DefaultPriorIsMostlyValid) {
  DatasetConfig cfg;
  double sum = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const RenderedFrame fr = make_frame(cfg, cfg.focal_set[i % cfg.focal_set.size()], i);
    sum += static_cast<double>(fr.depth.valid_count()) / static_cast<double>(fr.depth.values.size());
  }
  EXPECT_GT(sum / 20.0, 0.5);
}

TEST(Dataset, RejectsBadConfig) {
  DatasetConfig cfg;
  cfg.focal_set.clear();
  EXPECT_THROW(make_dataset(cfg, temp_dir("bad")), DomainError);
  DatasetConfig zero;
  zero.scenes_per_focal = 0;
  EXPECT_THROW(make_dataset(zero, temp_dir("bad")), DomainError);
}

TEST(Dataset, MissingManifestIsIoError) {
  EXPECT_THROW(load_manifest("/nonexistent/manifest.json"), IoError);
}

}  // namespace
}  // namespace metriccam
