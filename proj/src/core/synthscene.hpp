// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "camera.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "rng.hpp"

namespace metriccam {

enum class PrimitiveKind { kPlane, kBox, kSphere };

// `pose` maps primitive-local coordinates to world. `size` is the extent:
// side of the square plane (local z is its normal), edge of the cube,
// diameter of the sphere.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kPlane;
  Pose pose;
  double size = 1.0;
  double albedo = 0.5;
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  Vec3 light_dir = Vec3(0.0, -1.0, 0.0);  // unit vector toward the light, world frame
  double ambient = 0.3;

  void validate() const;
};

struct RenderedFrame {
  ImageMap image;
  DepthMap depth;              // z-depth, meters
  Grid<Vec3> normals;          // unit, camera frame, facing the camera; zero on misses
  Grid<int> plane_id;          // primitive index on plane pixels, -1 elsewhere
  CameraIntrinsics intrinsics;
  Pose pose;                   // camera-to-world
};

struct RayHit {
  double t = 0.0;  // coefficient on the z = 1 camera ray, i.e. z-depth
  Vec3 normal_world = Vec3::Zero();
  int primitive = -1;
};

// Nearest positive intersection along origin + t * dir.
bool intersect(const Primitive& p, const Vec3& origin, const Vec3& dir, double* t,
               Vec3* normal);
bool cast_ray(const SceneSpec& scene, const Vec3& origin, const Vec3& dir, RayHit* hit);

RenderedFrame render(const SceneSpec& scene, const CameraIntrinsics& k, const Pose& pose,
                     int channels = 1);

// Scene prior used by the dataset generator: a square ground tile seen by a
// camera pitched down toward it, with boxes and spheres resting on the tile.
// Object sizes come from discrete classes, each with its own albedo. Camera
// distance to the tile is drawn at `reference_focal` and scaled by f / that
// focal, so every focal group sees the same pixel footprints.
struct ScenePrior {
  int min_objects = 2;
  int max_objects = 6;
  std::vector<double> size_classes = {0.5, 1.0, 2.0};
  std::vector<double> class_albedo = {0.35, 0.6, 0.9};
  double sphere_probability = 0.5;
  double ground_size = 4.0;
  double ground_albedo = 0.5;
  double min_distance = 25.0;
  double max_distance = 35.0;
  double reference_focal = 1000.0;
  bool distance_scales_with_focal = true;
  double min_pitch_deg = 60.0;
  double max_pitch_deg = 90.0;
  double ambient = 0.3;
  double light_jitter = 0.1;

  void validate() const;
};

struct SampledScene {
  SceneSpec scene;
  Pose pose;
};

// Samples one scene framed for a camera with the given intrinsics.
SampledScene sample_scene(Rng& rng, const CameraIntrinsics& k, const ScenePrior& prior = {});

struct DatasetConfig {
  std::vector<double> focal_set = {400.0, 700.0, 1000.0, 1300.0};
  int scenes_per_focal = 3;
  int base_width = 64;
  int base_height = 48;
  std::uint64_t seed = 0;
  int channels = 1;
  ScenePrior prior;
  std::string split = "train";
};

struct ManifestEntry {
  std::string image_path;
  std::string depth_path;
  std::string normals_path;
  std::string plane_path;
  CameraIntrinsics intrinsics;
  Pose pose;
  double focal_group = 0.0;
  bool metric_loss = true;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path root;  // paths in entries are relative to this
};

// Intrinsics for one focal group: base resolution, centered principal point.
CameraIntrinsics group_intrinsics(const DatasetConfig& cfg, double focal);

// Renders one frame of the dataset. Each frame's RNG stream derives from
// (seed, frame_index) only.
RenderedFrame make_frame(const DatasetConfig& cfg, double focal, std::size_t frame_index,
                         Pose* pose_out = nullptr);

// Renders every frame, writes <out>/frames/*.{ppm,pfm} and <out>/manifest.json.
Manifest make_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir,
                      int threads = 1);

nlohmann::json to_json(const Manifest& m);
Manifest load_manifest(const std::filesystem::path& path);

// A manifest frame decoded into memory.
struct LoadedFrame {
  ImageMap image;
  DepthMap depth;
  Grid<Vec3> normals;
  Grid<int> plane_id;
  CameraIntrinsics intrinsics;
  Pose pose;
  double focal_group = 0.0;
  bool metric_loss = true;
};

LoadedFrame load_frame(const Manifest& m, std::size_t index);

}  // namespace metriccam
