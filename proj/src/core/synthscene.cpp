// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthscene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "error.hpp"
#include "io.hpp"

namespace metriccam {

void SceneSpec::validate() const {
  if (primitives.empty()) throw DomainError("scene: needs at least one primitive");
  for (const auto& p : primitives) {
    if (!(p.size > 0.0) || !std::isfinite(p.size)) throw DomainError("scene: sizes must be > 0");
    if (!(p.albedo >= 0.0 && p.albedo <= 1.0)) throw DomainError("scene: albedo outside [0,1]");
    p.pose.validate(1e-9);
  }
  if (std::abs(light_dir.norm() - 1.0) > 1e-9) throw DomainError("scene: light_dir not unit");
  if (!(ambient >= 0.0 && ambient <= 1.0)) throw DomainError("scene: ambient outside [0,1]");
}

bool intersect(const Primitive& p, const Vec3& origin, const Vec3& dir, double* t_out,
               Vec3* normal) {
  const Mat3& r = p.pose.rotation;
  const Vec3& c = p.pose.translation;
  switch (p.kind) {
    case PrimitiveKind::kPlane: {
      const Vec3 n = r.col(2);
      const double denom = n.dot(dir);
      if (std::abs(denom) < 1e-15) return false;
      const double t = n.dot(c - origin) / denom;
      if (!(t > 0.0)) return false;
      const Vec3 rel = origin + t * dir - c;
      const double half = 0.5 * p.size;
      if (std::abs(rel.dot(r.col(0))) > half || std::abs(rel.dot(r.col(1))) > half) return false;
      *t_out = t;
      *normal = n;
      return true;
    }
    case PrimitiveKind::kSphere: {
      const double radius = 0.5 * p.size;
      const Vec3 oc = origin - c;
      const double a = dir.squaredNorm();
      const double b = dir.dot(oc);
      const double cc = oc.squaredNorm() - radius * radius;
      const double disc = b * b - a * cc;
      if (disc < 0.0) return false;
      const double sq = std::sqrt(disc);
      double t = (-b - sq) / a;
      if (!(t > 0.0)) t = (-b + sq) / a;
      if (!(t > 0.0)) return false;
      *t_out = t;
      *normal = (origin + t * dir - c) / radius;
      return true;
    }
    case PrimitiveKind::kBox: {
      const Vec3 ol = r.transpose() * (origin - c);
      const Vec3 dl = r.transpose() * dir;
      const double half = 0.5 * p.size;
      double tn = -std::numeric_limits<double>::infinity();
      double tf = std::numeric_limits<double>::infinity();
      int axis_n = -1, axis_f = -1;
      for (int a = 0; a < 3; ++a) {
        if (std::abs(dl(a)) < 1e-300) {
          if (std::abs(ol(a)) > half) return false;
          continue;
        }
        double t1 = (-half - ol(a)) / dl(a);
        double t2 = (half - ol(a)) / dl(a);
        if (t1 > t2) std::swap(t1, t2);
        if (t1 > tn) {
          tn = t1;
          axis_n = a;
        }
        if (t2 < tf) {
          tf = t2;
          axis_f = a;
        }
      }
      if (tn > tf || !(tf > 0.0)) return false;
      const bool entering = tn > 0.0;
      const double t = entering ? tn : tf;
      const int axis = entering ? axis_n : axis_f;
      if (axis < 0) return false;
      Vec3 nl = Vec3::Zero();
      nl(axis) = (ol(axis) + t * dl(axis)) > 0.0 ? 1.0 : -1.0;
      *t_out = t;
      *normal = r * nl;
      return true;
    }
  }
  return false;
}

bool cast_ray(const SceneSpec& scene, const Vec3& origin, const Vec3& dir, RayHit* hit) {
  bool found = false;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    double t;
    Vec3 n;
    if (intersect(scene.primitives[i], origin, dir, &t, &n) && (!found || t < hit->t)) {
      found = true;
      hit->t = t;
      hit->normal_world = n;
      hit->primitive = static_cast<int>(i);
    }
  }
  return found;
}

RenderedFrame render(const SceneSpec& scene, const CameraIntrinsics& k, const Pose& pose,
                     int channels) {
  scene.validate();
  k.validate();
  pose.validate(1e-9);
  if (channels != 1 && channels != 3) throw DomainError("render: channels must be 1 or 3");
  RenderedFrame f;
  f.intrinsics = k;
  f.pose = pose;
  f.image = ImageMap(k.width, k.height, channels);
  f.depth = DepthMap(k.width, k.height);
  f.normals = Grid<Vec3>(k.width, k.height, Vec3::Zero());
  f.plane_id = Grid<int>(k.width, k.height, -1);
  const Vec3 origin = pose.translation;
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 ray_cam((u - k.u0) / k.fx, (v - k.v0) / k.fy, 1.0);
      const Vec3 dir = pose.rotation * ray_cam;
      RayHit hit;
      if (!cast_ray(scene, origin, dir, &hit)) continue;
      Vec3 n = hit.normal_world;
      if (n.dot(dir) > 0.0) n = -n;
      const Primitive& prim = scene.primitives[hit.primitive];
      const double shade =
          prim.albedo * (scene.ambient + (1.0 - scene.ambient) * std::max(0.0, n.dot(scene.light_dir)));
      for (int c = 0; c < channels; ++c) f.image.channels[c](u, v) = shade;
      f.depth.set(u, v, hit.t);
      f.normals(u, v) = pose.rotation.transpose() * n;
      if (prim.kind == PrimitiveKind::kPlane) f.plane_id(u, v) = hit.primitive;
    }
  }
  return f;
}

void ScenePrior::validate() const {
  if (min_objects < 0 || max_objects < min_objects) throw DomainError("prior: bad object count range");
  if (size_classes.empty() || size_classes.size() != class_albedo.size())
    throw DomainError("prior: size_classes and class_albedo must be non-empty and equal length");
  for (double s : size_classes)
    if (!(s > 0.0)) throw DomainError("prior: size classes must be > 0");
  if (!(ground_size > 0.0)) throw DomainError("prior: ground_size must be > 0");
  if (!(min_distance > 0.0) || max_distance < min_distance)
    throw DomainError("prior: bad distance range");
  if (!(reference_focal > 0.0)) throw DomainError("prior: reference_focal must be > 0");
  if (sphere_probability < 0.0 || sphere_probability > 1.0)
    throw DomainError("prior: sphere_probability outside [0,1]");
}

namespace {

constexpr double kPi = 3.14159265358979323846;

Mat3 rot_x(double a) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}

Mat3 rot_y(double a) {
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}

std::string group_tag(double focal) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "f%05.0f", focal);
  return buf;
}

}  // namespace

// World frame: y points down, the ground tile is horizontal. The camera sits
// at the origin, pitched down so its optical axis meets the tile center.
SampledScene sample_scene(Rng& rng, const CameraIntrinsics& k, const ScenePrior& prior) {
  prior.validate();
  const double f = effective_focal(k);
  const double dist_scale =
      prior.distance_scales_with_focal ? f / prior.reference_focal : 1.0;
  const double d = std::exp(rng.uniform(std::log(prior.min_distance), std::log(prior.max_distance))) *
                   dist_scale;
  const double pitch = rng.uniform(prior.min_pitch_deg, prior.max_pitch_deg) * kPi / 180.0;

  SampledScene out;
  out.pose.rotation = rot_x(-pitch);
  out.pose.translation = Vec3::Zero();
  const Vec3 anchor = out.pose.rotation * Vec3(0.0, 0.0, d);
  const Vec3 right(1.0, 0.0, 0.0);
  const Vec3 forward(0.0, 0.0, 1.0);
  const Vec3 up(0.0, -1.0, 0.0);

  Primitive ground;
  ground.kind = PrimitiveKind::kPlane;
  ground.pose.rotation.col(0) = right;
  ground.pose.rotation.col(1) = forward;
  ground.pose.rotation.col(2) = up;
  ground.pose.translation = anchor;
  ground.size = prior.ground_size;
  ground.albedo = prior.ground_albedo;
  out.scene.primitives.push_back(ground);

  const int n = rng.uniform_int(prior.min_objects, prior.max_objects);
  // Keep objects inside the tile and, where possible, inside the view.
  const double half = 0.5 * prior.ground_size - 0.3;
  const double half_x = std::min(half, 0.5 * k.width * d / k.fx);
  const double half_z = std::min(half, 0.5 * k.height * d / (k.fy * std::sin(pitch)));
  for (int i = 0; i < n; ++i) {
    const std::size_t cls = rng.below(prior.size_classes.size());
    const double size = prior.size_classes[cls];
    const double ox = rng.uniform(-half_x, half_x);
    const double oz = rng.uniform(-half_z, half_z);
    Primitive p;
    p.size = size;
    p.albedo = prior.class_albedo[cls];
    p.pose.translation = anchor + ox * right + oz * forward + 0.5 * size * up;
    if (rng.bernoulli(prior.sphere_probability)) {
      p.kind = PrimitiveKind::kSphere;
    } else {
      p.kind = PrimitiveKind::kBox;
      p.pose.rotation = rot_y(rng.uniform(0.0, 0.5 * kPi));
    }
    out.scene.primitives.push_back(p);
  }

  Vec3 light(0.3, -1.0, -0.4);
  light.normalize();
  for (int a = 0; a < 3; ++a) light(a) += prior.light_jitter * rng.normal();
  out.scene.light_dir = light.normalized();
  out.scene.ambient = prior.ambient;
  return out;
}

CameraIntrinsics group_intrinsics(const DatasetConfig& cfg, double focal) {
  if (!(focal > 0.0) || !std::isfinite(focal)) throw DomainError("dataset: focal must be > 0");
  if (cfg.base_width < 1 || cfg.base_height < 1) throw DomainError("dataset: base resolution must be >= 1");
  CameraIntrinsics k;
  k.fx = k.fy = focal;
  k.width = cfg.base_width;
  k.height = cfg.base_height;
  k.u0 = 0.5 * (k.width - 1);
  k.v0 = 0.5 * (k.height - 1);
  return k;
}

RenderedFrame make_frame(const DatasetConfig& cfg, double focal, std::size_t frame_index,
                         Pose* pose_out) {
  const CameraIntrinsics k = group_intrinsics(cfg, focal);
  Rng rng = Rng(cfg.seed).substream("scene:" + cfg.split, frame_index);
  SampledScene s = sample_scene(rng, k, cfg.prior);
  if (pose_out) *pose_out = s.pose;
  return render(s.scene, k, s.pose, cfg.channels);
}

namespace {

void validate_config(const DatasetConfig& cfg) {
  if (cfg.focal_set.empty()) throw DomainError("dataset: focal_set is empty");
  if (cfg.scenes_per_focal < 1) throw DomainError("dataset: scenes_per_focal must be >= 1");
  if (cfg.channels != 1 && cfg.channels != 3) throw DomainError("dataset: channels must be 1 or 3");
  for (std::size_t i = 0; i < cfg.focal_set.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (group_tag(cfg.focal_set[i]) == group_tag(cfg.focal_set[j]))
        throw DomainError("dataset: duplicate focal " + std::to_string(cfg.focal_set[i]));
  cfg.prior.validate();
}

Grid<double> plane_to_grid(const Grid<int>& ids) {
  Grid<double> g(ids.width(), ids.height());
  for (std::size_t i = 0; i < ids.size(); ++i) g[i] = ids[i];
  return g;
}

}  // namespace

Manifest make_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir, int threads) {
  validate_config(cfg);
  namespace fs = std::filesystem;
  const fs::path frames_dir = out_dir / "frames";
  std::error_code ec;
  fs::create_directories(frames_dir, ec);
  if (ec) throw IoError("cannot create " + frames_dir.string() + ": " + ec.message());

  const std::size_t per = static_cast<std::size_t>(cfg.scenes_per_focal);
  const std::size_t total = cfg.focal_set.size() * per;
  Manifest m;
  m.root = out_dir;
  m.entries.resize(total);

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  std::size_t first_error_index = total;

  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= total) return;
      try {
        const double focal = cfg.focal_set[idx / per];
        const std::size_t local = idx % per;
        char stem[64];
        std::snprintf(stem, sizeof(stem), "%s_%04zu", group_tag(focal).c_str(), local);
        const std::string base = std::string("frames/") + stem;
        RenderedFrame fr = make_frame(cfg, focal, idx);
        ManifestEntry& e = m.entries[idx];
        e.image_path = base + ".ppm";
        e.depth_path = base + "_depth.pfm";
        e.normals_path = base + "_normals.pfm";
        e.plane_path = base + "_plane.pfm";
        e.intrinsics = fr.intrinsics;
        e.pose = fr.pose;
        e.focal_group = focal;
        io::write_ppm(out_dir / e.image_path, fr.image);
        io::write_pfm(out_dir / e.depth_path, fr.depth);
        std::vector<Grid<double>> normals(3, Grid<double>(fr.normals.width(), fr.normals.height()));
        for (std::size_t i = 0; i < fr.normals.size(); ++i)
          for (int c = 0; c < 3; ++c) normals[c][i] = fr.normals[i](c);
        io::write_pfm(out_dir / e.normals_path, normals);
        io::write_pfm(out_dir / e.plane_path, std::vector<Grid<double>>{plane_to_grid(fr.plane_id)});
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (idx < first_error_index) {
          first_error_index = idx;
          first_error = std::current_exception();
        }
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(total)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  io::write_text(out_dir / "manifest.json", to_json(m).dump(2) + "\n");
  return m;
}

nlohmann::json to_json(const Manifest& m) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& e : m.entries) {
    nlohmann::json j;
    j["image_path"] = e.image_path;
    j["depth_path"] = e.depth_path;
    if (!e.normals_path.empty()) j["normals_path"] = e.normals_path;
    if (!e.plane_path.empty()) j["plane_path"] = e.plane_path;
    j["intrinsics"] = io::to_json(e.intrinsics);
    j["pose"] = io::to_json(e.pose);
    j["focal_group"] = e.focal_group;
    j["metric_loss"] = e.metric_loss;
    frames.push_back(std::move(j));
  }
  return frames;
}

Manifest load_manifest(const std::filesystem::path& path) {
  const nlohmann::json doc = io::read_json(path);
  const nlohmann::json* frames = &doc;
  if (doc.is_object()) {
    if (!doc.contains("frames")) throw ParseError(path.string() + ": manifest has no frames");
    frames = &doc.at("frames");
  }
  if (!frames->is_array()) throw ParseError(path.string() + ": manifest frames must be a list");
  Manifest m;
  m.root = path.parent_path();
  try {
    for (const auto& j : *frames) {
      ManifestEntry e;
      e.image_path = j.at("image_path").get<std::string>();
      e.depth_path = j.at("depth_path").get<std::string>();
      e.normals_path = j.value("normals_path", std::string());
      e.plane_path = j.value("plane_path", std::string());
      e.intrinsics = io::intrinsics_from_json(j.at("intrinsics"));
      if (j.contains("pose")) e.pose = io::pose_from_json(j.at("pose"));
      e.focal_group = j.contains("focal_group") ? j.at("focal_group").get<double>()
                                                : effective_focal(e.intrinsics);
      e.metric_loss = j.value("metric_loss", true);
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path.string() + ": " + ex.what());
  }
  if (m.entries.empty()) throw ParseError(path.string() + ": manifest is empty");
  return m;
}

LoadedFrame load_frame(const Manifest& m, std::size_t index) {
  if (index >= m.entries.size()) throw DomainError("load_frame: index out of range");
  const ManifestEntry& e = m.entries[index];
  LoadedFrame f;
  f.intrinsics = e.intrinsics;
  f.pose = e.pose;
  f.focal_group = e.focal_group;
  f.metric_loss = e.metric_loss;
  f.image = io::read_ppm(m.root / e.image_path);
  f.depth = io::read_pfm_depth(m.root / e.depth_path);
  const int w = e.intrinsics.width, h = e.intrinsics.height;
  if (!f.depth.values.same_shape(w, h) || f.image.width() != w || f.image.height() != h)
    throw ParseError(e.image_path + ": frame size does not match its intrinsics");
  f.normals = Grid<Vec3>(w, h, Vec3::Zero());
  f.plane_id = Grid<int>(w, h, -1);
  if (!e.normals_path.empty()) {
    auto n = io::read_pfm(m.root / e.normals_path);
    if (n.size() != 3 || !n[0].same_shape(w, h)) throw ParseError(e.normals_path + ": bad normals map");
    for (std::size_t i = 0; i < f.normals.size(); ++i) f.normals[i] = Vec3(n[0][i], n[1][i], n[2][i]);
  }
  if (!e.plane_path.empty()) {
    auto p = io::read_pfm(m.root / e.plane_path);
    if (p.size() != 1 || !p[0].same_shape(w, h)) throw ParseError(e.plane_path + ": bad plane map");
    for (std::size_t i = 0; i < f.plane_id.size(); ++i) f.plane_id[i] = static_cast<int>(std::lround(p[0][i]));
  }
  return f;
}

}  // namespace metriccam
