// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>

#include "camera.hpp"
#include "geometry.hpp"
#include "grid.hpp"

namespace metriccam::io {

namespace fs = std::filesystem;

// PFM, little-endian (scale -1.0), rows stored bottom to top. Depth uses the
// single-channel "Pf" form with 0.0 marking invalid pixels.
void write_pfm(const fs::path& path, const DepthMap& depth);
DepthMap read_pfm_depth(const fs::path& path);

// Raw float planes; 1 channel ("Pf") or 3 channels ("PF").
void write_pfm(const fs::path& path, const std::vector<Grid<double>>& channels);
std::vector<Grid<double>> read_pfm(const fs::path& path);

// Binary PNM, 8 bits per sample: P5 for one channel, P6 for three.
void write_ppm(const fs::path& path, const ImageMap& image);
ImageMap read_ppm(const fs::path& path);

// ASCII PLY with float x y z vertex properties.
void write_ply(const fs::path& path, const PointCloud& cloud);
PointCloud read_ply(const fs::path& path);

nlohmann::json to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);
// Optional physical metadata in an intrinsics object.
std::optional<PhysicalCameraMeta> physical_meta_from_json(const nlohmann::json& j);

// {"R": 9 floats row-major, "t": 3 floats}
nlohmann::json to_json(const RigidTransform& pose);
RigidTransform pose_from_json(const nlohmann::json& j);

nlohmann::json read_json(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace metriccam::io
