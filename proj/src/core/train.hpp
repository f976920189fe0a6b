// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "camera.hpp"
#include "evalmetrics.hpp"
#include "losses.hpp"
#include "model.hpp"
#include "synthscene.hpp"

namespace metriccam {

enum class Variant { kCstmLabel, kCstmImage, kNone, kCamConvs };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);
int input_channels(Variant v, int image_channels);

struct TrainConfig {
  Variant variant = Variant::kCstmLabel;
  double canonical_focal = kDefaultCanonicalFocal;
  int batch_size = 8;
  int iters = 3000;
  double lr = 3e-4;
  std::uint64_t seed = 0;
  LossWeights weights;
  LossOptions loss;
  int crop_width = 48;
  int crop_height = 36;
  double flip_probability = 0.5;
  // Start the output head at the median training target instead of ln 2.
  bool init_output_level = true;
  int threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  std::string hash() const;  // FNV-1a of the canonical JSON dump, hex
};

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

// Batch means of the loss terms at one iteration.
struct HistoryRow {
  long iter = 0;
  double pwn = 0.0;
  double vnl = 0.0;
  double silog = 0.0;
  double rpnl = 0.0;
  double total = 0.0;
  int samples = 0;  // samples that contributed (degenerate crops are skipped)
};

struct TrainResult {
  TinyDepthNet net;
  std::vector<HistoryRow> history;
  std::map<double, long> group_draws;  // frames drawn per focal group
};

// One frame mapped into the variant's training space.
struct TrainingSample {
  ImageMap image;
  DepthMap depth;
  Grid<Vec3> normals;
  Grid<int> plane_id;
  CameraIntrinsics intrinsics;
  bool metric_loss = true;
};

TrainingSample prepare_sample(const LoadedFrame& frame, Variant variant, double canonical_focal);

// Random crop to at most crop_width x crop_height, optional horizontal flip.
TrainingSample crop_and_flip(const TrainingSample& s, const PixelRect& rect, bool flip);

// Network input: image channels, plus the camera encoding for CamConvs.
std::vector<Grid<double>> network_input(const ImageMap& image, const CameraIntrinsics& k,
                                        Variant variant);

using ProgressFn = std::function<void(const HistoryRow&)>;

// Throws DivergenceError on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const Manifest& manifest, const ProgressFn& progress = {});

DepthMap predict_metric(const TinyDepthNet& net, const ImageMap& image, const CameraIntrinsics& k,
                        Variant variant, double canonical_focal = kDefaultCanonicalFocal);

struct GroupEval {
  double focal = 0.0;
  std::size_t frames = 0;
  DepthMetrics metrics;  // mean of per-frame metrics
};

struct EvalReport {
  std::vector<GroupEval> groups;  // ascending focal
  double mean_absrel = 0.0;       // mean over groups
};

EvalReport evaluate(const TinyDepthNet& net, const Manifest& manifest, Variant variant,
                    double canonical_focal);

nlohmann::json to_json(const DepthMetrics& m);
nlohmann::json to_json(const EvalReport& r);

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& history);

struct AblationRow {
  Variant variant;
  EvalReport report;
  std::vector<HistoryRow> history;
  TinyDepthNet net;
};

// Trains every variant with the same config and seed and evaluates each on
// the held-out manifest.
std::vector<AblationRow> ablate(const TrainConfig& base, const std::vector<Variant>& variants,
                                const Manifest& train_set, const Manifest& test_set,
                                const ProgressFn& progress = {});

}  // namespace metriccam
