// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "camera.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "rng.hpp"

namespace metriccam {

// Loss value and its gradient with respect to every predicted depth value.
// The gradient is zero wherever pred or gt is invalid.
struct LossResult {
  double value = 0.0;
  Grid<double> grad;
  bool degenerate = false;  // nothing usable was sampled; value and grad are 0
};

inline constexpr double kSilogLambda = 0.5;
inline constexpr int kRpnlPatches = 32;
inline constexpr double kRpnlEps = 1e-6;
inline constexpr double kRpnlMinSide = 0.125;
inline constexpr double kRpnlMaxSide = 0.5;
inline constexpr int kVnlTriplets = 100;
inline constexpr double kVnlMinSideRatio = 0.1;
inline constexpr double kVnlMinAngleDeg = 15.0;
inline constexpr int kPwnPairs = 100;

// Scale-invariant log loss. Throws DegenerateInputError below two jointly
// valid pixels.
LossResult silog(const DepthMap& pred, const DepthMap& gt, double lambda = kSilogLambda);

// Lower median: element (n - 1) / 2 of the sorted sample.
double lower_median(std::vector<double> v);

// Patch rects for random proposal normalization. Sides are drawn per axis in
// [0.125, 0.5] of the image side, positions uniform over valid placements.
std::vector<PixelRect> sample_patches(int width, int height, int count, Rng& rng);

// Random proposal normalization loss over the given patches. Each patch
// normalizes pred and gt as (d - median) / (mean |d - median| + eps) and
// contributes the mean absolute difference; the value averages patches.
LossResult rpnl_patches(const DepthMap& pred, const DepthMap& gt,
                        const std::vector<PixelRect>& patches, bool warn_degenerate = true);
LossResult rpnl(const DepthMap& pred, const DepthMap& gt, int count, Rng& rng,
                bool warn_degenerate = true);

using Triplet = std::array<std::size_t, 3>;  // flat pixel indices

// Candidate triplets drawn uniformly from jointly valid pixels.
std::vector<Triplet> sample_triplets(const DepthMap& pred, const DepthMap& gt, int count,
                                     Rng& rng);
// Shortest accepted triangle side: 0.1 x median gt depth, shrunk by the
// view's angular extent (image diagonal / focal) when that is below 1, so
// narrow-field crops still admit triangles.
double vnl_min_side(double median_depth, const CameraIntrinsics& k, int width, int height);

// True if the gt triangle passes the side and angle thresholds.
bool accept_triplet(const DepthMap& gt, const CameraIntrinsics& k, const Triplet& t,
                    double min_side);

// Virtual normal loss: mean L1 distance between the unit normals of pred and
// gt triangles. Throws DegenerateInputError when no triplet is accepted.
LossResult vnl_triplets(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
                        const std::vector<Triplet>& triplets);
LossResult vnl(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
               int n_triplets, Rng& rng);

// Unit normal of the least-squares plane a.X = 1 through the unprojected 3x3
// neighborhood of (x, y), oriented toward the camera. Returns false if any
// neighbor is invalid or the fit is singular.
bool fit_normal(const DepthMap& depth, const CameraIntrinsics& k, int x, int y, Vec3* normal);

// Pixel pairs sharing a plane id, both with a full 3x3 interior.
std::vector<std::array<std::size_t, 2>> sample_plane_pairs(const DepthMap& pred,
                                                           const Grid<int>& plane_id,
                                                           int count, Rng& rng);

// Pairwise normal loss: mean over pairs and both members of 1 - n_pred . n_gt.
// Returns 0 (degenerate) when the frame has no plane interior.
LossResult pwn_pairs(const DepthMap& pred, const Grid<Vec3>& gt_normals,
                     const CameraIntrinsics& k,
                     const std::vector<std::array<std::size_t, 2>>& pairs,
                     bool warn_degenerate = true);
LossResult pwn(const DepthMap& pred, const Grid<Vec3>& gt_normals, const Grid<int>& plane_id,
               const CameraIntrinsics& k, int n_pairs, Rng& rng, bool warn_degenerate = true);

struct LossWeights {
  double pwn = 1.0;
  double vnl = 1.0;
  double silog = 1.0;
  double rpnl = 1.0;
};

struct LossOptions {
  double silog_lambda = kSilogLambda;
  int rpnl_patches = kRpnlPatches;
  int vnl_triplets = kVnlTriplets;
  int pwn_pairs = kPwnPairs;
};

// Per-frame auxiliaries for the geometric terms.
struct FrameAux {
  CameraIntrinsics intrinsics;
  const Grid<Vec3>* normals = nullptr;
  const Grid<int>* plane_id = nullptr;
  bool metric_loss = true;  // false disables silog for this frame
};

struct TotalLoss {
  LossResult total;
  double pwn = 0.0;
  double vnl = 0.0;
  double silog = 0.0;
  double rpnl = 0.0;
};

// Weighted sum of the four terms. Terms with zero weight are not evaluated.
// Sub-streams for patches, triplets and pairs are drawn from `rng` in that
// order.
TotalLoss total_loss(const DepthMap& pred, const DepthMap& gt, const FrameAux& aux,
                     const LossWeights& weights, Rng& rng, const LossOptions& opts = {});

}  // namespace metriccam
