// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "grid.hpp"

namespace metriccam {

struct DepthMetrics {
  double absrel = 0.0;
  double rms = 0.0;  // meters
  double rms_log = 0.0;
  double log10 = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t valid_pixels = 0;
};

// GT pixels outside (kEvalMinDepth, kEvalMaxDepth) are excluded.
inline constexpr double kEvalMinDepth = 1e-3;
inline constexpr double kEvalMaxDepth = 300.0;

// Standard metrics over jointly valid pixels. delta_i uses the symmetric
// max(p/g, g/p) < 1.25^i form. Throws DegenerateInputError with no pixels.
DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt);

struct ScaleShift {
  double scale = 1.0;
  double shift = 0.0;
  DepthMap aligned;
  // Pixels where scale * pred + shift <= 0; they are masked out of `aligned`.
  std::size_t nonpositive = 0;
};

// Least-squares (a, b) minimizing sum (a p + b - g)^2 over jointly valid
// pixels, from the 2x2 normal equations. Throws SingularError for constant
// pred, DegenerateInputError for fewer than 2 pixels.
ScaleShift align_scale_shift(const DepthMap& pred, const DepthMap& gt);

}  // namespace metriccam
