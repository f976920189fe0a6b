// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include "evalmetrics.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace metriccam {
namespace {

void check_shapes(const DepthMap& a, const DepthMap& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height())
    throw DomainError(std::string(what) + ": prediction and ground truth differ in size");
}

bool usable_gt(double g) { return g > kEvalMinDepth && g < kEvalMaxDepth; }

}  // namespace

DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt) {
  check_shapes(pred, gt, "depth_metrics");
  DepthMetrics m;
  double sum_abs = 0, sum_sq = 0, sum_log_sq = 0, sum_log10 = 0;
  std::size_t d1 = 0, d2 = 0, d3 = 0, n = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (!gt.mask[i] || !pred.mask[i]) continue;
    const double g = gt.values[i];
    const double p = pred.values[i];
    if (!usable_gt(g) || !(p > 0.0) || !std::isfinite(p)) continue;
    ++n;
    const double diff = p - g;
    sum_abs += std::abs(diff) / g;
    sum_sq += diff * diff;
    const double dl = std::log(p) - std::log(g);
    sum_log_sq += dl * dl;
    sum_log10 += std::abs(std::log10(p) - std::log10(g));
    const double ratio = std::max(p / g, g / p);
    d1 += ratio < 1.25;
    d2 += ratio < 1.25 * 1.25;
    d3 += ratio < 1.25 * 1.25 * 1.25;
  }
  if (n == 0) throw DegenerateInputError("depth_metrics: no jointly valid pixels");
  const double inv = 1.0 / static_cast<double>(n);
  m.absrel = sum_abs * inv;
  m.rms = std::sqrt(sum_sq * inv);
  m.rms_log = std::sqrt(sum_log_sq * inv);
  m.log10 = sum_log10 * inv;
  m.delta1 = d1 * inv;
  m.delta2 = d2 * inv;
  m.delta3 = d3 * inv;
  m.valid_pixels = n;
  return m;
}

ScaleShift align_scale_shift(const DepthMap& pred, const DepthMap& gt) {
  check_shapes(pred, gt, "align_scale_shift");
  // Centered accumulation keeps the 2x2 system well conditioned.
  double n = 0, mp = 0, mg = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (!gt.mask[i] || !pred.mask[i]) continue;
    n += 1;
    mp += pred.values[i];
    mg += gt.values[i];
  }
  if (n < 2) throw DegenerateInputError("align_scale_shift: fewer than 2 valid pixels");
  mp /= n;
  mg /= n;
  double spp = 0, spg = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (!gt.mask[i] || !pred.mask[i]) continue;
    const double dp = pred.values[i] - mp;
    spp += dp * dp;
    spg += dp * (gt.values[i] - mg);
  }
  if (!(spp > 1e-300) || spp <= 1e-24 * n * std::max(1.0, mp * mp))
    throw SingularError("align_scale_shift: prediction is constant");
  ScaleShift out;
  out.scale = spg / spp;
  out.shift = mg - out.scale * mp;
  out.aligned = DepthMap(pred.width(), pred.height());
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (!pred.mask[i]) continue;
    const double v = out.scale * pred.values[i] + out.shift;
    if (v > 0.0) {
      out.aligned.values[i] = v;
      out.aligned.mask[i] = 1;
    } else {
      ++out.nonpositive;
    }
  }
  return out;
}

}  // namespace metriccam
