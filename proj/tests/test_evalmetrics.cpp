// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "error.hpp"
#include "evalmetrics.hpp"
#include "rng.hpp"

namespace metriccam {
namespace {

DepthMap random_gt(int w, int h, std::uint64_t seed, double hole = 0.1) {
  Rng rng(seed);
  DepthMap d(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (!rng.bernoulli(hole)) d.set(x, y, rng.uniform(0.5, 50.0));
  return d;
}

DepthMap scaled(const DepthMap& d, double a, double b = 0.0) {
  DepthMap out = d;
  for (std::size_t i = 0; i < d.values.size(); ++i)
    if (d.valid(i)) out.values[i] = a * d.values[i] + b;
  return out;
}

TEST(DepthMetrics, Identity) {
  const DepthMap gt = random_gt(20, 15, 1);
  const DepthMetrics m = depth_metrics(gt, gt);
  EXPECT_EQ(m.absrel, 0.0);
  EXPECT_EQ(m.rms, 0.0);
  EXPECT_EQ(m.rms_log, 0.0);
  EXPECT_EQ(m.log10, 0.0);
  EXPECT_EQ(m.delta1, 1.0);
  EXPECT_EQ(m.delta2, 1.0);
  EXPECT_EQ(m.delta3, 1.0);
  EXPECT_EQ(m.valid_pixels, gt.valid_count());
}

TEST(DepthMetrics, UniformTenPercentOver) {
  const DepthMap gt = random_gt(20, 15, 2);
  const DepthMetrics m = depth_metrics(scaled(gt, 1.1), gt);
  EXPECT_NEAR(m.absrel, 0.1, 1e-12);
  EXPECT_EQ(m.delta1, 1.0);
  EXPECT_NEAR(m.rms_log, std::log(1.1), 1e-12);
  EXPECT_NEAR(m.log10, std::log10(1.1), 1e-12);
}

TEST(DepthMetrics, ThirtyPercentFailsFirstThreshold) {
  const DepthMap gt = random_gt(20, 15, 3);
  const DepthMetrics m = depth_metrics(scaled(gt, 1.3), gt);
  EXPECT_EQ(m.delta1, 0.0);
  EXPECT_EQ(m.delta2, 1.0);
  EXPECT_EQ(m.delta3, 1.0);
}

TEST(DepthMetrics, ScalarOracle) {
  const DepthMap gt = random_gt(13, 9, 4);
  const DepthMap pred = random_gt(13, 9, 5);
  double absrel = 0, sq = 0, sql = 0, l10 = 0, d1 = 0, d2 = 0, d3 = 0;
  int n = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (!gt.valid(i) || !pred.valid(i)) continue;
    const double p = pred.values[i], g = gt.values[i];
    absrel += std::abs(p - g) / g;
    sq += (p - g) * (p - g);
    sql += (std::log(p) - std::log(g)) * (std::log(p) - std::log(g));
    l10 += std::abs(std::log10(p) - std::log10(g));
    const double r = std::max(p / g, g / p);
    d1 += r < 1.25;
    d2 += r < 1.25 * 1.25;
    d3 += r < 1.25 * 1.25 * 1.25;
    ++n;
  }
  const DepthMetrics m = depth_metrics(pred, gt);
  ASSERT_EQ(m.valid_pixels, static_cast<std::size_t>(n));
  EXPECT_NEAR(m.absrel, absrel / n, 1e-12);
  EXPECT_NEAR(m.rms, std::sqrt(sq / n), 1e-12);
  EXPECT_NEAR(m.rms_log, std::sqrt(sql / n), 1e-12);
  EXPECT_NEAR(m.log10, l10 / n, 1e-12);
  EXPECT_NEAR(m.delta1, d1 / n, 1e-15);
  EXPECT_NEAR(m.delta2, d2 / n, 1e-15);
  EXPECT_NEAR(m.delta3, d3 / n, 1e-15);
  EXPECT_LE(m.delta1, m.delta2);
  EXPECT_LE(m.delta2, m.delta3);
}

TEST(DepthMetrics, DeltaIsSymmetric) {
  const DepthMap a = random_gt(16, 12, 6, 0.0);
  const DepthMap b = random_gt(16, 12, 7, 0.0);
  const DepthMetrics ab = depth_metrics(a, b), ba = depth_metrics(b, a);
  EXPECT_EQ(ab.delta1, ba.delta1);
  EXPECT_EQ(ab.delta2, ba.delta2);
  EXPECT_EQ(ab.delta3, ba.delta3);
}

TEST(DepthMetrics, SubMaskEqualsPreMaskedArrays) {
  const DepthMap gt = random_gt(16, 12, 8, 0.0);
  const DepthMap pred = random_gt(16, 12, 9, 0.0);
  DepthMap gt_masked = gt;
  Rng rng(3);
  for (std::size_t i = 0; i < gt.values.size(); ++i)
    if (rng.bernoulli(0.4)) {
      gt_masked.mask[i] = 0;
      gt_masked.values[i] = 0.0;
    }
  // The same pixels copied into a compact map.
  std::vector<double> pv, gv;
  for (std::size_t i = 0; i < gt.values.size(); ++i)
    if (gt_masked.valid(i)) {
      pv.push_back(pred.values[i]);
      gv.push_back(gt.values[i]);
    }
  Grid<double> pg(static_cast<int>(pv.size()), 1), gg(static_cast<int>(gv.size()), 1);
  pg.storage() = pv;
  gg.storage() = gv;
  const DepthMetrics a = depth_metrics(pred, gt_masked);
  const DepthMetrics b = depth_metrics(DepthMap::from_values(pg), DepthMap::from_values(gg));
  EXPECT_DOUBLE_EQ(a.absrel, b.absrel);
  EXPECT_DOUBLE_EQ(a.rms, b.rms);
  EXPECT_DOUBLE_EQ(a.delta1, b.delta1);
  EXPECT_EQ(a.valid_pixels, b.valid_pixels);
}

TEST(DepthMetrics, RangeCapExcludesFarGroundTruth) {
  DepthMap gt(3, 1), pred(3, 1);
  gt.set(0, 0, 10.0);
  gt.set(1, 0, 400.0);
  gt.set(2, 0, 5e-4);
  for (int x = 0; x < 3; ++x) pred.set(x, 0, 11.0);
  const DepthMetrics m = depth_metrics(pred, gt);
  EXPECT_EQ(m.valid_pixels, 1u);
  EXPECT_NEAR(m.absrel, 0.1, 1e-12);
}

TEST(DepthMetrics, NoOverlapIsDegenerate) {
  DepthMap gt(2, 1), pred(2, 1);
  gt.set(0, 0, 1.0);
  pred.set(1, 0, 1.0);
  EXPECT_THROW(depth_metrics(pred, gt), DegenerateInputError);
  EXPECT_THROW(depth_metrics(DepthMap(2, 2), gt), DomainError);
}

TEST(Align, IdentityWhenAlreadyAligned) {
  const DepthMap gt = random_gt(10, 8, 10);
  const ScaleShift s = align_scale_shift(gt, gt);
  EXPECT_NEAR(s.scale, 1.0, 1e-12);
  EXPECT_NEAR(s.shift, 0.0, 1e-10);
}

TEST(Align, RecoversExactAffineMap) {
  const DepthMap pred = random_gt(24, 18, 11);
  const DepthMap gt = scaled(pred, 2.0, 0.5);
  const ScaleShift s = align_scale_shift(pred, gt);
  EXPECT_NEAR(s.scale, 2.0, 1e-9);
  EXPECT_NEAR(s.shift, 0.5, 1e-9);
  EXPECT_EQ(s.nonpositive, 0u);
  EXPECT_NEAR(depth_metrics(s.aligned, gt).absrel, 0.0, 1e-12);
}

TEST(Align, NoisyFitMatchesIndependentSolve) {
  const DepthMap pred = random_gt(30, 20, 12);
  DepthMap gt = scaled(pred, 0.8, 1.7);
  Rng rng(13);
  for (std::size_t i = 0; i < gt.values.size(); ++i)
    if (gt.valid(i)) gt.values[i] += rng.normal() * 0.3;
  // Closed form from centered moments.
  double n = 0, mp = 0, mg = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i)
    if (gt.valid(i) && pred.valid(i)) {
      ++n;
      mp += pred.values[i];
      mg += gt.values[i];
    }
  mp /= n;
  mg /= n;
  double cov = 0, var = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i)
    if (gt.valid(i) && pred.valid(i)) {
      cov += (pred.values[i] - mp) * (gt.values[i] - mg);
      var += (pred.values[i] - mp) * (pred.values[i] - mp);
    }
  const double a = cov / var, b = mg - a * mp;
  const ScaleShift s = align_scale_shift(pred, gt);
  EXPECT_NEAR(s.scale, a, 1e-6);
  EXPECT_NEAR(s.shift, b, 1e-6);
  // Optimality: no worse than leaving the prediction as is, nor than nearby fits.
  auto residual = [&](double sa, double sb) {
    double r = 0;
    for (std::size_t i = 0; i < gt.values.size(); ++i)
      if (gt.valid(i) && pred.valid(i)) r += std::pow(sa * pred.values[i] + sb - gt.values[i], 2);
    return r;
  };
  const double best = residual(s.scale, s.shift);
  EXPECT_LE(best, residual(1.0, 0.0));
  for (double da : {-1e-3, 1e-3})
    for (double db : {-1e-2, 1e-2}) EXPECT_LE(best, residual(s.scale + da, s.shift + db));
}

TEST(Align, NonPositiveAlignedPixelsAreMaskedAndCounted) {
  // Forty pixels on gt = 2 pred - 5 pin the fit; one near pixel lands below zero.
  DepthMap pred(41, 1), gt(41, 1);
  for (int x = 0; x < 40; ++x) {
    pred.set(x, 0, 3.0 + 0.2 * x);
    gt.set(x, 0, 2.0 * (3.0 + 0.2 * x) - 5.0);
  }
  pred.set(40, 0, 1.0);
  gt.set(40, 0, 0.5);
  const ScaleShift s = align_scale_shift(pred, gt);
  EXPECT_LT(s.scale * 1.0 + s.shift, 0.0);
  EXPECT_EQ(s.nonpositive, 1u);
  EXPECT_FALSE(s.aligned.valid(40, 0));
  EXPECT_EQ(depth_metrics(s.aligned, gt).valid_pixels, 40u);
}

TEST(Align, ConstantPredictionIsSingular) {
  DepthMap pred(4, 1), gt(4, 1);
  for (int x = 0; x < 4; ++x) {
    pred.set(x, 0, 2.0);
    gt.set(x, 0, 1.0 + x);
  }
  EXPECT_THROW(align_scale_shift(pred, gt), SingularError);
}

}  // namespace
}  // namespace metriccam
