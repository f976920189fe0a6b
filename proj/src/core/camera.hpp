// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>

#include "grid.hpp"

namespace metriccam {

// Pinhole intrinsics in pixel units. Pixel (u, v) has its center at integer
// coordinates; the principal point may lie outside the frame after a crop.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double u0 = 0.0;
  double v0 = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;
  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

// Physical focal length and pixel pitch, both in micrometers.
struct PhysicalCameraMeta {
  double focal_um = 0.0;
  double pixel_size_um = 0.0;
};

struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;
};

inline constexpr double kDefaultCanonicalFocal = 1000.0;
inline constexpr double kMaxAnisotropy = 0.1;

// f = f_hat / delta.
double pixel_focal(const PhysicalCameraMeta& meta);

// Scalar focal used for the canonical ratio: sqrt(fx * fy). Throws
// DomainError when |fx - fy| / fx exceeds kMaxAnisotropy.
double effective_focal(const CameraIntrinsics& k);

// Round half up, used for every resized dimension.
int round_half_up(double x);

struct LabelCanonical {
  DepthMap depth;
  CameraIntrinsics intrinsics;
  double omega = 1.0;
};

LabelCanonical cstm_label_forward(const DepthMap& depth, const CameraIntrinsics& k,
                                  double canonical_focal = kDefaultCanonicalFocal);
DepthMap cstm_label_inverse(const DepthMap& depth_c, double omega);

struct ImageCanonical {
  ImageMap image;
  DepthMap depth;
  CameraIntrinsics intrinsics;
  double omega = 1.0;
};

ImageCanonical cstm_image_forward(const ImageMap& image, const DepthMap& depth,
                                  const CameraIntrinsics& k,
                                  double canonical_focal = kDefaultCanonicalFocal);
// Image-only variant used at inference, where no depth is available.
ImageMap cstm_image_resize_input(const ImageMap& image, const CameraIntrinsics& k,
                                 double canonical_focal, CameraIntrinsics* k_c = nullptr,
                                 double* omega = nullptr);
DepthMap cstm_image_inverse(const DepthMap& depth_c, double omega, int orig_width,
                            int orig_height);

// Resampling. Source coordinate of target pixel x is x / scale (pixel grids
// scale about the origin, so a principal point maps as u0 -> scale * u0).
Grid<double> resize_bilinear(const Grid<double>& src, int width, int height, double scale_x,
                             double scale_y);
ImageMap resize_bilinear(const ImageMap& src, int width, int height, double scale_x,
                         double scale_y);
DepthMap resize_nearest(const DepthMap& src, int width, int height, double scale_x,
                        double scale_y);

// Nearest-neighbor resize of an arbitrary grid, same convention as above.
template <typename T>
Grid<T> resize_nearest_grid(const Grid<T>& src, int width, int height, double scale_x,
                            double scale_y) {
  Grid<T> out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::clamp(round_half_up(y / scale_y), 0, src.height() - 1);
    for (int x = 0; x < width; ++x) {
      const int sx = std::clamp(round_half_up(x / scale_x), 0, src.width() - 1);
      out(x, y) = src(sx, sy);
    }
  }
  return out;
}

struct CropResult {
  ImageMap image;
  DepthMap depth;
  CameraIntrinsics intrinsics;
};

CropResult crop(const ImageMap& image, const DepthMap& depth, const CameraIntrinsics& k,
                const PixelRect& rect);

template <typename T>
Grid<T> crop_grid(const Grid<T>& g, const PixelRect& r) {
  Grid<T> out(r.w, r.h);
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x) out(x, y) = g(r.x0 + x, r.y0 + y);
  return out;
}

template <typename T>
Grid<T> flip_grid(const Grid<T>& g) {
  Grid<T> out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) out(g.width() - 1 - x, y) = g(x, y);
  return out;
}

// Horizontal mirror; u0 -> width - 1 - u0.
CameraIntrinsics flip_intrinsics(const CameraIntrinsics& k);

// CamConvs-style camera encoding: (u-u0)/W, (v-v0)/H, atan((u-u0)/f),
// atan((v-v0)/f), with f the effective focal.
std::array<Grid<double>, 4> camconvs_encoding(const CameraIntrinsics& k);

}  // namespace metriccam
