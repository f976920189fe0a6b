// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include "camera.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"

namespace metriccam {
namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

void check_pairing(const DepthMap& d, const CameraIntrinsics& k, const char* what) {
  if (d.width() != k.width || d.height() != k.height || !d.mask.same_shape(d.values))
    throw DomainError(std::string(what) + ": depth grid does not match intrinsics");
}

void check_pairing(const ImageMap& im, const CameraIntrinsics& k, const char* what) {
  for (const auto& c : im.channels)
    if (!c.same_shape(k.width, k.height))
      throw DomainError(std::string(what) + ": image grid does not match intrinsics");
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!positive_finite(fx) || !positive_finite(fy))
    throw DomainError("intrinsics: focal lengths must be positive and finite");
  if (!std::isfinite(u0) || !std::isfinite(v0))
    throw DomainError("intrinsics: principal point must be finite");
  if (width < 1 || height < 1) throw DomainError("intrinsics: image size must be >= 1x1");
}

double pixel_focal(const PhysicalCameraMeta& meta) {
  if (!positive_finite(meta.focal_um) || !positive_finite(meta.pixel_size_um))
    throw DomainError("pixel_focal: focal and pixel size must be positive and finite");
  return meta.focal_um / meta.pixel_size_um;
}

double effective_focal(const CameraIntrinsics& k) {
  k.validate();
  if (std::abs(k.fx - k.fy) / k.fx > kMaxAnisotropy)
    throw DomainError("anisotropic intrinsics: |fx - fy| / fx = " +
                      std::to_string(std::abs(k.fx - k.fy) / k.fx) + " exceeds 0.1");
  return k.fx == k.fy ? k.fx : std::sqrt(k.fx * k.fy);
}

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

LabelCanonical cstm_label_forward(const DepthMap& depth, const CameraIntrinsics& k,
                                  double canonical_focal) {
  if (!positive_finite(canonical_focal))
    throw DomainError("cstm_label_forward: canonical focal must be positive");
  check_pairing(depth, k, "cstm_label_forward");
  const double f = effective_focal(k);
  LabelCanonical out;
  out.omega = canonical_focal / f;
  out.depth = depth;
  for (std::size_t i = 0; i < out.depth.values.size(); ++i)
    if (out.depth.mask[i]) out.depth.values[i] *= out.omega;
  out.intrinsics = {canonical_focal, canonical_focal, k.u0, k.v0, k.width, k.height};
  return out;
}

DepthMap cstm_label_inverse(const DepthMap& depth_c, double omega) {
  if (!positive_finite(omega)) throw DomainError("cstm_label_inverse: omega must be > 0");
  DepthMap out = depth_c;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (out.mask[i]) out.values[i] /= omega;
  return out;
}

Grid<double> resize_bilinear(const Grid<double>& src, int width, int height, double scale_x,
                             double scale_y) {
  Grid<double> out(width, height);
  const int sw = src.width();
  const int sh = src.height();
  for (int y = 0; y < height; ++y) {
    const double sy = std::clamp(y / scale_y, 0.0, static_cast<double>(sh - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, sh - 1);
    const double ty = sy - y0;
    for (int x = 0; x < width; ++x) {
      const double sx = std::clamp(x / scale_x, 0.0, static_cast<double>(sw - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, sw - 1);
      const double tx = sx - x0;
      const double top = src(x0, y0) * (1.0 - tx) + src(x1, y0) * tx;
      const double bot = src(x0, y1) * (1.0 - tx) + src(x1, y1) * tx;
      out(x, y) = top * (1.0 - ty) + bot * ty;
    }
  }
  return out;
}

ImageMap resize_bilinear(const ImageMap& src, int width, int height, double scale_x,
                         double scale_y) {
  ImageMap out;
  out.channels.reserve(src.channels.size());
  for (const auto& c : src.channels)
    out.channels.push_back(resize_bilinear(c, width, height, scale_x, scale_y));
  return out;
}

DepthMap resize_nearest(const DepthMap& src, int width, int height, double scale_x,
                        double scale_y) {
  DepthMap out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::clamp(round_half_up(y / scale_y), 0, src.height() - 1);
    for (int x = 0; x < width; ++x) {
      const int sx = std::clamp(round_half_up(x / scale_x), 0, src.width() - 1);
      if (src.valid(sx, sy)) out.set(x, y, src.values(sx, sy));
    }
  }
  return out;
}

ImageMap cstm_image_resize_input(const ImageMap& image, const CameraIntrinsics& k,
                                 double canonical_focal, CameraIntrinsics* k_c,
                                 double* omega) {
  if (!positive_finite(canonical_focal))
    throw DomainError("cstm_image_forward: canonical focal must be positive");
  check_pairing(image, k, "cstm_image_forward");
  const double f = effective_focal(k);
  const double w = canonical_focal / f;
  const int nw = round_half_up(w * k.width);
  const int nh = round_half_up(w * k.height);
  if (nw < 1 || nh < 1) throw DomainError("cstm_image_forward: canonical image below 1x1");
  if (k_c) *k_c = {canonical_focal, canonical_focal, w * k.u0, w * k.v0, nw, nh};
  if (omega) *omega = w;
  if (nw == k.width && nh == k.height && w == 1.0) return image;
  return resize_bilinear(image, nw, nh, w, w);
}

ImageCanonical cstm_image_forward(const ImageMap& image, const DepthMap& depth,
                                  const CameraIntrinsics& k, double canonical_focal) {
  check_pairing(depth, k, "cstm_image_forward");
  ImageCanonical out;
  out.image = cstm_image_resize_input(image, k, canonical_focal, &out.intrinsics, &out.omega);
  if (out.omega == 1.0 && out.intrinsics.width == k.width && out.intrinsics.height == k.height)
    out.depth = depth;
  else
    out.depth = resize_nearest(depth, out.intrinsics.width, out.intrinsics.height, out.omega,
                               out.omega);
  return out;
}

DepthMap cstm_image_inverse(const DepthMap& depth_c, double omega, int orig_width,
                            int orig_height) {
  if (!positive_finite(omega)) throw DomainError("cstm_image_inverse: omega must be > 0");
  if (orig_width < 1 || orig_height < 1)
    throw DomainError("cstm_image_inverse: original size must be >= 1x1");
  if (std::abs(round_half_up(omega * orig_width) - depth_c.width()) > 1 ||
      std::abs(round_half_up(omega * orig_height) - depth_c.height()) > 1)
    throw DomainError("cstm_image_inverse: canonical size inconsistent with omega");
  if (omega == 1.0 && depth_c.width() == orig_width && depth_c.height() == orig_height)
    return depth_c;
  return resize_nearest(depth_c, orig_width, orig_height, 1.0 / omega, 1.0 / omega);
}

CropResult crop(const ImageMap& image, const DepthMap& depth, const CameraIntrinsics& k,
                const PixelRect& r) {
  k.validate();
  check_pairing(depth, k, "crop");
  check_pairing(image, k, "crop");
  if (r.w < 1 || r.h < 1 || r.x0 < 0 || r.y0 < 0 || r.x0 + r.w > k.width ||
      r.y0 + r.h > k.height)
    throw DomainError("crop: rectangle outside the image");
  CropResult out;
  for (const auto& c : image.channels) out.image.channels.push_back(crop_grid(c, r));
  out.depth.values = crop_grid(depth.values, r);
  out.depth.mask = crop_grid(depth.mask, r);
  out.intrinsics = {k.fx, k.fy, k.u0 - r.x0, k.v0 - r.y0, r.w, r.h};
  return out;
}

CameraIntrinsics flip_intrinsics(const CameraIntrinsics& k) {
  CameraIntrinsics out = k;
  out.u0 = k.width - 1 - k.u0;
  return out;
}

std::array<Grid<double>, 4> camconvs_encoding(const CameraIntrinsics& k) {
  const double f = effective_focal(k);
  std::array<Grid<double>, 4> enc;
  for (auto& g : enc) g = Grid<double>(k.width, k.height);
  for (int v = 0; v < k.height; ++v) {
    const double dv = v - k.v0;
    for (int u = 0; u < k.width; ++u) {
      const double du = u - k.u0;
      enc[0](u, v) = du / k.width;
      enc[1](u, v) = dv / k.height;
      enc[2](u, v) = std::atan(du / f);
      enc[3](u, v) = std::atan(dv / f);
    }
  }
  return enc;
}

}  // namespace metriccam
