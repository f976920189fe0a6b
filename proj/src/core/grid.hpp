// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace metriccam {

// Dense row-major 2D grid.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_);
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_);
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  bool same_shape(int w, int h) const { return width_ == w && height_ == h; }
  template <typename U>
  bool same_shape(const Grid<U>& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Depth in meters plus a validity mask. Invalid entries carry value 0.
struct DepthMap {
  Grid<double> values;
  Grid<std::uint8_t> mask;

  DepthMap() = default;
  DepthMap(int width, int height) : values(width, height, 0.0), mask(width, height, 0) {}

  // Builds a map where every positive finite value is valid.
  static DepthMap from_values(Grid<double> v);

  int width() const { return values.width(); }
  int height() const { return values.height(); }
  bool valid(int x, int y) const { return mask(x, y) != 0; }
  bool valid(std::size_t i) const { return mask[i] != 0; }
  void set(int x, int y, double d) {
    values(x, y) = d;
    mask(x, y) = 1;
  }
  void invalidate(int x, int y) {
    values(x, y) = 0.0;
    mask(x, y) = 0;
  }
  std::size_t valid_count() const;
};

// Channel-planar intensity image, C in {1, 3}.
struct ImageMap {
  std::vector<Grid<double>> channels;

  ImageMap() = default;
  ImageMap(int width, int height, int num_channels)
      : channels(static_cast<std::size_t>(num_channels), Grid<double>(width, height, 0.0)) {}

  int width() const { return channels.empty() ? 0 : channels[0].width(); }
  int height() const { return channels.empty() ? 0 : channels[0].height(); }
  int num_channels() const { return static_cast<int>(channels.size()); }
};

inline DepthMap DepthMap::from_values(Grid<double> v) {
  DepthMap d;
  d.mask = Grid<std::uint8_t>(v.width(), v.height(), 0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = v[i];
    if (x > 0.0 && x < 1e300 && x == x) {
      d.mask[i] = 1;
    } else {
      v[i] = 0.0;
    }
  }
  d.values = std::move(v);
  return d;
}

inline std::size_t DepthMap::valid_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) n += mask[i] != 0;
  return n;
}

}  // namespace metriccam
