// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_IMAGE_HPP
#define PALMPIPE_IMAGE_HPP

#include <span>
#include <utility>
#include <vector>

#include "palmpipe/error.hpp"

namespace palmpipe {

/// Single-channel raster with intensities in [0,1], row-major storage.
/// Immutable in all pipeline operations; mutation is limited to
/// construction-time fills so values can be shared across threads.
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);

  /// Takes ownership of a row-major buffer. Rejects wrong buffer length,
  /// non-finite values and intensities outside [0,1].
  static Image from_pixels(int width, int height, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return 1; }
  bool empty() const noexcept { return pixels_.empty(); }

  double at(int x, int y) const { return pixels_[static_cast<size_t>(y) * width_ + x]; }
  void set(int x, int y, double v) { pixels_[static_cast<size_t>(y) * width_ + x] = v; }

  std::span<const double> pixels() const noexcept { return pixels_; }
  std::span<double> mutable_pixels() noexcept { return pixels_; }

  Image mirrored_horizontal() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

/// Bilinear interpolation of the four surrounding pixels. Exact at integer
/// coordinates. Raises OutOfBounds outside [0,w-1]x[0,h-1].
double bilinear_sample(const Image& img, double x, double y);

/// bilinear_sample with 0 fill outside the image rectangle (no error).
double bilinear_sample_or_zero(const Image& img, double x, double y);

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace palmpipe

#endif
