// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/enhance.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace palmpipe {

namespace {

constexpr double kEps = 1e-3;
constexpr int kContrastTile = 16;

// Integral images over values and squared values, (w+1)x(h+1).
struct Integrals {
  int w, h;
  std::vector<double> sum, sum2;

  explicit Integrals(const Image& img) : w(img.width()), h(img.height()) {
    sum.assign(static_cast<size_t>(w + 1) * (h + 1), 0.0);
    sum2.assign(static_cast<size_t>(w + 1) * (h + 1), 0.0);
    for (int y = 0; y < h; ++y) {
      double row = 0.0, row2 = 0.0;
      for (int x = 0; x < w; ++x) {
        const double v = img.at(x, y);
        row += v;
        row2 += v * v;
        at(sum, x + 1, y + 1) = at(sum, x + 1, y) + row;
        at(sum2, x + 1, y + 1) = at(sum2, x + 1, y) + row2;
      }
    }
  }

  double& at(std::vector<double>& m, int x, int y) const {
    return m[static_cast<size_t>(y) * (w + 1) + x];
  }
  double get(const std::vector<double>& m, int x, int y) const {
    return m[static_cast<size_t>(y) * (w + 1) + x];
  }

  // Stats over the half-open box [x0,x1) x [y0,y1).
  void box_stats(int x0, int y0, int x1, int y1, double* mean, double* stddev) const {
    const double n = static_cast<double>(x1 - x0) * (y1 - y0);
    const double s = get(sum, x1, y1) - get(sum, x0, y1) - get(sum, x1, y0) + get(sum, x0, y0);
    const double s2 =
        get(sum2, x1, y1) - get(sum2, x0, y1) - get(sum2, x1, y0) + get(sum2, x0, y0);
    *mean = s / n;
    const double var = std::max(0.0, s2 / n - (*mean) * (*mean));
    *stddev = std::sqrt(var);
  }
};

}  // namespace

Image enhance_baseline(const Image& img, int window) {
  if (img.empty()) raise(ErrorCode::BadArgument, "empty image");
  if (window % 2 == 0 || window < 3 || window > std::min(img.width(), img.height())) {
    raise(ErrorCode::BadWindow, "window must be odd and within [3, min(width, height)]");
  }
  const int r = window / 2;
  const Integrals integ(img);
  Image out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    const int y0 = std::max(0, y - r);
    const int y1 = std::min(img.height(), y + r + 1);
    for (int x = 0; x < img.width(); ++x) {
      const int x0 = std::max(0, x - r);
      const int x1 = std::min(img.width(), x + r + 1);
      double mean = 0.0, sd = 0.0;
      integ.box_stats(x0, y0, x1, y1, &mean, &sd);
      const double z = (img.at(x, y) - mean) / (sd + kEps);
      // z is roughly in [-3,3] for natural windows; 0 maps to mid-gray.
      out.set(x, y, clamp01(0.5 + z / 6.0));
    }
  }
  return out;
}

double ridge_contrast(const Image& img) {
  if (img.empty()) raise(ErrorCode::BadArgument, "empty image");
  const Integrals integ(img);
  double acc = 0.0;
  int tiles = 0;
  for (int y0 = 0; y0 < img.height(); y0 += kContrastTile) {
    const int y1 = std::min(img.height(), y0 + kContrastTile);
    for (int x0 = 0; x0 < img.width(); x0 += kContrastTile) {
      const int x1 = std::min(img.width(), x0 + kContrastTile);
      double mean = 0.0, sd = 0.0;
      integ.box_stats(x0, y0, x1, y1, &mean, &sd);
      acc += sd;
      ++tiles;
    }
  }
  return acc / tiles;
}

}  // namespace palmpipe
