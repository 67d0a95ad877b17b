// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/augment.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>

#include "palmpipe/rng.hpp"

namespace palmpipe {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Mat3 = Eigen::Matrix3d;

Mat3 translation(double tx, double ty) {
  Mat3 m = Mat3::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return m;
}

Mat3 about_center(double cx, double cy, const Mat3& m) {
  return translation(cx, cy) * m * translation(-cx, -cy);
}

// Exact 4-point perspective solve (corners -> displaced corners).
Mat3 perspective_from_corners(const std::array<Eigen::Vector2d, 4>& src,
                              const std::array<Eigen::Vector2d, 4>& dst) {
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i].x(), y = src[i].y();
    const double u = dst[i].x(), v = dst[i].y();
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> h = a.fullPivLu().solve(b);
  Mat3 m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return m;
}

Image resample_inverse(const Image& img, const Mat3& forward) {
  Image out(img.width(), img.height());
  const Mat3 inv = forward.inverse();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Eigen::Vector3d p = inv * Eigen::Vector3d(x, y, 1.0);
      const double w = p.z();
      if (std::abs(w) < 1e-12) continue;
      out.set(x, y, bilinear_sample_or_zero(img, p.x() / w, p.y() / w));
    }
  }
  return out;
}

}  // namespace

void AugmentationSpec::validate() const {
  if (!(scale > 0.0)) raise(ErrorCode::BadArgument, "scale must be > 0");
  if (blur_sigma < 0.0) raise(ErrorCode::BadArgument, "blur_sigma must be >= 0");
  if (downsample_factor < 1) raise(ErrorCode::BadArgument, "downsample_factor must be >= 1");
  if (perspective_jitter < 0.0) raise(ErrorCode::BadArgument, "perspective_jitter must be >= 0");
  if (apply_probability < 0.0 || apply_probability > 1.0) {
    raise(ErrorCode::BadArgument, "apply_probability must be in [0,1]");
  }
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  const int w = img.width(), h = img.height();
  Image tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        int xi = x + i;
        if (xi < 0) xi = 0;
        if (xi >= w) xi = w - 1;
        acc += kernel[i + radius] * img.at(xi, y);
      }
      tmp.set(x, y, acc);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        int yi = y + i;
        if (yi < 0) yi = 0;
        if (yi >= h) yi = h - 1;
        acc += kernel[i + radius] * tmp.at(x, yi);
      }
      out.set(x, y, clamp01(acc));
    }
  }
  return out;
}

Image downsample_degrade(const Image& img, int factor) {
  if (factor < 1) raise(ErrorCode::BadArgument, "downsample factor must be >= 1");
  if (factor == 1) return img;
  const int w = img.width(), h = img.height();
  const int dw = (w + factor - 1) / factor;
  const int dh = (h + factor - 1) / factor;
  Image small(dw, dh);
  for (int by = 0; by < dh; ++by) {
    for (int bx = 0; bx < dw; ++bx) {
      double acc = 0.0;
      int count = 0;
      for (int y = by * factor; y < std::min(h, (by + 1) * factor); ++y) {
        for (int x = bx * factor; x < std::min(w, (bx + 1) * factor); ++x) {
          acc += img.at(x, y);
          ++count;
        }
      }
      small.set(bx, by, acc / count);
    }
  }
  Image out(w, h);
  const double sx = static_cast<double>(dw) / w;
  const double sy = static_cast<double>(dh) / h;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double u = (x + 0.5) * sx - 0.5;
      double v = (y + 0.5) * sy - 0.5;
      if (u < 0) u = 0;
      if (v < 0) v = 0;
      if (u > dw - 1) u = dw - 1;
      if (v > dh - 1) v = dh - 1;
      out.set(x, y, bilinear_sample_or_zero(small, u, v));
    }
  }
  return out;
}

Image apply_augmentation(const Image& img, const AugmentationSpec& spec, uint64_t seed) {
  spec.validate();
  Rng rng(mix_seed(seed, 0x41554753ULL));  // augmentation stream

  // Draw all gates and the corner jitter up-front so the random stream does
  // not depend on which components are enabled.
  const bool fire_scale = rng.uniform() < spec.apply_probability;
  const bool fire_rot = rng.uniform() < spec.apply_probability;
  const bool fire_trans = rng.uniform() < spec.apply_probability;
  const bool fire_persp = rng.uniform() < spec.apply_probability;
  const bool fire_blur = rng.uniform() < spec.apply_probability;
  const bool fire_down = rng.uniform() < spec.apply_probability;
  std::array<Eigen::Vector2d, 4> corner_jitter;
  for (auto& j : corner_jitter) {
    j.x() = rng.uniform(-spec.perspective_jitter, spec.perspective_jitter);
    j.y() = rng.uniform(-spec.perspective_jitter, spec.perspective_jitter);
  }

  const double cx = (img.width() - 1) / 2.0;
  const double cy = (img.height() - 1) / 2.0;

  Mat3 m = Mat3::Identity();
  bool any_geom = false;
  if (fire_scale && spec.scale != 1.0) {
    Mat3 s = Mat3::Identity();
    s(0, 0) = s(1, 1) = spec.scale;
    m = about_center(cx, cy, s) * m;
    any_geom = true;
  }
  if (fire_rot && spec.rotation_degrees != 0.0) {
    const double a = spec.rotation_degrees * kPi / 180.0;
    Mat3 r = Mat3::Identity();
    r(0, 0) = std::cos(a);
    r(0, 1) = -std::sin(a);
    r(1, 0) = std::sin(a);
    r(1, 1) = std::cos(a);
    m = about_center(cx, cy, r) * m;
    any_geom = true;
  }
  if (fire_trans && (spec.translate_x != 0.0 || spec.translate_y != 0.0)) {
    m = translation(spec.translate_x, spec.translate_y) * m;
    any_geom = true;
  }
  if (fire_persp && spec.perspective_jitter > 0.0) {
    const double w1 = img.width() - 1.0, h1 = img.height() - 1.0;
    const std::array<Eigen::Vector2d, 4> src = {
        Eigen::Vector2d(0, 0), Eigen::Vector2d(w1, 0), Eigen::Vector2d(w1, h1),
        Eigen::Vector2d(0, h1)};
    std::array<Eigen::Vector2d, 4> dst;
    for (int i = 0; i < 4; ++i) dst[i] = src[i] + corner_jitter[i];
    m = perspective_from_corners(src, dst) * m;
    any_geom = true;
  }

  Image out = any_geom ? resample_inverse(img, m) : img;
  if (fire_blur && spec.blur_sigma > 0.0) {
    out = gaussian_blur(out, spec.blur_sigma);
  }
  if (fire_down && spec.downsample_factor > 1) {
    out = downsample_degrade(out, spec.downsample_factor);
  }
  return out;
}

}  // namespace palmpipe
