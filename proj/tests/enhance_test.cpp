// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "palmpipe/augment.hpp"
#include "palmpipe/enhance.hpp"
#include "palmpipe/geometry.hpp"
#include "palmpipe/synth.hpp"
#include "testutil.hpp"

using namespace palmpipe;

namespace {

Image sinusoid(double amplitude, double frequency) {
  std::vector<double> px(128 * 128);
  for (int y = 0; y < 128; ++y) {
    for (int x = 0; x < 128; ++x) {
      px[static_cast<std::size_t>(y) * 128 + x] =
          0.5 + amplitude * std::sin(2.0 * 3.14159265358979323846 * frequency * x);
    }
  }
  return Image::from_pixels(128, 128, std::move(px));
}

Image scale_contrast(const Image& img, double factor) {
  std::vector<double> px(img.pixels().begin(), img.pixels().end());
  for (double& v : px) v = 0.5 + factor * (v - 0.5);
  return Image::from_pixels(img.width(), img.height(), std::move(px));
}

}  // namespace

TEST_CASE("enhancement maps constant images to neutral gray") {
  const Image flat(64, 64, 0.8);
  const Image out = enhance_baseline(flat, 15);
  for (const double v : out.pixels()) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("enhancement output stays in range") {
  const Image roi = extract_roi(testutil::render_test_palm(21).image,
                                testutil::render_test_palm(21).keypoints,
                                CanonicalTemplate::standard());
  const Image out = enhance_baseline(roi, 31);
  CHECK(out.width() == roi.width());
  CHECK(out.height() == roi.height());
  for (const double v : out.pixels()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("enhancement rejects invalid windows") {
  const Image img(64, 64, 0.4);
  CHECK(testutil::thrown_code([&] { enhance_baseline(img, 4); }) == ErrorCode::BadWindow);
  CHECK(testutil::thrown_code([&] { enhance_baseline(img, 1); }) == ErrorCode::BadWindow);
  CHECK(testutil::thrown_code([&] { enhance_baseline(img, 65); }) == ErrorCode::BadWindow);
}

TEST_CASE("enhancement recovers contrast on degraded captures") {
  const RenderResult rr = testutil::render_test_palm(22);
  const Image roi = extract_roi(rr.image, rr.keypoints, CanonicalTemplate::standard());
  const Image degraded = scale_contrast(gaussian_blur(roi, 1.5), 0.5);
  const Image enhanced = enhance_baseline(degraded, 31);
  CHECK(ridge_contrast(enhanced) > ridge_contrast(degraded));
}

TEST_CASE("enhancement is close to idempotent") {
  const RenderResult rr = testutil::render_test_palm(23);
  const Image roi = extract_roi(rr.image, rr.keypoints, CanonicalTemplate::standard());
  const Image once = enhance_baseline(roi, 31);
  const Image twice = enhance_baseline(once, 31);
  double mad = 0.0;
  for (std::size_t i = 0; i < once.pixels().size(); ++i) {
    mad += std::abs(once.pixels()[i] - twice.pixels()[i]);
  }
  CHECK(mad / static_cast<double>(once.pixels().size()) < 0.05);
}

TEST_CASE("ridge contrast metric ordering") {
  CHECK(ridge_contrast(Image(64, 64, 0.3)) == 0.0);
  CHECK(ridge_contrast(sinusoid(0.4, 0.08)) > ridge_contrast(sinusoid(0.1, 0.08)));

  const Image textured = testutil::noise_image(96, 96, 31);
  CHECK(ridge_contrast(gaussian_blur(textured, 2.0)) <= ridge_contrast(textured));
}
