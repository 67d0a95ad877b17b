// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "palmpipe/enhance.hpp"
#include "palmpipe/geometry.hpp"
#include "palmpipe/rng.hpp"
#include "palmpipe/synth.hpp"
#include "palmpipe/tps.hpp"
#include "testutil.hpp"

using namespace palmpipe;

namespace {

Correspondences grid_correspondences(int n, double span, double margin) {
  Correspondences out;
  for (int gy = 0; gy < n; ++gy) {
    for (int gx = 0; gx < n; ++gx) {
      const Vec2 s{margin + gx * span / (n - 1), margin + gy * span / (n - 1)};
      out.push_back({s, s, 1.0});
    }
  }
  return out;
}

Image test_roi(std::uint64_t seed) {
  const RenderResult rr = testutil::render_test_palm(seed);
  return enhance_baseline(extract_roi(rr.image, rr.keypoints, CanonicalTemplate::standard()), 31);
}

double mean_abs_diff(const Image& a, const Image& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    sum += std::abs(a.pixels()[i] - b.pixels()[i]);
  }
  return sum / static_cast<double>(a.pixels().size());
}

}  // namespace

TEST_CASE("tps fit of zero displacement is the identity map") {
  const TpsWarp w = fit_tps(grid_correspondences(3, 160.0, 30.0), 0.0);
  for (const Vec2& wt : w.weights) {
    CHECK(std::abs(wt.x) < 1e-9);
    CHECK(std::abs(wt.y) < 1e-9);
  }
  CHECK(w.affine_x[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(w.affine_x[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(w.affine_x[2] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(w.affine_y[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(w.affine_y[1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(w.affine_y[2] == doctest::Approx(1.0).epsilon(1e-9));
  const Vec2 p = evaluate_tps(w, Vec2{81.5, 123.25});
  CHECK(p.x == doctest::Approx(81.5).epsilon(1e-10));
  CHECK(p.y == doctest::Approx(123.25).epsilon(1e-10));
  w.validate();
}

TEST_CASE("tps fit of affine-consistent pairs has no bending") {
  Correspondences corr = grid_correspondences(4, 180.0, 20.0);
  for (Correspondence& c : corr) {
    c.target.x = 0.96 * c.source.x - 0.05 * c.source.y + 3.0;
    c.target.y = 0.04 * c.source.x + 1.02 * c.source.y - 2.0;
  }
  const TpsWarp w = fit_tps(corr, 0.0);
  for (const Vec2& wt : w.weights) {
    CHECK(std::abs(wt.x) < 1e-8);
    CHECK(std::abs(wt.y) < 1e-8);
  }
  CHECK(bending_energy(w) < 1e-10);

  // Warping an image through the affine-only field matches the equivalent
  // homography warp.
  const Image img = test_roi(31);
  Correspondences small = grid_correspondences(4, 180.0, 20.0);
  for (Correspondence& c : small) {
    c.target.x = c.source.x + 2.0;
    c.target.y = c.source.y - 1.0;
  }
  const Image via_tps = apply_tps(img, fit_tps(small, 0.0));
  const Homography shift = Homography::from_matrix({1, 0, 2, 0, 1, -1, 0, 0, 1});
  const Image via_h = warp_image(img, shift, 224);
  CHECK(mean_abs_diff(via_tps, via_h) < 0.01);
}

TEST_CASE("tps interpolates exactly at lambda zero") {
  // Four corners, one displaced: the paradigmatic interpolation case.
  Correspondences corners = {
      {{0.0, 0.0}, {5.0, 0.0}, 1.0},
      {{223.0, 0.0}, {223.0, 0.0}, 1.0},
      {{0.0, 223.0}, {0.0, 223.0}, 1.0},
      {{223.0, 223.0}, {223.0, 223.0}, 1.0},
  };
  const TpsWarp w = fit_tps(corners, 0.0);
  for (const Correspondence& c : corners) {
    const Vec2 m = evaluate_tps(w, c.source);
    CHECK(std::abs(m.x - c.target.x) < 1e-8);
    CHECK(std::abs(m.y - c.target.y) < 1e-8);
  }

  // Random smooth fields stay exact at every retained node.
  Rng rng(88);
  for (int trial = 0; trial < 5; ++trial) {
    Correspondences corr = grid_correspondences(4, 180.0, 20.0);
    for (Correspondence& c : corr) {
      c.target.x = c.source.x + rng.uniform(-6.0, 6.0);
      c.target.y = c.source.y + rng.uniform(-6.0, 6.0);
    }
    const TpsWarp w2 = fit_tps(corr, 0.0);
    for (const Correspondence& c : corr) {
      const Vec2 m = evaluate_tps(w2, c.source);
      CHECK(std::hypot(m.x - c.target.x, m.y - c.target.y) < 1e-8);
    }
    w2.validate();
  }
}

TEST_CASE("tps fit drops low-confidence pairs and validates input") {
  // Below-0.5 confidences are excluded before fitting.
  Correspondences corr = grid_correspondences(3, 160.0, 30.0);
  corr.push_back({{111.0, 111.0}, {160.0, 160.0}, 0.3});
  const TpsWarp w = fit_tps(corr, 0.0);
  const Vec2 m = evaluate_tps(w, Vec2{111.0, 111.0});
  CHECK(std::hypot(m.x - 111.0, m.y - 111.0) < 1e-8);

  CHECK(testutil::thrown_code([] {
          fit_tps({{{0, 0}, {0, 0}, 1.0}, {{1, 1}, {1, 1}, 1.0}}, 0.0);
        }) == ErrorCode::InsufficientPoints);
  CHECK(testutil::thrown_code([] {
          fit_tps({{{0, 0}, {0, 0}, 1.0},
                   {{10, 10}, {10, 10}, 1.0},
                   {{20, 20}, {20, 20}, 1.0},
                   {{30, 30}, {30, 30}, 1.0}},
                  0.0);
        }) == ErrorCode::CollinearPoints);
  CHECK(testutil::thrown_code([] {
          fit_tps({{{0, 0}, {0, 0}, 1.0},
                   {{0, 0}, {1, 1}, 1.0},
                   {{20, 0}, {20, 0}, 1.0},
                   {{0, 20}, {0, 20}, 1.0}},
                  0.0);
        }) == ErrorCode::DuplicateSourcePoints);
  CHECK(testutil::thrown_code([] {
          fit_tps(grid_correspondences(3, 100.0, 10.0), -1.0);
        }) == ErrorCode::BadArgument);
}

TEST_CASE("bending energy is non-increasing in lambda") {
  Rng rng(12);
  Correspondences corr = grid_correspondences(5, 180.0, 20.0);
  for (Correspondence& c : corr) {
    c.target.x = c.source.x + rng.uniform(-5.0, 5.0);
    c.target.y = c.source.y + rng.uniform(-5.0, 5.0);
  }
  CHECK(bending_energy(fit_tps(grid_correspondences(3, 100.0, 10.0), 0.0)) ==
        doctest::Approx(0.0));

  double last = std::numeric_limits<double>::infinity();
  for (const double lambda : {0.0, 0.1, 1.0, 10.0, 100.0, 1000.0}) {
    const double e = bending_energy(fit_tps(corr, lambda));
    CHECK(e >= 0.0);
    CHECK(e <= last + 1e-12);
    last = e;
  }
}

TEST_CASE("apply_tps identity and inverse round trip") {
  const Image img = test_roi(55);
  const Image same = apply_tps(img, TpsWarp::identity());
  for (std::size_t i = 0; i < img.pixels().size(); ++i) {
    CHECK(same.pixels()[i] == img.pixels()[i]);
  }

  // Distort by a known warp, fit its inverse from swapped pairs, apply: the
  // round trip must come back close to the original away from the border.
  Rng rng(660);
  Correspondences nodes = grid_correspondences(3, 164.0, 30.0);
  for (Correspondence& c : nodes) {
    const double ang = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    c.target.x = c.source.x + 4.0 * std::cos(ang);
    c.target.y = c.source.y + 4.0 * std::sin(ang);
  }
  const TpsWarp w = fit_tps(nodes, 0.0);
  Correspondences swapped;
  for (const Correspondence& c : nodes) swapped.push_back({c.target, c.source, 1.0});
  const Image distorted = apply_tps(img, w);
  const Image restored = apply_tps(distorted, fit_tps(swapped, 0.0));

  double sum = 0.0;
  int count = 0;
  for (int y = 20; y < 204; ++y) {
    for (int x = 20; x < 204; ++x) {
      sum += std::abs(restored.at(x, y) - img.at(x, y));
      ++count;
    }
  }
  CHECK(sum / count < 0.05);
}

TEST_CASE("correspondence search on identical images returns zero offsets") {
  const Image roi = test_roi(60);
  const Correspondences corr = find_correspondences(roi, roi, 6, 5);
  CHECK(corr.size() == 36);
  for (const Correspondence& c : corr) {
    CHECK(c.confidence == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(c.target.x == doctest::Approx(c.source.x).epsilon(1e-9));
    CHECK(c.target.y == doctest::Approx(c.source.y).epsilon(1e-9));
  }
  // Nodes are ordered row-major by grid index.
  CHECK(corr[0].source.y == corr[1].source.y);
  CHECK(corr[0].source.x < corr[1].source.x);
  CHECK(corr[0].source.y < corr[6].source.y);
}

TEST_CASE("correspondence search recovers a known translation") {
  const Image roi = test_roi(61);
  // reference(x, y) = probe(x - 3, y): every patch should match 3 px right.
  std::vector<double> px(224 * 224, 0.0);
  for (int y = 0; y < 224; ++y) {
    for (int x = 0; x < 224; ++x) {
      px[static_cast<std::size_t>(y) * 224 + x] = x >= 3 ? roi.at(x - 3, y) : 0.0;
    }
  }
  const Image reference = Image::from_pixels(224, 224, std::move(px));
  const Correspondences corr = find_correspondences(roi, reference, 6, 6);
  std::vector<double> dx, dy;
  for (const Correspondence& c : corr) {
    if (c.confidence < 0.9) continue;
    dx.push_back(c.target.x - c.source.x);
    dy.push_back(c.target.y - c.source.y);
  }
  REQUIRE(dx.size() >= 18);
  std::nth_element(dx.begin(), dx.begin() + dx.size() / 2, dx.end());
  std::nth_element(dy.begin(), dy.begin() + dy.size() / 2, dy.end());
  CHECK(dx[dx.size() / 2] == doctest::Approx(3.0).epsilon(0.1));
  CHECK(dy[dy.size() / 2] == doctest::Approx(0.0).epsilon(0.1));
}

TEST_CASE("correspondence search flags textureless patches") {
  const Image flat(224, 224, 0.5);
  const Image roi = test_roi(62);
  for (const Correspondence& c : find_correspondences(flat, roi, 5, 4)) {
    CHECK(c.confidence == 0.0);
  }
  CHECK(testutil::thrown_code([&] {
          find_correspondences(roi, Image(100, 100, 0.0), 5, 4);
        }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("realignment of a probe against itself is the identity") {
  const Image roi = test_roi(63);
  const Image aligned = realign(roi, roi, RealignParams{});
  CHECK(mean_abs_diff(aligned, roi) < 0.01);
}

TEST_CASE("realignment declines gracefully without usable texture") {
  const Image flat(224, 224, 0.5);
  const Image roi = test_roi(64);
  CHECK_FALSE(realign_fit(flat, roi, RealignParams{}).has_value());
  // The declined fit passes the probe through unchanged.
  const Image out = realign(flat, roi, RealignParams{});
  for (std::size_t i = 0; i < flat.pixels().size(); ++i) {
    CHECK(out.pixels()[i] == flat.pixels()[i]);
  }
  RealignParams bad;
  bad.passes = 0;
  CHECK(testutil::thrown_code([&] { realign_fit(roi, roi, bad); }) == ErrorCode::BadArgument);
}

TEST_CASE("tps warp json serialization round trips") {
  Rng rng(17);
  Correspondences corr = grid_correspondences(4, 150.0, 25.0);
  for (Correspondence& c : corr) {
    c.target.x = c.source.x + rng.uniform(-4.0, 4.0);
    c.target.y = c.source.y + rng.uniform(-4.0, 4.0);
  }
  const TpsWarp w = fit_tps(corr, 2.0);
  const TpsWarp back = tps_warp_from_json(tps_warp_to_json(w));
  back.validate();
  REQUIRE(back.source_points.size() == w.source_points.size());
  for (std::size_t i = 0; i < w.source_points.size(); ++i) {
    CHECK(back.source_points[i].x == w.source_points[i].x);
    CHECK(back.weights[i].x == w.weights[i].x);
    CHECK(back.weights[i].y == w.weights[i].y);
  }
  for (int i = 0; i < 3; ++i) {
    CHECK(back.affine_x[i] == w.affine_x[i]);
    CHECK(back.affine_y[i] == w.affine_y[i]);
  }
  CHECK(back.lambda == w.lambda);
  CHECK(testutil::thrown_code([] { tps_warp_from_json("not json"); }) == ErrorCode::ParseError);
}
