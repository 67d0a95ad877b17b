// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "palmpipe/geometry.hpp"
#include "palmpipe/image.hpp"
#include "palmpipe/rng.hpp"
#include "palmpipe/synth.hpp"
#include "testutil.hpp"

using namespace palmpipe;

namespace {

KeypointSet template_keypoints(HandSide side = HandSide::Right) {
  return KeypointSet(CanonicalTemplate::standard().destination_points, side);
}

KeypointSet shifted(const KeypointSet& k, double dx, double dy) {
  std::array<Vec2, KeypointSet::kNumPoints> pts = k.points();
  for (Vec2& p : pts) {
    p.x += dx;
    p.y += dy;
  }
  return KeypointSet(pts, k.hand_side());
}

double max_reprojection(const Homography& h, const KeypointSet& k,
                        const std::array<Vec2, KeypointSet::kNumPoints>& dst) {
  double worst = 0.0;
  for (int i = 0; i < KeypointSet::kNumPoints; ++i) {
    const Vec2 m = h.apply(k.point(i));
    worst = std::max(worst, std::hypot(m.x - dst[i].x, m.y - dst[i].y));
  }
  return worst;
}

/// Zero-mean normalized cross correlation of two same-sized images.
double image_ncc(const Image& a, const Image& b) {
  REQUIRE(a.width() == b.width());
  REQUIRE(a.height() == b.height());
  double ma = 0.0, mb = 0.0;
  const std::size_t n = a.pixels().size();
  for (std::size_t i = 0; i < n; ++i) {
    ma += a.pixels()[i];
    mb += b.pixels()[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xa = a.pixels()[i] - ma;
    const double xb = b.pixels()[i] - mb;
    num += xa * xb;
    da += xa * xa;
    db += xb * xb;
  }
  return num / std::sqrt(da * db);
}

}  // namespace

TEST_CASE("canonical template geometry") {
  const CanonicalTemplate& t = CanonicalTemplate::standard();
  CHECK(CanonicalTemplate::kFrameSize == 320);
  CHECK(CanonicalTemplate::kCropSize == 224);
  CHECK(CanonicalTemplate::kCropX == 48);
  CHECK(CanonicalTemplate::kCropY == 48);
  // Crop window inside the reference frame.
  CHECK(CanonicalTemplate::kCropX + CanonicalTemplate::kCropSize <= CanonicalTemplate::kFrameSize);
  // Palm center sits at the documented template coordinate.
  CHECK(t.destination_points[8].x == doctest::Approx(160.0));
  CHECK(t.destination_points[8].y == doctest::Approx(172.0));
  for (const Vec2& p : t.destination_points) {
    CHECK(p.x >= 0.0);
    CHECK(p.x <= 320.0);
    CHECK(p.y >= 0.0);
    CHECK(p.y <= 320.0);
  }
}

TEST_CASE("keypoint set validation and mirroring") {
  const KeypointSet k = template_keypoints();
  k.validate(320, 320);

  // Point far outside the 10% margin is rejected.
  std::array<Vec2, KeypointSet::kNumPoints> bad = k.points();
  bad[0] = Vec2{-100.0, -100.0};
  CHECK(testutil::thrown_code([&] { KeypointSet(bad, HandSide::Right).validate(320, 320); }) ==
        ErrorCode::OutOfBounds);
  std::array<Vec2, KeypointSet::kNumPoints> nan_pts = k.points();
  nan_pts[3].x = std::nan("");
  CHECK(testutil::thrown_code([&] { KeypointSet(nan_pts, HandSide::Right).validate(); }) ==
        ErrorCode::BadArgument);

  // Mirroring flips x and the side flag but keeps the anatomical order, so
  // mirroring twice restores the original exactly.
  const KeypointSet m = k.mirrored_horizontal(320);
  CHECK(m.hand_side() == HandSide::Left);
  for (int i = 0; i < KeypointSet::kNumPoints; ++i) {
    CHECK(m.point(i).x == doctest::Approx(319.0 - k.point(i).x));
    CHECK(m.point(i).y == doctest::Approx(k.point(i).y));
  }
  const KeypointSet mm = m.mirrored_horizontal(320);
  CHECK(mm.hand_side() == HandSide::Right);
  for (int i = 0; i < KeypointSet::kNumPoints; ++i) {
    CHECK(mm.point(i).x == doctest::Approx(k.point(i).x));
  }

  CHECK(hand_side_from_name("left") == HandSide::Left);
  CHECK(hand_side_from_name("right") == HandSide::Right);
  CHECK(std::string(hand_side_name(HandSide::Left)) == "left");
  CHECK(testutil::thrown_code([] { hand_side_from_name("up"); }) == ErrorCode::SchemaViolation);
}

TEST_CASE("homography type invariants") {
  const Homography id;
  CHECK(id.at(0, 0) == 1.0);
  CHECK(id.at(2, 2) == 1.0);
  const Vec2 p = id.apply(Vec2{3.0, 4.0});
  CHECK(p.x == doctest::Approx(3.0));
  CHECK(p.y == doctest::Approx(4.0));

  // Normalization by the bottom-right entry.
  const Homography h = Homography::from_matrix({2, 0, 0, 0, 2, 0, 0, 0, 2});
  CHECK(h.at(0, 0) == doctest::Approx(1.0));
  CHECK(h.at(2, 2) == doctest::Approx(1.0));

  CHECK(testutil::thrown_code([] {
          Homography::from_matrix({1, 2, 3, 2, 4, 6, 0, 0, 1});
        }) == ErrorCode::SingularHomography);

  // inverse and compose_after agree with direct application.
  const Homography t = Homography::from_matrix({1, 0, 5, 0, 1, -2, 0, 0, 1});
  const Vec2 q = t.inverse().apply(t.apply(Vec2{1.0, 1.0}));
  CHECK(q.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q.y == doctest::Approx(1.0).epsilon(1e-12));
  const Homography tt = t.compose_after(t);
  const Vec2 r = tt.apply(Vec2{0.0, 0.0});
  CHECK(r.x == doctest::Approx(10.0));
  CHECK(r.y == doctest::Approx(-4.0));
}

TEST_CASE("homography estimation recovers zero motion and translation") {
  const CanonicalTemplate& tmpl = CanonicalTemplate::standard();

  const Homography h0 = estimate_homography(template_keypoints(), tmpl);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(h0.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
    }
  }

  // K = D + (5, 0) maps back onto D with tx = -5.
  const Homography h1 = estimate_homography(shifted(template_keypoints(), 5.0, 0.0), tmpl);
  CHECK(h1.at(0, 2) == doctest::Approx(-5.0).epsilon(1e-9));
  CHECK(h1.at(1, 2) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(max_reprojection(h1, shifted(template_keypoints(), 5.0, 0.0), tmpl.destination_points) <
        1e-6);
}

TEST_CASE("homography estimation is exact on consistent correspondences") {
  const CanonicalTemplate& tmpl = CanonicalTemplate::standard();
  Rng rng(501);
  for (int trial = 0; trial < 10; ++trial) {
    PoseAngles angles;
    angles.roll_deg = rng.uniform(-20.0, 20.0);
    angles.pitch_deg = rng.uniform(-8.0, 8.0);
    angles.yaw_deg = rng.uniform(-8.0, 8.0);
    angles.scale = rng.uniform(0.9, 1.1);
    angles.translate_x = rng.uniform(-15.0, 15.0);
    angles.translate_y = rng.uniform(-15.0, 15.0);
    const Homography truth = make_pose(angles, 416);

    std::array<Vec2, KeypointSet::kNumPoints> pts;
    for (int i = 0; i < KeypointSet::kNumPoints; ++i) {
      pts[i] = truth.apply(tmpl.destination_points[i]);
    }
    const KeypointSet k(pts, HandSide::Right);
    const Homography rec = estimate_homography(k, tmpl);
    CHECK(max_reprojection(rec, k, tmpl.destination_points) < 1e-6);
  }
}

TEST_CASE("homography estimation is consistent under coordinate scaling") {
  const CanonicalTemplate& tmpl = CanonicalTemplate::standard();
  const double s = 2.5;
  std::array<Vec2, KeypointSet::kNumPoints> pts;
  for (int i = 0; i < KeypointSet::kNumPoints; ++i) {
    pts[i] = Vec2{s * tmpl.destination_points[i].x, s * tmpl.destination_points[i].y};
  }
  const KeypointSet k(pts, HandSide::Right);
  const Homography h = estimate_homography(k, tmpl);
  CHECK(max_reprojection(h, k, tmpl.destination_points) < 1e-6);
}

TEST_CASE("homography estimation rejects degenerate keypoints") {
  std::array<Vec2, KeypointSet::kNumPoints> collinear;
  for (int i = 0; i < KeypointSet::kNumPoints; ++i) {
    collinear[i] = Vec2{10.0 + 20.0 * i, 40.0 + 10.0 * i};
  }
  CHECK(testutil::thrown_code([&] {
          estimate_homography(KeypointSet(collinear, HandSide::Right),
                              CanonicalTemplate::standard());
        }) == ErrorCode::DegenerateConfiguration);
}

TEST_CASE("image warping by identity and translation") {
  const Image img = testutil::noise_image(64, 64, 7001);

  const Image same = warp_image(img, Homography(), 64);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      CHECK(same.at(x, y) == doctest::Approx(img.at(x, y)).epsilon(1e-12));
    }
  }

  // Forward translation by (3, 0): output(x, y) = input(x - 3, y).
  const Homography t = Homography::from_matrix({1, 0, 3, 0, 1, 0, 0, 0, 1});
  const Image moved = warp_image(img, t, 64);
  for (int y = 0; y < 64; ++y) {
    for (int x = 3; x < 64; ++x) {
      CHECK(moved.at(x, y) == doctest::Approx(img.at(x - 3, y)).epsilon(1e-12));
    }
  }
  // Vacated columns are zero fill.
  for (int y = 0; y < 64; ++y) CHECK(moved.at(0, y) == 0.0);
}

TEST_CASE("warp composition matches the composed matrix") {
  const Image img = testutil::render_test_palm(42).image;
  const Homography h1 = make_pose(PoseAngles{5.0, 0.0, 0.0, 1.02, 3.0, -2.0}, 416);
  const Homography h2 = make_pose(PoseAngles{-3.0, 2.0, 0.0, 0.98, -4.0, 1.0}, 416);

  const Image two_step = warp_image(warp_image(img, h1, 416), h2, 416);
  const Image one_step = warp_image(img, h2.compose_after(h1), 416);

  double mad = 0.0;
  for (std::size_t i = 0; i < two_step.pixels().size(); ++i) {
    mad += std::abs(two_step.pixels()[i] - one_step.pixels()[i]);
  }
  mad /= static_cast<double>(two_step.pixels().size());
  CHECK(mad < 0.02);
}

TEST_CASE("roi extraction produces centered 224x224 crops") {
  const RenderResult rr = testutil::render_test_palm(11, 4.0, 1.03);
  const Image roi = extract_roi(rr.image, rr.keypoints, CanonicalTemplate::standard());
  CHECK(roi.width() == 224);
  CHECK(roi.height() == 224);

  // The generator marks the capture point that should land on the crop
  // center; mapping it through the estimated alignment must hit the center
  // within 2 px.
  const Homography h = estimate_homography(rr.keypoints, CanonicalTemplate::standard());
  const Vec2 c = h.apply(rr.roi_center_marker);
  const double cx = c.x - CanonicalTemplate::kCropX;
  const double cy = c.y - CanonicalTemplate::kCropY;
  CHECK(std::hypot(cx - 112.0, cy - 112.0) < 2.0);
}

TEST_CASE("roi extraction aligns capture pairs better than raw frames") {
  const PalmIdentity id = PalmIdentity::from_seed(77);
  CaptureParams a, b;
  a.pose = make_pose(PoseAngles{8.0, 0.0, 0.0, 1.0, 6.0, -4.0}, 416);
  b.pose = make_pose(PoseAngles{-7.0, 0.0, 0.0, 1.06, -5.0, 5.0}, 416);
  a.capture_seed = 1;
  b.capture_seed = 2;
  const RenderResult ra = render_palm(id, a, 416);
  const RenderResult rb = render_palm(id, b, 416);

  const CanonicalTemplate& tmpl = CanonicalTemplate::standard();
  const double roi_ncc = image_ncc(extract_roi(ra.image, ra.keypoints, tmpl),
                                   extract_roi(rb.image, rb.keypoints, tmpl));
  const double raw_ncc = image_ncc(ra.image, rb.image);
  CHECK(roi_ncc > raw_ncc);
}

TEST_CASE("roi polygon projection round trips the crop corners") {
  const std::array<Vec2, 4> ident = project_roi_polygon(Homography(), CanonicalTemplate::standard());
  CHECK(ident[0].x == doctest::Approx(48.0));
  CHECK(ident[0].y == doctest::Approx(48.0));
  CHECK(ident[1].x == doctest::Approx(271.0));
  CHECK(ident[1].y == doctest::Approx(48.0));
  CHECK(ident[2].x == doctest::Approx(271.0));
  CHECK(ident[2].y == doctest::Approx(271.0));
  CHECK(ident[3].x == doctest::Approx(48.0));
  CHECK(ident[3].y == doctest::Approx(271.0));

  // Pure translation: corners shift by the inverse translation.
  const Homography t = Homography::from_matrix({1, 0, 7, 0, 1, -3, 0, 0, 1});
  const std::array<Vec2, 4> moved = project_roi_polygon(t, CanonicalTemplate::standard());
  CHECK(moved[0].x == doctest::Approx(48.0 - 7.0));
  CHECK(moved[0].y == doctest::Approx(48.0 + 3.0));

  // Forward-mapping the polygon reproduces the corners within 1e-9.
  const Homography h = make_pose(PoseAngles{12.0, 4.0, -3.0, 1.05, 8.0, 2.0}, 416);
  const std::array<Vec2, 4> poly = project_roi_polygon(h, CanonicalTemplate::standard());
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2 back = h.apply(poly[i]);
    const Vec2 corner = ident[i];
    CHECK(std::hypot(back.x - corner.x, back.y - corner.y) < 1e-9);
  }
}

TEST_CASE("bilinear sampling contract") {
  Image img(4, 4, 0.3);
  CHECK(bilinear_sample(img, 1.7, 2.2) == doctest::Approx(0.3));

  Image ramp(4, 1, 0.0);
  ramp.set(1, 0, 0.0);
  ramp.set(2, 0, 1.0);
  CHECK(bilinear_sample(ramp, 1.5, 0.0) == doctest::Approx(0.5));

  const Image noise = testutil::noise_image(8, 8, 99);
  CHECK(bilinear_sample(noise, 5.0, 7.0) == noise.at(5, 7));
  // Continuity: 1e-6 coordinate change moves the value by < 1e-4.
  const double v1 = bilinear_sample(noise, 3.25, 4.75);
  const double v2 = bilinear_sample(noise, 3.25 + 1e-6, 4.75 + 1e-6);
  CHECK(std::abs(v1 - v2) < 1e-4);

  CHECK(testutil::thrown_code([&] { bilinear_sample(noise, -0.5, 0.0); }) ==
        ErrorCode::OutOfBounds);
  CHECK(bilinear_sample_or_zero(noise, -0.5, 0.0) == 0.0);
  CHECK(bilinear_sample_or_zero(noise, 2.0, 2.0) == noise.at(2, 2));
}

TEST_CASE("image construction validates pixel buffers") {
  CHECK(testutil::thrown_code([] { Image::from_pixels(2, 2, {0.1, 0.2, 0.3}); }) ==
        ErrorCode::BadArgument);
  CHECK(testutil::thrown_code([] { Image::from_pixels(2, 1, {0.1, 1.5}); }) ==
        ErrorCode::BadArgument);
  CHECK(testutil::thrown_code([] { Image::from_pixels(2, 1, {0.1, std::nan("")}); }) ==
        ErrorCode::BadArgument);

  const Image img = testutil::noise_image(5, 3, 4);
  const Image twice = img.mirrored_horizontal().mirrored_horizontal();
  CHECK(twice.pixels().size() == img.pixels().size());
  for (std::size_t i = 0; i < img.pixels().size(); ++i) {
    CHECK(twice.pixels()[i] == img.pixels()[i]);
  }
}
