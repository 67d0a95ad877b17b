// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_GEOMETRY_HPP
#define PALMPIPE_GEOMETRY_HPP

#include <array>
#include <string>

#include "palmpipe/image.hpp"

namespace palmpipe {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

enum class HandSide { Right = 0, Left = 1 };

const char* hand_side_name(HandSide side);
HandSide hand_side_from_name(const std::string& name);

/// The 9 ordered palm landmarks. Index convention (fixed everywhere):
///   0 index/middle valley   1 middle/ring valley   2 ring/little valley
///   3 thumb/index valley    4 wrist base, radial   5 wrist base, ulnar
///   6 lateral extremum, radial (thumb side)        7 lateral extremum, ulnar
///   8 palm center
/// Layout is for a right hand, fingers up; left hands are mirrored before
/// alignment and carry hand_side metadata.
class KeypointSet {
 public:
  static constexpr int kNumPoints = 9;

  KeypointSet() = default;
  KeypointSet(const std::array<Vec2, kNumPoints>& points, HandSide side);

  const std::array<Vec2, kNumPoints>& points() const noexcept { return points_; }
  const Vec2& point(int i) const { return points_[i]; }
  HandSide hand_side() const noexcept { return side_; }

  /// Checks finiteness and, when image dimensions are given, that every
  /// point lies within the image rectangle expanded by a 10% margin.
  void validate(int image_width = 0, int image_height = 0) const;

  KeypointSet mirrored_horizontal(int image_width) const;

 private:
  std::array<Vec2, kNumPoints> points_{};
  HandSide side_ = HandSide::Right;
};

/// 3x3 projective transform, normalized so the bottom-right entry is 1.
class Homography {
 public:
  Homography();  // identity

  /// Normalizes by the bottom-right entry and rejects singular matrices
  /// (|det| <= 1e-12 after normalization).
  static Homography from_matrix(const std::array<double, 9>& row_major);

  const std::array<double, 9>& matrix() const noexcept { return m_; }
  double at(int row, int col) const { return m_[row * 3 + col]; }

  Vec2 apply(const Vec2& p) const;
  Homography inverse() const;
  Homography compose_after(const Homography& first) const;  // this * first

 private:
  std::array<double, 9> m_{};
};

/// Fixed destination geometry for coarse alignment: 9 canonical points in a
/// 320x320 reference frame and the 224x224 crop window at (48,48).
struct CanonicalTemplate {
  static constexpr int kFrameSize = 320;
  static constexpr int kCropSize = 224;
  static constexpr int kCropX = 48;
  static constexpr int kCropY = 48;

  std::array<Vec2, KeypointSet::kNumPoints> destination_points;

  static const CanonicalTemplate& standard();
};

/// Least-squares DLT over the 9 correspondences K[i] -> D[i] with
/// Hartley-style coordinate pre-normalization. Exact for
/// homography-consistent input. Raises DegenerateConfiguration when the
/// design matrix is rank-deficient (tolerance 1e-9).
Homography estimate_homography(const KeypointSet& keypoints, const CanonicalTemplate& tmpl);

/// Inverse-mapping resample of img through H into an out_size x out_size
/// frame; out-of-source pixels are 0.
Image warp_image(const Image& img, const Homography& h, int out_size);

/// Coarse alignment: estimate_homography + warp into the 320x320 reference
/// frame + fixed 224x224 crop.
Image extract_roi(const Image& img, const KeypointSet& keypoints, const CanonicalTemplate& tmpl);

/// Maps the 4 crop-window corners through H^-1 into source-image
/// coordinates (overlay polygon of the captured palmar region).
std::array<Vec2, 4> project_roi_polygon(const Homography& h, const CanonicalTemplate& tmpl);

}  // namespace palmpipe

#endif
